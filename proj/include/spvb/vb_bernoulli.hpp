#ifndef SPVB_VB_BERNOULLI_HPP
#define SPVB_VB_BERNOULLI_HPP

// Coordinate-ascent variational Bayes under the Bernoulli-Gaussian prior.
// The linear predictor is X Gamma beta with Gamma = diag(gamma):
//   beta_j | alpha_j ~ N(0, 1 / alpha_j),  alpha_j ~ Gamma(a_j, b_j),
//   gamma_j | pi_j ~ Ber(pi_j),  pi_j ~ Beta(rho1, rho2),  gamma_0 = 1.

#include <cmath>

#include "spvb/core_model.hpp"
#include "spvb/likelihood_approx.hpp"
#include "spvb/special_math.hpp"
#include "spvb/vb_spike_slab.hpp"

namespace spvb {

template <typename Scalar = double>
struct BernoulliState {
  GaussianPosterior<Scalar> posterior;
  Vector<Scalar> p_incl;  // q(gamma_j = 1); entry 0 is 1
  Vector<Scalar> e_alpha;
  Vector<Scalar> e_log_alpha;
  Vector<Scalar> alpha_shape, alpha_rate;  // q(alpha_j) = Gamma(shape, rate)
  Vector<Scalar> e_log_pi, e_log_1mpi;     // entry 0 unused
  Vector<Scalar> pi_a, pi_b;               // q(pi_j) = Beta(pi_a_j, pi_b_j)
  Matrix<Scalar> omega;                    // E(gamma gamma^T)
  QuadApprox<Scalar> quad;
};

/// Omega = P P^T + diag(P)(I - diag(P)); its diagonal is P.
template <typename Scalar>
Matrix<Scalar> inclusion_second_moment(const Vector<Scalar>& p_incl) {
  Matrix<Scalar> omega = p_incl * p_incl.transpose();
  omega.diagonal() = p_incl;
  return omega;
}

template <typename Scalar>
GaussianPosterior<Scalar> update_beta_bernoulli(BernoulliState<Scalar>& s, const Dataset<Scalar>& data,
                                                XiUpdate xi = XiUpdate::Refresh) {
  Matrix<Scalar> precision = s.quad.s_x_xi.cwiseProduct(s.omega);
  precision.diagonal() += s.e_alpha;
  const Vector<Scalar> rhs = s.p_incl.cwiseProduct(score_term(s.quad, data));
  s.posterior = gaussian_from_precision(precision, rhs);
  if (xi == XiUpdate::Refresh) {
    s.quad = refresh<Scalar>(data.design * s.p_incl.cwiseProduct(s.posterior.mean), data);
  }
  return s.posterior;
}

/// q(alpha_j) = Gamma(a_j + 1/2, b_j + d_jj / 2) for every j, intercept included.
template <typename Scalar>
const Vector<Scalar>& update_alpha_bernoulli(BernoulliState<Scalar>& s, const Hyperparameters<Scalar>& hp) {
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  if ((d.array() < Scalar(0)).any()) throw NumericalError("negative second moment of beta");
  const Index p = d.size();
  for (Index j = 0; j < p; ++j) {
    s.alpha_shape(j) = hp.a_at(j) + Scalar(0.5);
    s.alpha_rate(j) = hp.b_at(j) + Scalar(0.5) * d(j);
    s.e_alpha(j) = s.alpha_shape(j) / s.alpha_rate(j);
    s.e_log_alpha(j) = digamma(s.alpha_shape(j)) - std::log(s.alpha_rate(j));
  }
  return s.e_alpha;
}

/// Refreshes the pi-expectations from the current P, then sweeps P_1..P_{p-1}
/// in place so that each entry sees the freshest values of the others.
template <typename Scalar>
const Vector<Scalar>& update_gamma_bernoulli(BernoulliState<Scalar>& s, const Dataset<Scalar>& data,
                                             const Hyperparameters<Scalar>& hp) {
  detail::pi_expectations(s, hp);
  const Index p = s.p_incl.size();
  const Vector<Scalar>& mu = s.posterior.mean;
  const Matrix<Scalar> d = s.posterior.second_moment();
  const Matrix<Scalar>& sx = s.quad.s_x_xi;
  const Vector<Scalar> score = score_term(s.quad, data);
  for (Index j = 1; j < p; ++j) {
    Scalar cross = 0;
    for (Index i = 0; i < p; ++i) {
      if (i != j) cross += s.p_incl(i) * sx(i, j) * d(i, j);
    }
    const Scalar logit = score(j) * mu(j) - Scalar(0.5) * sx(j, j) * d(j, j) - cross + s.e_log_pi(j) -
                         s.e_log_1mpi(j);
    s.p_incl(j) = sigmoid(logit);
  }
  s.p_incl(0) = Scalar(1);
  s.omega = inclusion_second_moment(s.p_incl);
  return s.p_incl;
}

template <typename Scalar>
BernoulliState<Scalar> init_bernoulli(const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  require_valid(data);
  hp.check(data.p());
  const Index p = data.p();
  BernoulliState<Scalar> s;
  // Start from the full model. With P = 1/2 the first mean solves a
  // half-weighted system, so signals look inflated and can be switched off
  // for good before xi has settled on high-count data.
  s.p_incl = Vector<Scalar>::Ones(p);
  s.omega = inclusion_second_moment(s.p_incl);
  s.alpha_shape.resize(p);
  s.alpha_rate.resize(p);
  s.e_alpha.resize(p);
  s.e_log_alpha.resize(p);
  for (Index j = 0; j < p; ++j) {
    s.alpha_shape(j) = hp.a_at(j);
    s.alpha_rate(j) = hp.b_at(j);
    s.e_alpha(j) = hp.a_at(j) / hp.b_at(j);
    s.e_log_alpha(j) = digamma(s.alpha_shape(j)) - std::log(s.alpha_rate(j));
  }
  detail::pi_expectations(s, hp);
  s.quad = refresh<Scalar>(initial_expansion(data), data);
  try {
    update_beta_bernoulli(s, data, XiUpdate::Freeze);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("initialization failed: ") + e.what());
  }
  return s;
}

/// Expected surrogate log-likelihood under q(beta) q(gamma), dropping -sum log y_i!.
template <typename Scalar>
Scalar bernoulli_loglik(const BernoulliState<Scalar>& s, const Dataset<Scalar>& data) {
  const Vector<Scalar>& xi = s.quad.xi;
  const Scalar constant = -(s.quad.exp_xi.array() * (Scalar(1) - xi.array() + Scalar(0.5) * xi.array().square())).sum();
  const Scalar linear = score_term(s.quad, data).dot(s.p_incl.cwiseProduct(s.posterior.mean));
  const Scalar quadratic = -Scalar(0.5) * (s.quad.s_x_xi.cwiseProduct(s.omega).cwiseProduct(s.posterior.second_moment())).sum();
  return constant + linear + quadratic;
}

/// The closed-form ELBO reported alongside the algorithm, constant dropped.
template <typename Scalar>
Scalar elbo_bernoulli_reported(const BernoulliState<Scalar>& s, const Dataset<Scalar>& data,
                               const Hyperparameters<Scalar>& hp) {
  using detail::checked;
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  const Vector<Scalar>& xi = s.quad.xi;
  Scalar total = checked(score_term(s.quad, data).dot(s.p_incl.cwiseProduct(s.posterior.mean)), "linear");
  total += checked(-Scalar(0.5) * (s.quad.s_x_xi.cwiseProduct(s.omega).cwiseProduct(s.posterior.second_moment())).sum(),
                   "quadratic");
  total += checked(-(s.quad.exp_xi.array() + xi.array() - Scalar(0.5) * xi.array().square()).sum(), "expansion");
  total += checked(-Scalar(0.5) * d.dot(s.e_alpha), "beta prior");
  total += checked(Scalar(0.5) * s.posterior.log_det, "beta entropy");
  Scalar log_alpha = 0, entropy = 0, pi_terms = 0, alpha_terms = 0;
  for (Index j = 1; j < p; ++j) {
    log_alpha += s.e_log_alpha(j);
    entropy += detail::bernoulli_entropy(s.p_incl(j));
    pi_terms += log_gamma(hp.rho1 + s.p_incl(j)) + log_gamma(hp.rho2 - s.p_incl(j) + Scalar(1));
    const Scalar shape = hp.a_at(j) + Scalar(0.5), rate = hp.b_at(j) + Scalar(0.5) * d(j);
    alpha_terms -= shape * std::log(rate) - hp.b_at(j) * shape / rate;
  }
  total += checked(Scalar(0.5) * log_alpha - Scalar(0.5) * log_alpha, "log alpha");
  total += checked(entropy, "inclusion entropy");
  total += checked(pi_terms, "pi");
  total += checked(alpha_terms, "alpha");
  return total;
}

/// Exact ELBO of the quadratic surrogate at the stored q-densities, constant dropped.
template <typename Scalar>
Scalar elbo_bernoulli(const BernoulliState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  using detail::checked;
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  Scalar total = checked(bernoulli_loglik(s, data), "likelihood");
  total += checked(Scalar(0.5) * s.posterior.log_det, "beta entropy");
  Scalar alpha_terms = 0;
  for (Index j = 0; j < p; ++j) {
    const Scalar shape = s.alpha_shape(j), rate = s.alpha_rate(j);
    alpha_terms += Scalar(0.5) * s.e_log_alpha(j) - Scalar(0.5) * s.e_alpha(j) * d(j) +
                   (hp.a_at(j) - Scalar(1)) * s.e_log_alpha(j) - hp.b_at(j) * s.e_alpha(j) +
                   hp.a_at(j) * std::log(hp.b_at(j)) - log_gamma(hp.a_at(j));
    alpha_terms += shape - std::log(rate) + log_gamma(shape) + (Scalar(1) - shape) * digamma(shape);
  }
  total += checked(alpha_terms, "alpha");
  Scalar pi_terms = 0;
  for (Index j = 1; j < p; ++j) {
    const Scalar pj = s.p_incl(j);
    pi_terms += pj * s.e_log_pi(j) + (Scalar(1) - pj) * s.e_log_1mpi(j) + (hp.rho1 - Scalar(1)) * s.e_log_pi(j) +
                (hp.rho2 - Scalar(1)) * s.e_log_1mpi(j) + detail::bernoulli_entropy(pj) +
                detail::beta_entropy(s.pi_a(j), s.pi_b(j));
  }
  total += checked(pi_terms, "pi");
  return total;
}

/// One full pass: beta, alpha, pi and gamma, then the expansion point.
template <typename Scalar>
void sweep_bernoulli(BernoulliState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp,
                     XiUpdate xi = XiUpdate::Refresh) {
  update_beta_bernoulli(s, data, XiUpdate::Freeze);
  update_alpha_bernoulli(s, hp);
  update_gamma_bernoulli(s, data, hp);
  if (xi == XiUpdate::Refresh) {
    s.quad = refresh<Scalar>(data.design * s.p_incl.cwiseProduct(s.posterior.mean), data);
  }
}

template <typename Scalar>
FitResult<Scalar> fit_bernoulli(const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  return detail::ascend<Scalar>(
      init_bernoulli(data, hp), hp, [&](BernoulliState<Scalar>& s) { sweep_bernoulli(s, data, hp); },
      [&](const BernoulliState<Scalar>& s) { return elbo_bernoulli(s, data, hp); },
      [&](const BernoulliState<Scalar>& s, FitResult<Scalar>& r) {
        r.method = Method::Bernoulli;
        r.posterior = s.posterior;
        r.inclusion_prob = s.p_incl;
        r.hyper_expectations["e_alpha"] = s.e_alpha;
        r.hyper_expectations["e_log_pi"] = s.e_log_pi;
        r.hyper_expectations["e_log_1mpi"] = s.e_log_1mpi;
      });
}

}  // namespace spvb

#endif  // SPVB_VB_BERNOULLI_HPP
