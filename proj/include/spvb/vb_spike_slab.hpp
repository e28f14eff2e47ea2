#ifndef SPVB_VB_SPIKE_SLAB_HPP
#define SPVB_VB_SPIKE_SLAB_HPP

// Coordinate-ascent variational Bayes under the continuous spike-and-slab prior:
//   beta_j | Z_j, tau^2 ~ N(0, tau^2 (Z_j + c (1 - Z_j))),  Z_j | pi_j ~ Ber(pi_j),
//   pi_j ~ Beta(rho1, rho2),  tau^2 | a ~ Inv-Gamma(1/2, 1/a),  a ~ Inv-Gamma(1/2, 1/A)
// The intercept always sits in the slab (Z_0 = 1).

#include <algorithm>
#include <cmath>

#include "spvb/core_model.hpp"
#include "spvb/likelihood_approx.hpp"
#include "spvb/special_math.hpp"

namespace spvb {

template <typename Scalar = double>
struct CsState {
  GaussianPosterior<Scalar> posterior;
  Vector<Scalar> p_incl;  // q(Z_j = 1); entry 0 is 1
  Scalar e_tau2_inv = 1;
  Scalar e_a_inv = 0;
  Vector<Scalar> e_log_pi;    // entry 0 unused
  Vector<Scalar> e_log_1mpi;  // entry 0 unused
  Vector<Scalar> pi_a, pi_b;  // q(pi_j) = Beta(pi_a_j, pi_b_j)
  QuadApprox<Scalar> quad;
  Scalar alpha_tau2 = 0, beta_tau2 = 0;  // q(tau^2) = Inv-Gamma(alpha, beta)
  Scalar a_scale = 1;                    // q(a) = Inv-Gamma(1, scale)
};

namespace detail {

// q(pi_j) = Beta(rho1 + P_j, rho2 + 1 - P_j).
template <typename Scalar, typename State>
void pi_expectations(State& s, const Hyperparameters<Scalar>& hp) {
  const Index p = s.p_incl.size();
  const Scalar psi_total = digamma(hp.rho1 + hp.rho2 + Scalar(1));
  s.pi_a = Vector<Scalar>::Zero(p);
  s.pi_b = Vector<Scalar>::Zero(p);
  s.e_log_pi = Vector<Scalar>::Zero(p);
  s.e_log_1mpi = Vector<Scalar>::Zero(p);
  for (Index j = 1; j < p; ++j) {
    s.pi_a(j) = hp.rho1 + s.p_incl(j);
    s.pi_b(j) = hp.rho2 - s.p_incl(j) + Scalar(1);
    s.e_log_pi(j) = digamma(s.pi_a(j)) - psi_total;
    s.e_log_1mpi(j) = digamma(s.pi_b(j)) - psi_total;
  }
}

// -[P log P + (1 - P) log(1 - P)] with 0 log 0 = 0.
template <typename Scalar>
Scalar bernoulli_entropy(Scalar prob) {
  Scalar h = 0;
  if (prob > Scalar(0)) h -= prob * std::log(prob);
  if (prob < Scalar(1)) h -= (Scalar(1) - prob) * std::log1p(-prob);
  return h;
}

template <typename Scalar>
Scalar beta_entropy(Scalar a, Scalar b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b) - (a - Scalar(1)) * digamma(a) -
         (b - Scalar(1)) * digamma(b) + (a + b - Scalar(2)) * digamma(a + b);
}

}  // namespace detail

/// Shape of q(tau^2): 1/2 from the Inv-Gamma(1/2, 1/a) prior plus 1/2 for
/// each of the p coefficients it scales, intercept included.
template <typename Scalar>
Scalar cs_tau2_shape(Index p) {
  return Scalar(p + 1) / Scalar(2);
}

template <typename Scalar>
GaussianPosterior<Scalar> update_beta_cs(CsState<Scalar>& s, const Dataset<Scalar>& data,
                                         const Hyperparameters<Scalar>& hp, XiUpdate xi = XiUpdate::Refresh) {
  Matrix<Scalar> precision = s.quad.s_x_xi;
  precision.diagonal().array() +=
      s.e_tau2_inv * (s.p_incl.array() + (Scalar(1) - s.p_incl.array()) / hp.c);
  s.posterior = gaussian_from_precision(precision, score_term(s.quad, data));
  if (xi == XiUpdate::Refresh) s.quad = refresh<Scalar>(data.design * s.posterior.mean, data);
  return s.posterior;
}

/// Updates q(tau^2) and then q(a), in the order the algorithm lists them.
template <typename Scalar>
CsState<Scalar>& update_tau2_cs(CsState<Scalar>& s, const Hyperparameters<Scalar>& hp) {
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  s.alpha_tau2 = cs_tau2_shape<Scalar>(s.posterior.size());
  s.beta_tau2 = Scalar(0.5) * (s.p_incl.array() * d.array()).sum() +
                Scalar(0.5) / hp.c * ((Scalar(1) - s.p_incl.array()) * d.array()).sum() + s.e_a_inv;
  if (!(s.beta_tau2 > Scalar(0)) || !std::isfinite(s.beta_tau2)) {
    throw NumericalError("non-positive scale for q(tau^2)");
  }
  s.e_tau2_inv = s.alpha_tau2 / s.beta_tau2;
  s.a_scale = s.e_tau2_inv + Scalar(1) / hp.A;
  s.e_a_inv = Scalar(1) / s.a_scale;
  return s;
}

/// E(log tau^2) under q(tau^2).
template <typename Scalar>
Scalar cs_e_log_tau2(const CsState<Scalar>& s) {
  return std::log(s.beta_tau2) - digamma(s.alpha_tau2);
}

/// Refreshes the pi-expectations from the current P, then P itself.
template <typename Scalar>
const Vector<Scalar>& update_z_cs(CsState<Scalar>& s, const Hyperparameters<Scalar>& hp) {
  detail::pi_expectations(s, hp);
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  const Scalar slope = -Scalar(0.5) * s.e_tau2_inv * (Scalar(1) - Scalar(1) / hp.c);
  // The spike's density is 1 / sqrt(c) times taller at zero, which costs the
  // slab 1/2 log c in log-odds.
  const Scalar height = Scalar(0.5) * std::log(hp.c);
  for (Index j = 1; j < s.p_incl.size(); ++j) {
    s.p_incl(j) = sigmoid(s.e_log_pi(j) - s.e_log_1mpi(j) + height + slope * d(j));
  }
  s.p_incl(0) = Scalar(1);
  return s.p_incl;
}

template <typename Scalar>
CsState<Scalar> init_cs(const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp,
                        Scalar initial_inclusion = Scalar(1)) {
  require_valid(data);
  hp.check(data.p());
  if (!(initial_inclusion > Scalar(0) && initial_inclusion <= Scalar(1))) {
    throw ContractError("init_cs: initial inclusion must lie in (0, 1]");
  }
  const Index p = data.p();
  CsState<Scalar> s;
  s.p_incl = Vector<Scalar>::Constant(p, initial_inclusion);
  s.p_incl(0) = Scalar(1);
  s.e_tau2_inv = Scalar(1);
  s.e_a_inv = hp.A;
  s.alpha_tau2 = cs_tau2_shape<Scalar>(p);
  s.beta_tau2 = s.alpha_tau2;
  s.a_scale = Scalar(1) / hp.A;
  detail::pi_expectations(s, hp);
  s.quad = refresh<Scalar>(initial_expansion(data), data);
  try {
    update_beta_cs(s, data, hp);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("initialization failed: ") + e.what());
  }
  return s;
}

/// The closed-form ELBO reported alongside the algorithm, constant dropped.
template <typename Scalar>
Scalar elbo_cs_reported(const CsState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  using detail::checked;
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  const Scalar e_log_tau2 = cs_e_log_tau2(s);
  Scalar total = checked(approx_loglik(s.quad, data, s.posterior.mean, s.posterior.second_moment()), "likelihood");
  Scalar slab = 0, spike = 0, odds = 0, pi_prior = 0, entropy = 0;
  for (Index j = 1; j < p; ++j) {
    slab += s.p_incl(j) * d(j);
    spike += d(j);
    odds += s.p_incl(j) * (s.e_log_pi(j) - s.e_log_1mpi(j));
    pi_prior += (hp.rho1 - Scalar(1)) * s.e_log_pi(j) + (hp.rho2 - Scalar(1)) * s.e_log_1mpi(j);
    entropy += detail::bernoulli_entropy(s.p_incl(j));
  }
  total += checked(-Scalar(0.5) * (Scalar(1) - Scalar(1) / hp.c) * s.e_tau2_inv * slab -
                       Scalar(0.5) / hp.c * s.e_tau2_inv * spike,
                   "beta prior");
  total += checked(-(Scalar(1) + Scalar(p) / Scalar(2)) * e_log_tau2 - std::log(Scalar(1) / hp.A + s.e_tau2_inv) -
                       Scalar(0.5) * s.e_tau2_inv * s.e_a_inv,
                   "tau2 prior");
  total += checked(odds + pi_prior, "pi");
  total += checked(-s.e_a_inv / hp.A, "a prior");
  total += checked(Scalar(0.5) * s.posterior.log_det, "beta entropy");
  total += checked(-s.alpha_tau2 * std::log(s.beta_tau2) + log_gamma(s.alpha_tau2) +
                       (s.alpha_tau2 - Scalar(1)) * e_log_tau2 + s.beta_tau2 * s.e_tau2_inv,
                   "tau2 entropy");
  total += checked(entropy, "inclusion entropy");
  return total;
}

/// Exact ELBO of the quadratic surrogate at the stored q-densities, constant
/// dropped.
template <typename Scalar>
Scalar elbo_cs(const CsState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  using detail::checked;
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  const Scalar e_log_tau2 = cs_e_log_tau2(s);
  const Scalar psi1 = digamma(Scalar(1));
  const Scalar e_a_inv = Scalar(1) / s.a_scale;
  const Scalar e_log_a = std::log(s.a_scale) - psi1;
  const Scalar log_c = std::log(hp.c);

  Scalar total = checked(approx_loglik(s.quad, data, s.posterior.mean, s.posterior.second_moment()), "likelihood");
  total += checked(Scalar(0.5) * s.posterior.log_det, "beta entropy");

  Scalar prior = 0, pi_terms = 0;
  for (Index j = 0; j < p; ++j) {
    const Scalar pj = s.p_incl(j);
    prior += -Scalar(0.5) * e_log_tau2 - Scalar(0.5) * (pj + (Scalar(1) - pj) / hp.c) * s.e_tau2_inv * d(j) -
             Scalar(0.5) * (Scalar(1) - pj) * log_c;
    if (j == 0) continue;
    pi_terms += pj * s.e_log_pi(j) + (Scalar(1) - pj) * s.e_log_1mpi(j) +
                (hp.rho1 - Scalar(1)) * s.e_log_pi(j) + (hp.rho2 - Scalar(1)) * s.e_log_1mpi(j) +
                detail::bernoulli_entropy(pj) + detail::beta_entropy(s.pi_a(j), s.pi_b(j));
  }
  total += checked(prior, "beta prior");
  total += checked(pi_terms, "pi");
  // tau^2 | a ~ Inv-Gamma(1/2, 1/a) and a ~ Inv-Gamma(1/2, 1/A).
  total += checked(-Scalar(0.5) * e_log_a - Scalar(1.5) * e_log_tau2 - e_a_inv * s.e_tau2_inv, "tau2 prior");
  total += checked(-Scalar(1.5) * e_log_a - e_a_inv / hp.A, "a prior");
  total += checked(s.alpha_tau2 + std::log(s.beta_tau2) + log_gamma(s.alpha_tau2) -
                       (Scalar(1) + s.alpha_tau2) * digamma(s.alpha_tau2),
                   "tau2 entropy");
  total += checked(Scalar(1) + std::log(s.a_scale) - Scalar(2) * psi1, "a entropy");
  return total;
}

template <typename Scalar>
void sweep_cs(CsState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp,
              XiUpdate xi = XiUpdate::Refresh) {
  update_beta_cs(s, data, hp, xi);
  update_tau2_cs(s, hp);
  update_z_cs(s, hp);
}

/// Runs the ascent from an all-slab start and from P = 1/2 and keeps the run
/// with the higher final ELBO. The objective is bimodal in each P_j: from
/// the all-slab start a null coefficient keeps a slab-sized variance and
/// never reaches the spike, while from P = 1/2 the spike precision can
/// swallow a weak signal.
template <typename Scalar>
FitResult<Scalar> fit_cs(const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  const auto run = [&](Scalar initial_inclusion) {
    return detail::ascend<Scalar>(
        init_cs(data, hp, initial_inclusion), hp, [&](CsState<Scalar>& s) { sweep_cs(s, data, hp); },
        [&](const CsState<Scalar>& s) { return elbo_cs(s, data, hp); },
        [&](const CsState<Scalar>& s, FitResult<Scalar>& r) {
          r.method = Method::CS;
          r.posterior = s.posterior;
          r.inclusion_prob = s.p_incl;
          r.hyper_expectations["e_tau2_inv"] = Vector<Scalar>::Constant(1, s.e_tau2_inv);
          r.hyper_expectations["e_a_inv"] = Vector<Scalar>::Constant(1, s.e_a_inv);
          r.hyper_expectations["e_log_pi"] = s.e_log_pi;
          r.hyper_expectations["e_log_1mpi"] = s.e_log_1mpi;
        });
  };
  FitResult<Scalar> slab = run(Scalar(1));
  if (data.p() == 1) return slab;
  FitResult<Scalar> half = run(Scalar(0.5));
  const auto final_elbo = [](const FitResult<Scalar>& r) {
    return r.elbo_trace.empty() ? r.initial_elbo : r.elbo_trace.back();
  };
  // A run that stopped on a numerical failure only wins if both did.
  if (slab.status.empty() != half.status.empty()) return slab.status.empty() ? slab : half;
  return final_elbo(half) > final_elbo(slab) ? half : slab;
}

}  // namespace spvb

#endif  // SPVB_VB_SPIKE_SLAB_HPP
