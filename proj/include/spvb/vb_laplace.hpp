#ifndef SPVB_VB_LAPLACE_HPP
#define SPVB_VB_LAPLACE_HPP

// Coordinate-ascent variational Bayes for Poisson regression under the
// hierarchical Laplace prior:
//   beta_j | tau_j ~ N(0, tau_j),  tau_j | eta ~ Exp(eta / 2),  eta ~ Gamma(nu, delta)
//   beta_0 | tau_0 ~ N(0, tau_0),  tau_0 | a ~ Inv-Gamma(1/2, 1/a),  a ~ Inv-Gamma(1/2, 1/A)

#include <cmath>
#include <string>

#include "spvb/core_model.hpp"
#include "spvb/likelihood_approx.hpp"
#include "spvb/special_math.hpp"

namespace spvb {

template <typename Scalar = double>
struct LaplaceState {
  GaussianPosterior<Scalar> posterior;
  Vector<Scalar> e_tau;      // E(tau_j); entry 0 unused
  Vector<Scalar> e_tau_inv;  // E(1 / tau_j), entry 0 is the intercept
  Scalar e_eta = 0;
  Scalar e_a_inv = 0;
  QuadApprox<Scalar> quad;

  // Parameters of the q-densities behind the expectations above.
  Scalar eta_shape = 0, eta_rate = 0;  // q(eta) = Gamma(shape, rate)
  Vector<Scalar> gig_a, gig_b;         // q(tau_j) = GIG(1/2, a_j, b_j), j >= 1
  Scalar tau0_scale = 1;               // q(tau_0) = Inv-Gamma(1, scale)
  Scalar a_scale = 1;                  // q(a) = Inv-Gamma(1, scale)
};

template <typename Scalar>
GaussianPosterior<Scalar> update_beta_laplace(LaplaceState<Scalar>& s, const Dataset<Scalar>& data,
                                              XiUpdate xi = XiUpdate::Refresh) {
  Matrix<Scalar> precision = s.quad.s_x_xi;
  precision.diagonal() += s.e_tau_inv;
  s.posterior = gaussian_from_precision(precision, score_term(s.quad, data));
  if (xi == XiUpdate::Refresh) s.quad = refresh<Scalar>(data.design * s.posterior.mean, data);
  return s.posterior;
}

template <typename Scalar>
LaplaceState<Scalar> init_laplace(const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  require_valid(data);
  hp.check(data.p());
  const Index p = data.p();
  LaplaceState<Scalar> s;
  s.e_tau = Vector<Scalar>::Ones(p);
  s.e_tau_inv = Vector<Scalar>::Ones(p);
  s.e_eta = hp.nu / hp.delta;
  s.e_a_inv = hp.A;
  s.eta_shape = Scalar(p) + hp.nu - Scalar(1);
  s.eta_rate = s.eta_shape / s.e_eta;
  // A GIG(1/2, a, b) with a = b has E(1/tau) = 1; pick a = b = 1 so that the
  // stored parameters agree with the initial expectations up to E(tau).
  s.gig_a = Vector<Scalar>::Ones(p);
  s.gig_b = Vector<Scalar>::Ones(p);
  for (Index j = 1; j < p; ++j) s.e_tau(j) = gig_moments(GigParams<Scalar>{Scalar(0.5), Scalar(1), Scalar(1)}).mean;
  s.tau0_scale = Scalar(1);
  s.a_scale = Scalar(1) / hp.A;
  s.quad = refresh<Scalar>(initial_expansion(data), data);
  try {
    update_beta_laplace(s, data);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("initialization failed: ") + e.what());
  }
  return s;
}

template <typename Scalar>
LaplaceState<Scalar>& update_hypers_laplace(LaplaceState<Scalar>& s, const Hyperparameters<Scalar>& hp) {
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  if (!((d.array() > Scalar(0)).all())) throw NumericalError("non-positive second moment of beta");

  s.eta_shape = Scalar(p) + hp.nu - Scalar(1);
  s.eta_rate = hp.delta + Scalar(0.5) * s.e_tau.tail(p - 1).sum();
  s.e_eta = s.eta_shape / s.eta_rate;

  for (Index j = 1; j < p; ++j) {
    s.gig_a(j) = s.e_eta;
    s.gig_b(j) = d(j);
    const auto m = gig_moments(GigParams<Scalar>{Scalar(0.5), s.e_eta, d(j)});
    s.e_tau(j) = m.mean;
    s.e_tau_inv(j) = m.inv_mean;
  }

  s.tau0_scale = Scalar(0.5) * d(0) + s.e_a_inv;
  s.e_tau_inv(0) = Scalar(1) / s.tau0_scale;
  s.a_scale = s.e_tau_inv(0) + Scalar(1) / hp.A;
  s.e_a_inv = Scalar(1) / s.a_scale;
  return s;
}

/// The closed-form ELBO reported alongside the algorithm, constant dropped.
template <typename Scalar>
Scalar elbo_laplace_reported(const LaplaceState<Scalar>& s, const Dataset<Scalar>& data,
                             const Hyperparameters<Scalar>& hp) {
  using detail::checked;
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  const Scalar inv_a = Scalar(1) / hp.A;
  const Scalar t0_inv = s.e_tau_inv(0);
  const Scalar e_log_tau0 = std::log(Scalar(0.5) * d(0) + s.e_a_inv) - digamma(Scalar(1));

  Scalar total = checked(approx_loglik(s.quad, data, s.posterior.mean, s.posterior.second_moment()), "likelihood");
  total += checked(-Scalar(0.5) * e_log_tau0 - Scalar(0.5) * t0_inv * d(0), "intercept prior");
  const Scalar eta_shape = Scalar(p) + hp.nu - Scalar(1);
  total += checked(-hp.delta * eta_shape / (hp.delta + Scalar(0.5) * s.e_tau.tail(p - 1).sum()), "eta");
  total += checked(-Scalar(2) * std::log(inv_a + t0_inv), "a");
  total += checked(-Scalar(0.5) * std::log(Scalar(0.5) * d(0) + s.e_a_inv), "tau0 entropy");
  total += checked(-s.e_a_inv * t0_inv - inv_a / (inv_a + t0_inv), "a cross");
  total += checked(Scalar(0.5) * s.posterior.log_det, "beta entropy");
  Scalar tau_terms = 0;
  for (Index j = 1; j < p; ++j) {
    tau_terms += -Scalar(0.25) * std::log(s.e_eta / d(j)) + log_bessel_k_half(std::sqrt(s.e_eta * d(j)));
  }
  total += checked(tau_terms, "tau");
  return total;
}

/// Exact ELBO of the quadratic surrogate at the stored q-densities, constant
/// dropped. Every update above maximises it in its own block.
template <typename Scalar>
Scalar elbo_laplace(const LaplaceState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  using detail::checked;
  const Index p = s.posterior.size();
  const Vector<Scalar> d = s.posterior.second_moment_diag();
  const Scalar psi1 = digamma(Scalar(1));

  const Scalar e_log_eta = digamma(s.eta_shape) - std::log(s.eta_rate);
  const Scalar e_tau0_inv = Scalar(1) / s.tau0_scale;
  const Scalar e_log_tau0 = std::log(s.tau0_scale) - psi1;
  const Scalar e_a_inv = Scalar(1) / s.a_scale;
  const Scalar e_log_a = std::log(s.a_scale) - psi1;

  Scalar total = checked(approx_loglik(s.quad, data, s.posterior.mean, s.posterior.second_moment()), "likelihood");
  total += checked(Scalar(0.5) * s.posterior.log_det, "beta entropy");

  // For j >= 1 the -1/2 E log tau_j of the normal prior cancels the matching
  // part of the GIG entropy, so only the remaining pieces appear.
  Scalar tau_terms = 0;
  for (Index j = 1; j < p; ++j) {
    const Scalar a = s.gig_a(j), b = s.gig_b(j);
    tau_terms += -Scalar(0.5) * s.e_tau_inv(j) * d(j) + e_log_eta - Scalar(0.5) * s.e_eta * s.e_tau(j);
    tau_terms += -Scalar(0.25) * std::log(a / b) + log_bessel_k_half(std::sqrt(a * b)) +
                 Scalar(0.5) * (a * s.e_tau(j) + b * s.e_tau_inv(j));
  }
  total += checked(tau_terms, "tau");

  total += checked(-Scalar(0.5) * e_log_tau0 - Scalar(0.5) * e_tau0_inv * d(0), "intercept prior");
  total += checked(-Scalar(0.5) * e_log_a - Scalar(1.5) * e_log_tau0 - e_a_inv * e_tau0_inv, "tau0 prior");
  total += checked(-Scalar(1.5) * e_log_a - e_a_inv / hp.A, "a prior");
  total += checked((hp.nu - Scalar(1)) * e_log_eta - hp.delta * s.e_eta, "eta prior");

  const auto gamma_entropy = [](Scalar shape, Scalar rate) {
    return shape - std::log(rate) + log_gamma(shape) + (Scalar(1) - shape) * digamma(shape);
  };
  // Inv-Gamma(1, scale) entropy: 1 + log scale - 2 psi(1).
  total += checked(gamma_entropy(s.eta_shape, s.eta_rate), "eta entropy");
  total += checked(Scalar(1) + std::log(s.tau0_scale) - Scalar(2) * psi1, "tau0 entropy");
  total += checked(Scalar(1) + std::log(s.a_scale) - Scalar(2) * psi1, "a entropy");
  return total;
}

/// One full pass: beta block, then eta, tau, tau_0, a.
template <typename Scalar>
void sweep_laplace(LaplaceState<Scalar>& s, const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp,
                   XiUpdate xi = XiUpdate::Refresh) {
  update_beta_laplace(s, data, xi);
  update_hypers_laplace(s, hp);
}

template <typename Scalar>
FitResult<Scalar> fit_laplace(const Dataset<Scalar>& data, const Hyperparameters<Scalar>& hp) {
  return detail::ascend<Scalar>(
      init_laplace(data, hp), hp, [&](LaplaceState<Scalar>& s) { sweep_laplace(s, data, hp); },
      [&](const LaplaceState<Scalar>& s) { return elbo_laplace(s, data, hp); },
      [&](const LaplaceState<Scalar>& s, FitResult<Scalar>& r) {
        const Index p = s.posterior.size();
        r.method = Method::Laplace;
        r.posterior = s.posterior;
        r.inclusion_prob = Vector<Scalar>::Ones(p);
        r.hyper_expectations["e_tau"] = s.e_tau;
        r.hyper_expectations["e_tau_inv"] = s.e_tau_inv;
        r.hyper_expectations["e_eta"] = Vector<Scalar>::Constant(1, s.e_eta);
        r.hyper_expectations["e_a_inv"] = Vector<Scalar>::Constant(1, s.e_a_inv);
      });
}

}  // namespace spvb

#endif  // SPVB_VB_LAPLACE_HPP
