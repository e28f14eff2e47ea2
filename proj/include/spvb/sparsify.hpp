#ifndef SPVB_SPARSIFY_HPP
#define SPVB_SPARSIFY_HPP

// Turning dense variational means into sparse point estimates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "spvb/core_model.hpp"
#include "spvb/special_math.hpp"

namespace spvb {

template <typename Scalar = double>
struct SparseCoefficients {
  Vector<Scalar> beta_hat;
  std::vector<Index> support;  // ascending; always contains 0
  Scalar kappa = 0;
  Scalar aic = 0;
  Index df = 0;
  Vector<Scalar> p_binary;  // thresholded inclusion indicators (all ones for hard thresholding)
};

/// sum_i [y_i X_i beta - exp(X_i beta) - log y_i!]; -inf if a rate overflows.
template <typename Scalar>
Scalar poisson_loglik(const Vector<Scalar>& beta, const Dataset<Scalar>& data) {
  if (beta.size() != data.p()) throw ContractError("poisson_loglik: beta must have length p");
  const Vector<Scalar> eta = data.design * beta;
  Scalar total = 0;
  for (Index i = 0; i < eta.size(); ++i) {
    const Scalar rate = std::exp(eta(i));
    if (!std::isfinite(rate)) return -std::numeric_limits<Scalar>::infinity();
    const Scalar y = data.response(i);
    total += y * eta(i) - rate - log_gamma(y + Scalar(1));
  }
  return total;
}

enum class AicForm {
  Halved,       // -log L + 2 df
  Conventional  // -2 log L + 2 df
};

template <typename Scalar>
Scalar information_criterion(Scalar loglik, Index df, AicForm form = AicForm::Halved) {
  const Scalar scale = form == AicForm::Halved ? Scalar(1) : Scalar(2);
  return -scale * loglik + Scalar(2) * Scalar(df);
}

namespace detail {

template <typename Scalar>
void fill_support(SparseCoefficients<Scalar>& out) {
  out.support.clear();
  for (Index j = 0; j < out.beta_hat.size(); ++j) {
    if (j == 0 || out.beta_hat(j) != Scalar(0)) out.support.push_back(j);
  }
  out.df = static_cast<Index>(out.support.size());
}

}  // namespace detail

/// Keeps slope j when P_j > 0.5 (strictly); the intercept is always kept.
template <typename Scalar>
SparseCoefficients<Scalar> threshold_bernoulli(const FitResult<Scalar>& fit) {
  if (fit.method != Method::Bernoulli) throw ContractError("threshold_bernoulli requires a Bernoulli fit");
  const Index p = fit.posterior.size();
  SparseCoefficients<Scalar> out;
  out.beta_hat = fit.posterior.mean;
  out.p_binary = Vector<Scalar>::Ones(p);
  for (Index j = 1; j < p; ++j) {
    if (!(fit.inclusion_prob(j) > Scalar(0.5))) {
      out.beta_hat(j) = Scalar(0);
      out.p_binary(j) = Scalar(0);
    }
  }
  detail::fill_support(out);
  return out;
}

/// 50 log-spaced thresholds from 1e-4 to max_j |mu_j| over the slopes.
template <typename Scalar>
Vector<Scalar> default_threshold_grid(const Vector<Scalar>& mean, Index points = 50) {
  Scalar top = 0;
  for (Index j = 1; j < mean.size(); ++j) top = std::max(top, std::abs(mean(j)));
  const Scalar bottom = Scalar(1e-4);
  if (!(top > bottom)) return Vector<Scalar>::Constant(1, bottom);
  Vector<Scalar> grid(points);
  const Scalar lo = std::log(bottom), hi = std::log(top);
  for (Index k = 0; k < points; ++k) {
    grid(k) = std::exp(lo + (hi - lo) * Scalar(k) / Scalar(points - 1));
  }
  grid(points - 1) = top;
  return grid;
}

/// Zeroes slopes with |mu_j| <= kappa.
template <typename Scalar>
Vector<Scalar> hard_threshold(const Vector<Scalar>& mean, Scalar kappa) {
  Vector<Scalar> out = mean;
  for (Index j = 1; j < out.size(); ++j) {
    if (std::abs(out(j)) <= kappa) out(j) = Scalar(0);
  }
  return out;
}

/// Hard threshold chosen by minimizing the information criterion over the
/// grid. Ties go to the larger threshold. A threshold of exactly zero keeps
/// every coefficient.
template <typename Scalar>
SparseCoefficients<Scalar> threshold_hard(const FitResult<Scalar>& fit, const Dataset<Scalar>& data,
                                          const Vector<Scalar>& grid, AicForm form = AicForm::Halved) {
  if (fit.method == Method::Bernoulli) throw ContractError("threshold_hard applies to Laplace and CS fits");
  if (grid.size() == 0) throw ContractError("threshold_hard: empty grid");
  const Vector<Scalar>& mean = fit.posterior.mean;
  SparseCoefficients<Scalar> best;
  bool have = false;
  for (Index k = 0; k < grid.size(); ++k) {
    const Scalar kappa = grid(k);
    if (!(kappa >= Scalar(0))) throw ContractError("threshold_hard: negative threshold");
    SparseCoefficients<Scalar> cand;
    cand.kappa = kappa;
    cand.beta_hat = kappa == Scalar(0) ? mean : hard_threshold(mean, kappa);
    detail::fill_support(cand);
    cand.aic = information_criterion(poisson_loglik(cand.beta_hat, data), cand.df, form);
    if (!have || cand.aic < best.aic || (cand.aic == best.aic && kappa > best.kappa)) {
      best = std::move(cand);
      have = true;
    }
  }
  best.p_binary = Vector<Scalar>::Ones(mean.size());
  return best;
}

template <typename Scalar>
SparseCoefficients<Scalar> threshold_hard(const FitResult<Scalar>& fit, const Dataset<Scalar>& data,
                                          AicForm form = AicForm::Halved) {
  return threshold_hard(fit, data, default_threshold_grid(fit.posterior.mean), form);
}

/// The method-appropriate rule: probability threshold for Bernoulli fits,
/// criterion-selected hard threshold otherwise.
template <typename Scalar>
SparseCoefficients<Scalar> sparsify(const FitResult<Scalar>& fit, const Dataset<Scalar>& data,
                                    AicForm form = AicForm::Halved) {
  if (fit.method == Method::Bernoulli) {
    SparseCoefficients<Scalar> out = threshold_bernoulli(fit);
    out.aic = information_criterion(poisson_loglik(out.beta_hat, data), out.df, form);
    return out;
  }
  return threshold_hard(fit, data, form);
}

}  // namespace spvb

#endif  // SPVB_SPARSIFY_HPP
