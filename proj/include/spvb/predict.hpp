#ifndef SPVB_PREDICT_HPP
#define SPVB_PREDICT_HPP

// Posterior predictive distribution of a new count when log(rate) is normal
// under the variational posterior, plus Gaussian HPD intervals.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "spvb/core_model.hpp"
#include "spvb/sparsify.hpp"
#include "spvb/special_math.hpp"

namespace spvb {

/// Below this variance the log-normal mixing density is treated as a point mass.
inline constexpr double kDegenerateVariance = 1e-12;

/// p(y0) = int Poisson(y0 | lambda) LN(lambda; m, s2) d lambda, integrated
/// over u = log lambda around the peak of the log-integrand.
template <typename Scalar>
Scalar ppmf_lognormal(Scalar m, Scalar s2, long y0) {
  if (y0 < 0) throw ContractError("ppmf: negative count");
  if (!std::isfinite(m) || !(s2 >= Scalar(0))) throw DomainError("ppmf: need finite m and s2 >= 0");
  const Scalar y = Scalar(y0);
  const Scalar log_fact = log_gamma(y + Scalar(1));
  if (s2 < Scalar(kDegenerateVariance)) return std::exp(y * m - std::exp(m) - log_fact);

  const Scalar s = std::sqrt(s2);
  auto h = [&](Scalar u) {
    const Scalar z = (u - m) / s;
    return -std::exp(u) + u * y - Scalar(0.5) * z * z;
  };
  // h is strictly concave; Newton from m with step halving finds the peak.
  Scalar u = m;
  for (int it = 0; it < 200; ++it) {
    const Scalar grad = -std::exp(u) + y - (u - m) / s2;
    const Scalar curv = -std::exp(u) - Scalar(1) / s2;
    Scalar step = -grad / curv;
    const Scalar h0 = h(u);
    while (h(u + step) < h0 && std::abs(step) > Scalar(1e-14)) step /= Scalar(2);
    u += step;
    if (std::abs(step) < Scalar(1e-12) * (Scalar(1) + std::abs(u))) break;
  }
  const Scalar peak = h(u);
  // Log-concavity with curvature at most -1/s2 bounds the mass outside 12 s.
  // For large counts the peak is much narrower than s, so the range is split
  // at the peak and at ten local widths either side; otherwise the first
  // Kronrod panel can step over the peak entirely.
  const Scalar width = Scalar(12) * s;
  const Scalar local = std::min(width, Scalar(10) / std::sqrt(std::exp(u) + Scalar(1) / s2));
  const auto f = [&](Scalar v) { return std::exp(h(v) - peak); };
  const Scalar tol = Scalar(1e-8);
  Scalar integral = integrate_1d(f, u - local, u, tol) + integrate_1d(f, u, u + local, tol);
  if (local < width) integral += integrate_1d(f, u - width, u - local, tol) + integrate_1d(f, u + local, u + width, tol);
  const Scalar log_norm = -log_fact - Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * s2);
  return std::exp(peak + log_norm) * integral;
}

/// Mean and variance of x0^T (mask .* beta) under q(beta).
template <typename Scalar>
std::pair<Scalar, Scalar> linear_predictor_moments(const Vector<Scalar>& x0, const GaussianPosterior<Scalar>& post,
                                                   const Vector<Scalar>& mask) {
  if (x0.size() != post.size() || mask.size() != post.size()) {
    throw ContractError("linear_predictor_moments: length mismatch");
  }
  const Vector<Scalar> xm = x0.cwiseProduct(mask);
  const Scalar var = xm.dot(post.covariance * xm);
  return {xm.dot(post.mean), std::max(var, Scalar(0))};
}

template <typename Scalar>
Scalar ppmf_gaussian(const Vector<Scalar>& x0, const GaussianPosterior<Scalar>& post, long y0) {
  const auto [m, s2] = linear_predictor_moments(x0, post, Vector<Scalar>::Ones(post.size()));
  return ppmf_lognormal(m, s2, y0);
}

template <typename Scalar>
Scalar ppmf_bernoulli(const Vector<Scalar>& x0, const GaussianPosterior<Scalar>& post, const Vector<Scalar>& p_binary,
                      long y0) {
  for (Index j = 0; j < p_binary.size(); ++j) {
    if (p_binary(j) != Scalar(0) && p_binary(j) != Scalar(1)) {
      throw ContractError("ppmf_bernoulli: inclusion indicators must be 0 or 1");
    }
  }
  if (p_binary.size() == 0 || p_binary(0) != Scalar(1)) throw ContractError("ppmf_bernoulli: intercept must be kept");
  const auto [m, s2] = linear_predictor_moments(x0, post, p_binary);
  return ppmf_lognormal(m, s2, y0);
}

/// P(Y > k) = int P(k + 1, lambda) LN(lambda; m, s2) d lambda.
template <typename Scalar>
Scalar lognormal_poisson_tail(Scalar m, Scalar s2, long k) {
  const Scalar a = Scalar(k + 1);
  if (s2 < Scalar(kDegenerateVariance)) return gamma_p(a, std::exp(m));
  const Scalar s = std::sqrt(s2);
  const Scalar norm = Scalar(1) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  QuadratureOptions opt;
  opt.abs_tol = 1e-14;
  return integrate_1d(
      [&](Scalar z) {
        const Scalar lambda = std::exp(m + s * z);
        if (!std::isfinite(lambda)) return norm * std::exp(Scalar(-0.5) * z * z);
        return gamma_p(a, lambda) * norm * std::exp(Scalar(-0.5) * z * z);
      },
      Scalar(-12), Scalar(12), Scalar(1e-8), opt);
}

enum class IntervalKind {
  HighestMass,  // greedy by descending probability; may have gaps
  Contiguous    // shortest run of consecutive counts
};

struct PredictOptions {
  double level = 0.95;
  double mass_target = 1.0 - 1e-6;
  long support_cap = 1000000;
  IntervalKind interval = IntervalKind::HighestMass;
  bool restrict_to_support = true;  // Laplace/CS: drop coordinates thresholded to zero
};

template <typename Scalar = double>
struct PredictiveDistribution {
  long support_max = 0;
  std::vector<Scalar> pmf;
  long mode = 0;
  Scalar mean = 0;  // exp(m + s2 / 2)
  std::vector<long> hpd_set;
  Scalar tail_mass = 0;
  Scalar m = 0, s2 = 0;
};

namespace detail {

template <typename Scalar>
std::vector<long> highest_mass_set(const std::vector<Scalar>& pmf, Scalar level) {
  std::vector<long> order(pmf.size());
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return pmf[a] > pmf[b]; });
  std::vector<long> out;
  Scalar mass = 0;
  for (long k : order) {
    if (mass >= level) break;
    out.push_back(k);
    mass += pmf[k];
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <typename Scalar>
std::vector<long> shortest_run(const std::vector<Scalar>& pmf, Scalar level) {
  const long n = static_cast<long>(pmf.size());
  long best_lo = 0, best_hi = n - 1;
  Scalar best_mass = -1;
  Scalar mass = 0;
  long hi = -1;
  for (long lo = 0; lo < n; ++lo) {
    while (mass < level && hi + 1 < n) mass += pmf[++hi];
    if (mass < level) break;
    const bool shorter = hi - lo < best_hi - best_lo;
    if (best_mass < 0 || shorter || (hi - lo == best_hi - best_lo && mass > best_mass)) {
      best_lo = lo;
      best_hi = hi;
      best_mass = mass;
    }
    mass -= pmf[lo];
  }
  std::vector<long> out;
  for (long k = best_lo; k <= best_hi; ++k) out.push_back(k);
  return out;
}

}  // namespace detail

/// Enumerates p(y0) for y0 = 0, 1, ... until the accumulated mass reaches the
/// target, then summarizes it.
template <typename Scalar>
PredictiveDistribution<Scalar> predictive_from_moments(Scalar m, Scalar s2, const PredictOptions& opt = {}) {
  PredictiveDistribution<Scalar> out;
  out.m = m;
  out.s2 = s2;
  Scalar mass = 0;
  long k = 0;
  for (;; ++k) {
    if (k >= opt.support_cap) throw TruncationError("predictive support cap reached", mass);
    const Scalar pk = ppmf_lognormal(m, s2, k);
    out.pmf.push_back(pk);
    mass += pk;
    if (mass >= Scalar(opt.mass_target)) break;
  }
  out.support_max = k;
  out.tail_mass = lognormal_poisson_tail(m, s2, k);
  out.mode = static_cast<long>(std::max_element(out.pmf.begin(), out.pmf.end()) - out.pmf.begin());
  out.mean = std::exp(m + s2 / Scalar(2));
  const Scalar level = Scalar(opt.level);
  out.hpd_set = opt.interval == IntervalKind::HighestMass ? detail::highest_mass_set(out.pmf, level)
                                                          : detail::shortest_run(out.pmf, level);
  return out;
}

/// Mask applied to beta for prediction: the binarized inclusions for
/// Bernoulli fits, the selected support (or everything) for the others.
template <typename Scalar>
Vector<Scalar> prediction_mask(const FitResult<Scalar>& fit, const SparseCoefficients<Scalar>& sparse,
                               bool restrict_to_support) {
  const Index p = fit.posterior.size();
  if (fit.method == Method::Bernoulli) return sparse.p_binary;
  Vector<Scalar> mask = Vector<Scalar>::Ones(p);
  if (restrict_to_support) {
    mask.setZero();
    for (Index j : sparse.support) mask(j) = Scalar(1);
  }
  return mask;
}

template <typename Scalar>
PredictiveDistribution<Scalar> predictive_distribution(const Vector<Scalar>& x0, const FitResult<Scalar>& fit,
                                                       const SparseCoefficients<Scalar>& sparse,
                                                       const PredictOptions& opt = {}) {
  const auto [m, s2] =
      linear_predictor_moments(x0, fit.posterior, prediction_mask(fit, sparse, opt.restrict_to_support));
  return predictive_from_moments(m, s2, opt);
}

template <typename Scalar = double>
struct Interval {
  Scalar lower = 0, upper = 0;
};

/// mean_j +/- z_{(1 + level) / 2} sqrt(Sigma_jj).
template <typename Scalar>
std::vector<Interval<Scalar>> hpd_coefficients(const GaussianPosterior<Scalar>& post, Scalar level) {
  if (!(level > Scalar(0) && level < Scalar(1))) throw ContractError("hpd_coefficients: level must lie in (0, 1)");
  const Scalar z = normal_quantile((Scalar(1) + level) / Scalar(2));
  std::vector<Interval<Scalar>> out(static_cast<std::size_t>(post.size()));
  for (Index j = 0; j < post.size(); ++j) {
    const Scalar half = z * std::sqrt(std::max(post.covariance(j, j), Scalar(0)));
    out[static_cast<std::size_t>(j)] = {post.mean(j) - half, post.mean(j) + half};
  }
  return out;
}

}  // namespace spvb

#endif  // SPVB_PREDICT_HPP
