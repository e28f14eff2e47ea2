#ifndef SPVB_SPECIAL_MATH_HPP
#define SPVB_SPECIAL_MATH_HPP

// Scalar special functions and 1-D quadrature shared by the engines.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>
#include <tuple>
#include <vector>

#include "spvb/errors.hpp"

namespace spvb {

/// Digamma function psi(x) for x > 0.
///
/// Shifts the argument above 10 with psi(x) = psi(x + 1) - 1/x and then uses
/// the asymptotic expansion in 1/x^2. Absolute error is ~1e-15 for x >= 1e-6.
template <typename Scalar>
Scalar digamma(Scalar x) {
  if (!(x > Scalar(0)) || !std::isfinite(x)) {
    throw DomainError("digamma: argument must be positive and finite");
  }
  Scalar shift = 0;
  while (x < Scalar(10)) {
    shift -= Scalar(1) / x;
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar inv2 = inv * inv;
  // Bernoulli numbers B_{2k} / (2k).
  const Scalar series =
      inv2 * (Scalar(1) / 12 -
              inv2 * (Scalar(1) / 120 -
                      inv2 * (Scalar(1) / 252 -
                              inv2 * (Scalar(1) / 240 -
                                      inv2 * (Scalar(1) / 132 -
                                              inv2 * (Scalar(691) / 32760 - inv2 * Scalar(1) / 12))))));
  return shift + std::log(x) - Scalar(0.5) * inv - series;
}

template <typename Scalar>
Scalar log_gamma(Scalar x) {
  if (!(x > Scalar(0))) throw DomainError("log_gamma: argument must be positive");
  return std::lgamma(x);
}

/// Logistic sigmoid, evaluated on the side that cannot overflow.
template <typename Scalar>
Scalar sigmoid(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

/// K_{3/2}(x) / K_{1/2}(x) = 1 + 1/x.
template <typename Scalar>
Scalar bessel_k_half_ratio(Scalar x) {
  if (!(x > Scalar(0))) throw DomainError("bessel_k_half_ratio: argument must be positive");
  return Scalar(1) + Scalar(1) / x;
}

/// log K_{1/2}(x) = 0.5 log(pi / (2x)) - x.
template <typename Scalar>
Scalar log_bessel_k_half(Scalar x) {
  if (!(x > Scalar(0))) throw DomainError("log_bessel_k_half: argument must be positive");
  return Scalar(0.5) * std::log(std::numbers::pi_v<Scalar> / (Scalar(2) * x)) - x;
}

/// log K_t(x) for real order t and x > 0.
///
/// Uses e^x K_t(x) = int_0^inf exp(-x (cosh u - 1)) cosh(t u) du. The integrand
/// is even and entire in u, so the plain trapezoid rule converges
/// geometrically; the step shrinks like 1/sqrt(x) to resolve the peak at u = 0.
/// The node set depends only on x, which keeps finite differences in t smooth.
template <typename Scalar>
Scalar log_bessel_k(Scalar order, Scalar x) {
  if (!(x > Scalar(0)) || !std::isfinite(x)) {
    throw DomainError("log_bessel_k: argument must be positive and finite");
  }
  const Scalar t = std::abs(order);
  const Scalar h = std::min(Scalar(0.05), Scalar(0.25) / std::sqrt(x));
  // The log-integrand -x (cosh u - 1) + t u peaks where x sinh u = t.
  const Scalar u_peak = std::asinh(t / x);
  Scalar sum = Scalar(0.5);  // u = 0 contributes f(0) / 2 = 1 / 2.
  for (long k = 1; k < 10'000'000; ++k) {
    const Scalar u = h * Scalar(k);
    const Scalar term = std::exp(-x * (std::cosh(u) - Scalar(1))) * std::cosh(t * u);
    sum += term;
    if (u > u_peak && term < sum * std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3)) break;
  }
  return std::log(h * sum) - x;
}

/// Parameters of GIG(x; order, a, b) with density proportional to
/// x^(order-1) exp(-(a x + b / x) / 2).
template <typename Scalar>
struct GigParams {
  Scalar order = Scalar(0.5);
  Scalar a = Scalar(1);
  Scalar b = Scalar(1);
};

template <typename Scalar>
struct GigMoments {
  Scalar mean;
  Scalar inv_mean;
  Scalar log_mean;
};


/// e^x E1(x) for x > 0: the power series below 1, the continued fraction above.
template <typename Scalar>
Scalar scaled_exp_integral(Scalar x) {
  if (!(x > Scalar(0))) throw DomainError("scaled_exp_integral: x must be positive");
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  if (x <= Scalar(1)) {
    Scalar sum = 0, term = 1;
    for (int k = 1; k < 1000; ++k) {
      term *= -x / Scalar(k);
      sum += term / Scalar(k);
      if (std::abs(term) < eps * std::abs(sum)) break;
    }
    return std::exp(x) * (-std::numbers::egamma_v<Scalar> - std::log(x) - sum);
  }
  const Scalar tiny = std::numeric_limits<Scalar>::min() / eps;
  Scalar b = x + Scalar(1);
  Scalar c = Scalar(1) / tiny;
  Scalar d = Scalar(1) / b;
  Scalar h = d;
  for (int i = 1; i < 100000; ++i) {
    const Scalar an = -Scalar(i) * Scalar(i);
    b += Scalar(2);
    d = Scalar(1) / (an * d + b);
    c = b + an / c;
    const Scalar del = c * d;
    h *= del;
    if (std::abs(del - Scalar(1)) < eps) break;
  }
  return h;
}

/// E(x), E(1/x) and E(log x) under GIG(1/2, a, b).
template <typename Scalar>
GigMoments<Scalar> gig_moments(const GigParams<Scalar>& p) {
  if (!(p.a > Scalar(0)) || !(p.b > Scalar(0)) || !std::isfinite(p.a) || !std::isfinite(p.b)) {
    throw DomainError("gig_moments: a and b must be positive and finite");
  }
  if (std::abs(p.order - Scalar(0.5)) > Scalar(1e-12)) {
    throw DomainError("gig_moments: only order 1/2 is supported");
  }
  const Scalar omega = std::sqrt(p.a * p.b);
  const Scalar ratio = bessel_k_half_ratio(omega);
  GigMoments<Scalar> m;
  m.mean = std::sqrt(p.b / p.a) * ratio;
  // sqrt(a/b) (1 + 1/omega) - 1/b collapses to sqrt(a/b) exactly; the collapsed
  // form avoids cancellation when b is tiny.
  m.inv_mean = std::sqrt(p.a / p.b);
  // At order 1/2 the order derivative of log K(omega) is e^{2 omega} E1(2 omega).
  m.log_mean = Scalar(0.5) * std::log(p.b / p.a) + scaled_exp_integral(Scalar(2) * omega);
  return m;
}

/// Regularized lower incomplete gamma P(a, x).
template <typename Scalar>
Scalar gamma_p(Scalar a, Scalar x) {
  if (!(a > Scalar(0)) || x < Scalar(0)) throw DomainError("gamma_p: need a > 0 and x >= 0");
  if (x == Scalar(0)) return Scalar(0);
  const Scalar log_prefactor = a * std::log(x) - x - std::lgamma(a);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  if (x < a + Scalar(1)) {
    Scalar ap = a;
    Scalar del = Scalar(1) / a;
    Scalar sum = del;
    for (int n = 0; n < 100000; ++n) {
      ap += Scalar(1);
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * eps) break;
    }
    return std::min(Scalar(1), sum * std::exp(log_prefactor));
  }
  // Lentz continued fraction for Q(a, x).
  const Scalar tiny = std::numeric_limits<Scalar>::min() / eps;
  Scalar b = x + Scalar(1) - a;
  Scalar c = Scalar(1) / tiny;
  Scalar d = Scalar(1) / b;
  Scalar h = d;
  for (int i = 1; i < 100000; ++i) {
    const Scalar an = -Scalar(i) * (Scalar(i) - a);
    b += Scalar(2);
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = Scalar(1) / d;
    const Scalar delta = d * c;
    h *= delta;
    if (std::abs(delta - Scalar(1)) < eps) break;
  }
  return std::max(Scalar(0), Scalar(1) - std::exp(log_prefactor) * h);
}

/// Standard normal CDF.
template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

/// Standard normal quantile: rational approximation refined by one Halley step.
template <typename Scalar>
Scalar normal_quantile(Scalar prob) {
  if (!(prob > Scalar(0) && prob < Scalar(1))) {
    throw DomainError("normal_quantile: probability must lie in (0, 1)");
  }
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  const Scalar p_low = Scalar(0.02425);
  Scalar x;
  if (prob < p_low || prob > Scalar(1) - p_low) {
    const Scalar q = std::sqrt(-Scalar(2) * std::log(prob < p_low ? prob : Scalar(1) - prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + Scalar(1));
    if (prob > Scalar(1) - p_low) x = -x;
  } else {
    const Scalar q = prob - Scalar(0.5);
    const Scalar r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + Scalar(1));
  }
  const Scalar e = normal_cdf(x) - prob;
  const Scalar u = e * std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>) * std::exp(x * x / Scalar(2));
  return x - u / (Scalar(1) + x * u / Scalar(2));
}

// ---------------------------------------------------------------------------
// Adaptive quadrature

struct QuadratureOptions {
  int max_depth = 60;
  int max_intervals = 20000;
  double abs_tol = 0.0;
};

template <typename Scalar>
struct QuadratureResult {
  Scalar value = 0;
  Scalar error = 0;
  int evaluations = 0;
  int intervals = 0;
};

namespace detail {

// 15-point Gauss-Kronrod rule with the embedded 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar>
struct Segment {
  Scalar lo, hi, value, error;
  int depth;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename Scalar, typename G>
Segment<Scalar> kronrod(G& g, Scalar lo, Scalar hi, int depth) {
  const Scalar center = Scalar(0.5) * (lo + hi);
  const Scalar half = Scalar(0.5) * (hi - lo);
  const Scalar fc = g(center);
  Scalar kron = fc * Scalar(kKronrodWeights[7]);
  Scalar gauss = fc * Scalar(kGaussWeights[3]);
  for (int k = 0; k < 7; ++k) {
    const Scalar dx = half * Scalar(kKronrodNodes[k]);
    const Scalar pair = g(center - dx) + g(center + dx);
    kron += Scalar(kKronrodWeights[k]) * pair;
    if (k % 2 == 1) gauss += Scalar(kGaussWeights[k / 2]) * pair;
  }
  kron *= half;
  gauss *= half;
  if (!std::isfinite(kron)) throw NumericalError("integrate_1d: integrand is not finite");
  return {lo, hi, kron, std::abs(kron - gauss), depth};
}

template <typename Scalar, typename G>
QuadratureResult<Scalar> adaptive(G& g, Scalar lo, Scalar hi, Scalar tol, const QuadratureOptions& opt) {
  std::priority_queue<Segment<Scalar>> queue;
  std::vector<Segment<Scalar>> frozen;
  QuadratureResult<Scalar> out;
  queue.push(kronrod(g, lo, hi, 0));
  out.evaluations = 15;
  out.intervals = 1;
  auto totals = [&]() {
    Scalar v = 0, e = 0;
    auto copy = queue;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().error;
      copy.pop();
    }
    for (const auto& s : frozen) {
      v += s.value;
      e += s.error;
    }
    return std::pair{v, e};
  };
  Scalar value = queue.top().value;
  Scalar error = queue.top().error;
  while (true) {
    const Scalar target = std::max(tol * std::abs(value), Scalar(opt.abs_tol));
    if (error <= target) break;
    if (queue.empty() || out.intervals >= opt.max_intervals) {
      std::ostringstream msg;
      msg << "integrate_1d: no convergence (estimate " << value << ", error " << error << ")";
      throw IntegrationError(msg.str(), double(value), double(error));
    }
    Segment<Scalar> worst = queue.top();
    queue.pop();
    if (worst.depth >= opt.max_depth) {
      frozen.push_back(worst);
      continue;
    }
    const Scalar mid = Scalar(0.5) * (worst.lo + worst.hi);
    Segment<Scalar> left = kronrod(g, worst.lo, mid, worst.depth + 1);
    Segment<Scalar> right = kronrod(g, mid, worst.hi, worst.depth + 1);
    out.evaluations += 30;
    out.intervals += 1;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    if (out.intervals % 64 == 0) std::tie(value, error) = totals();
  }
  std::tie(value, error) = totals();
  out.value = value;
  out.error = error;
  return out;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [lower, upper].
///
/// Either bound may be infinite; semi-infinite ranges are mapped onto [0, 1)
/// with x = lower + t / (1 - t). Subdivision stops when the summed error
/// estimate is below max(tol * |I|, abs_tol). A segment is never split past
/// depth 60; if the tolerance cannot be met an IntegrationError carrying the
/// partial estimate is thrown.
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate_adaptive(F&& f, Scalar lower, Scalar upper, Scalar tol,
                                            const QuadratureOptions& opt = {}) {
  if (!(tol > Scalar(0))) throw DomainError("integrate_1d: tol must be positive");
  if (std::isnan(lower) || std::isnan(upper)) throw DomainError("integrate_1d: NaN bound");
  if (lower == upper) return {};
  if (lower > upper) {
    auto r = integrate_adaptive(f, upper, lower, tol, opt);
    r.value = -r.value;
    return r;
  }
  const bool lo_inf = std::isinf(lower);
  const bool hi_inf = std::isinf(upper);
  if (lo_inf && hi_inf) {
    auto g = [&](Scalar t) {
      const Scalar s = Scalar(1) - t * t;
      return f(t / s) * (Scalar(1) + t * t) / (s * s);
    };
    return detail::adaptive(g, Scalar(-1), Scalar(1), tol, opt);
  }
  if (hi_inf) {
    auto g = [&](Scalar t) {
      const Scalar s = Scalar(1) - t;
      return f(lower + t / s) / (s * s);
    };
    return detail::adaptive(g, Scalar(0), Scalar(1), tol, opt);
  }
  if (lo_inf) {
    auto g = [&](Scalar t) {
      const Scalar s = Scalar(1) - t;
      return f(upper - t / s) / (s * s);
    };
    return detail::adaptive(g, Scalar(0), Scalar(1), tol, opt);
  }
  auto g = [&](Scalar x) { return f(x); };
  return detail::adaptive(g, lower, upper, tol, opt);
}

template <typename Scalar, typename F>
Scalar integrate_1d(F&& f, Scalar lower, Scalar upper, Scalar tol, const QuadratureOptions& opt = {}) {
  return integrate_adaptive(std::forward<F>(f), lower, upper, tol, opt).value;
}

}  // namespace spvb

#endif  // SPVB_SPECIAL_MATH_HPP
