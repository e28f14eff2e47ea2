#ifndef SPVB_TEST_SUPPORT_HPP
#define SPVB_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "spvb/core_model.hpp"

namespace spvb::test {

// Intercept plus independent N(0, sd^2) covariates; counts drawn from the
// Poisson model at `beta`.
inline Dataset<double> poisson_data(const Vector<double>& beta, Index n, std::uint64_t seed, double sd = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  const Index p = beta.size();
  Dataset<double> d;
  d.design.resize(n, p);
  d.response.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.design(i, 0) = 1;
    for (Index j = 1; j < p; ++j) d.design(i, j) = z(rng);
    std::poisson_distribution<long> pois(std::exp(d.design.row(i).dot(beta)));
    d.response(i) = double(pois(rng));
  }
  return d;
}

inline Vector<double> vec(std::initializer_list<double> v) {
  Vector<double> out(Index(v.size()));
  Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

// Poisson maximum likelihood by Newton's method, the large-n limit of every
// posterior mean when the prior is weak.
inline Vector<double> poisson_mle(const Dataset<double>& d) {
  Vector<double> beta = Vector<double>::Zero(d.p());
  beta(0) = std::log(d.response.mean() + 1e-3);
  for (int it = 0; it < 100; ++it) {
    const Vector<double> rate = (d.design * beta).array().exp().matrix();
    const Vector<double> grad = d.design.transpose() * (d.response - rate);
    const Matrix<double> hess = d.design.transpose() * rate.asDiagonal() * d.design;
    const Vector<double> step = hess.ldlt().solve(grad);
    beta += step;
    if (step.norm() < 1e-12) break;
  }
  return beta;
}

// Largest ELBO gain from nudging one coordinate of the posterior mean by +/- h.
// A block optimum has no gain beyond rounding.
template <typename State, typename Elbo>
double best_mean_nudge(const State& s, Elbo&& elbo, double h = 1e-4) {
  const double base = elbo(s);
  double best = -INFINITY;
  for (Index j = 0; j < s.posterior.mean.size(); ++j) {
    for (double sign : {-1.0, 1.0}) {
      State t = s;
      t.posterior.mean(j) += sign * h;
      best = std::max(best, elbo(t) - base);
    }
  }
  return best;
}

// Same for scaling q(beta)'s covariance by (1 +/- h), which moves log|Sigma|.
template <typename State, typename Elbo>
double best_scale_nudge(const State& s, Elbo&& elbo, double h = 1e-4) {
  const double base = elbo(s);
  double best = -INFINITY;
  const double p = double(s.posterior.mean.size());
  for (double sign : {-1.0, 1.0}) {
    State t = s;
    t.posterior.covariance *= 1 + sign * h;
    t.posterior.log_det += p * std::log1p(sign * h);
    best = std::max(best, elbo(t) - base);
  }
  return best;
}

}  // namespace spvb::test

#endif  // SPVB_TEST_SUPPORT_HPP
