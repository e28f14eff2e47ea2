#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spvb/predict.hpp"
#include "test_support.hpp"

using namespace spvb;

namespace {

// Gauss-Hermite rule for weight e^{-x^2} by Golub-Welsch.
void hermite_rule(int n, Vector<double>& nodes, Vector<double>& weights) {
  Matrix<double> j = Matrix<double>::Zero(n, n);
  for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(j);
  nodes = es.eigenvalues();
  weights = std::sqrt(M_PI) * es.eigenvectors().row(0).transpose().array().square();
}

double pmf_by_hermite(double m, double s2, long y) {
  Vector<double> x, w;
  hermite_rule(120, x, w);
  double total = 0;
  for (Index k = 0; k < x.size(); ++k) {
    const double lambda = std::exp(m + std::sqrt(2 * s2) * x(k));
    total += w(k) * std::exp(y * std::log(lambda) - lambda - std::lgamma(y + 1.0));
  }
  return total / std::sqrt(M_PI);
}

}  // namespace

TEST_CASE("log-normal Poisson pmf against high-precision references") {
  struct Row {
    double m, s2;
    long y;
    double ref;
  };
  // mpmath at 30 digits.
  const Row rows[] = {
      {0.0, 1.0, 0, 0.3817564647554833369},   {0.0, 1.0, 3, 0.080738883359704458554},
      {1.5, 0.2, 4, 0.14130850438862141857},  {-2.0, 0.5, 0, 0.84781501267699639308},
      {3.0, 0.05, 25, 0.041900591538924902806}, {0.3, 2.0, 10, 0.011114101803241984745},
  };
  for (const auto& r : rows) {
    CAPTURE(r.m);
    CAPTURE(r.y);
    CHECK(ppmf_lognormal(r.m, r.s2, r.y) == doctest::Approx(r.ref).epsilon(1e-8));
  }
}

TEST_CASE("log-normal Poisson pmf against Gauss-Hermite quadrature") {
  for (double m : {-1.0, 0.5, 2.0}) {
    for (double s2 : {0.01, 0.3, 0.8}) {
      for (long y : {0L, 1L, 5L, 12L}) {
        CAPTURE(m);
        CAPTURE(s2);
        CAPTURE(y);
        CHECK(ppmf_lognormal(m, s2, y) == doctest::Approx(pmf_by_hermite(m, s2, y)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("log-normal Poisson pmf at large counts with a wide log-normal") {
  // The integrand peak is about 1/sqrt(y) wide against a prior spread of
  // s; a dense trapezoid rule in log-space is the oracle.
  const double m = 2.5, s2 = 2.0;
  for (long y : {3000L, 15000L, 60000L}) {
    CAPTURE(y);
    const double lo = -30, hi = 15, step = 2e-5;
    const long points = long((hi - lo) / step);
    std::vector<double> logs(std::size_t(points + 1));
    for (long k = 0; k <= points; ++k) {
      const double u = lo + step * double(k);
      logs[std::size_t(k)] = double(y) * u - std::exp(u) - 0.5 * (u - m) * (u - m) / s2;
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double sum = 0;
    for (long k = 0; k <= points; ++k) sum += (k == 0 || k == points ? 0.5 : 1.0) * std::exp(logs[std::size_t(k)] - top);
    const double ref = std::exp(top - std::lgamma(double(y) + 1) - 0.5 * std::log(2 * std::numbers::pi * s2)) * sum * step;
    CHECK(ppmf_lognormal(m, s2, y) == doctest::Approx(ref).epsilon(1e-7));
  }
  const auto pd = predictive_from_moments(m, s2);
  CHECK(std::accumulate(pd.pmf.begin(), pd.pmf.end(), 0.0) + pd.tail_mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("degenerate variance reduces to the Poisson pmf") {
  for (long y : {0L, 2L, 9L}) {
    const double lambda = std::exp(1.2);
    const double pois = std::exp(y * 1.2 - lambda - std::lgamma(y + 1.0));
    CHECK(std::abs(ppmf_lognormal(1.2, 0.0, y) - pois) < 1e-15);
  }
  CHECK_THROWS_AS(ppmf_lognormal(0.0, 1.0, -1), ContractError);
  CHECK_THROWS_AS(ppmf_lognormal(0.0, -1.0, 1), DomainError);
}

TEST_CASE("tail probability against a high-precision reference") {
  CHECK(lognormal_poisson_tail(0.0, 1.0, 5) == doctest::Approx(0.05890376618120125674).epsilon(1e-8));
  CHECK(lognormal_poisson_tail(1.5, 0.2, 8) == doctest::Approx(0.12807345079305679464).epsilon(1e-8));
}

TEST_CASE("predictive distribution mass balance and summaries") {
  for (double m : {-1.0, 0.7, 2.5}) {
    for (double s2 : {0.0, 0.1, 0.6}) {
      const auto pd = predictive_from_moments(m, s2);
      const double mass = std::accumulate(pd.pmf.begin(), pd.pmf.end(), 0.0);
      CHECK(mass + pd.tail_mass == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(mass >= 1 - 1e-6);
      CHECK(pd.mean == doctest::Approx(std::exp(m + s2 / 2)));
      CHECK(pd.pmf[std::size_t(pd.mode)] == *std::max_element(pd.pmf.begin(), pd.pmf.end()));
      double in_set = 0;
      for (long k : pd.hpd_set) in_set += pd.pmf[std::size_t(k)];
      CHECK(in_set >= 0.95);
      CHECK(std::is_sorted(pd.hpd_set.begin(), pd.hpd_set.end()));
    }
  }
}

TEST_CASE("highest-mass and contiguous prediction sets") {
  const std::vector<double> pmf{0.30, 0.05, 0.35, 0.20, 0.10};
  CHECK(detail::highest_mass_set(pmf, 0.8) == std::vector<long>{0, 2, 3});
  CHECK(detail::shortest_run(pmf, 0.8) == std::vector<long>{0, 1, 2, 3});
  CHECK(detail::shortest_run(pmf, 0.5) == std::vector<long>{2, 3});
  PredictOptions opt;
  opt.interval = IntervalKind::Contiguous;
  const auto pd = predictive_from_moments(1.0, 0.3, opt);
  for (std::size_t k = 1; k < pd.hpd_set.size(); ++k) CHECK(pd.hpd_set[k] == pd.hpd_set[k - 1] + 1);
}

TEST_CASE("support cap raises a truncation error") {
  PredictOptions opt;
  opt.support_cap = 5;
  CHECK_THROWS_AS(predictive_from_moments(4.0, 0.1, opt), TruncationError);
}

TEST_CASE("linear predictor moments and masks") {
  GaussianPosterior<double> post;
  post.mean = test::vec({0.5, 1.0, -2.0});
  post.covariance = Matrix<double>::Identity(3, 3) * 0.1;
  post.covariance(0, 1) = post.covariance(1, 0) = 0.02;
  const Vector<double> x = test::vec({1.0, 0.5, 2.0});
  const auto [m, s2] = linear_predictor_moments(x, post, test::vec({1, 1, 0}));
  CHECK(m == doctest::Approx(1.0));
  CHECK(s2 == doctest::Approx(0.1 + 0.25 * 0.1 + 2 * 0.5 * 0.02));
  CHECK(ppmf_bernoulli(x, post, test::vec({1, 1, 0}), 2) == doctest::Approx(ppmf_lognormal(m, s2, 2)));
  CHECK_THROWS_AS(ppmf_bernoulli(x, post, test::vec({1, 0.5, 0}), 2), ContractError);
  CHECK_THROWS_AS(ppmf_bernoulli(x, post, test::vec({0, 1, 0}), 2), ContractError);

  FitResult<double> fit;
  fit.method = Method::Laplace;
  fit.posterior = post;
  SparseCoefficients<double> sp;
  sp.support = {0, 2};
  sp.p_binary = test::vec({1, 0, 1});
  CHECK(prediction_mask(fit, sp, true) == test::vec({1, 0, 1}));
  CHECK(prediction_mask(fit, sp, false) == test::vec({1, 1, 1}));
  fit.method = Method::Bernoulli;
  sp.p_binary = test::vec({1, 1, 0});
  CHECK(prediction_mask(fit, sp, true) == test::vec({1, 1, 0}));
}

TEST_CASE("coefficient intervals") {
  GaussianPosterior<double> post;
  post.mean = test::vec({0.0, 2.0});
  post.covariance = Matrix<double>::Identity(2, 2) * 4.0;
  const auto iv = hpd_coefficients(post, 0.95);
  CHECK(iv[1].lower == doctest::Approx(2.0 - 1.959963984540054 * 2.0).epsilon(1e-12));
  CHECK(iv[1].upper == doctest::Approx(2.0 + 1.959963984540054 * 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(hpd_coefficients(post, 1.0), ContractError);
}
