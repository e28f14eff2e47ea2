#include <doctest.h>

#include <cmath>

#include "spvb/sparsify.hpp"
#include "spvb/vb_laplace.hpp"
#include "test_support.hpp"

using namespace spvb;

namespace {

FitResult<double> fake_fit(Method m, const Vector<double>& mean, const Vector<double>& incl) {
  FitResult<double> f;
  f.method = m;
  f.posterior.mean = mean;
  f.posterior.covariance = 0.01 * Matrix<double>::Identity(mean.size(), mean.size());
  f.inclusion_prob = incl;
  return f;
}

double loglik_by_loop(const Vector<double>& beta, const Dataset<double>& d) {
  double total = 0;
  for (Index i = 0; i < d.n(); ++i) {
    const double eta = d.design.row(i).dot(beta);
    total += d.response(i) * eta - std::exp(eta) - std::lgamma(d.response(i) + 1);
  }
  return total;
}

}  // namespace

TEST_CASE("Poisson log-likelihood") {
  const auto d = test::poisson_data(test::vec({0.2, 0.5, -0.3}), 40, 3);
  const Vector<double> beta = test::vec({0.1, 0.4, -0.2});
  CHECK(poisson_loglik(beta, d) == doctest::Approx(loglik_by_loop(beta, d)).epsilon(1e-13));
  CHECK(poisson_loglik(test::vec({800, 0, 0}), d) == -INFINITY);
}

TEST_CASE("both information criterion forms") {
  CHECK(information_criterion(-10.0, 3) == doctest::Approx(16.0));
  CHECK(information_criterion(-10.0, 3, AicForm::Conventional) == doctest::Approx(26.0));
}

TEST_CASE("Bernoulli rule keeps slopes with inclusion strictly above one half") {
  const auto f = fake_fit(Method::Bernoulli, test::vec({0.3, 1.0, -2.0, 0.5, 0.7}), test::vec({1, 0.9, 0.5, 0.51, 0.1}));
  const auto s = threshold_bernoulli(f);
  CHECK(s.beta_hat(0) == 0.3);
  CHECK(s.beta_hat(1) == 1.0);
  CHECK(s.beta_hat(2) == 0.0);
  CHECK(s.beta_hat(3) == 0.5);
  CHECK(s.beta_hat(4) == 0.0);
  CHECK(s.support == std::vector<Index>{0, 1, 3});
  CHECK(s.df == 3);
  CHECK(s.p_binary == test::vec({1, 1, 0, 1, 0}));
  CHECK_THROWS_AS(threshold_bernoulli(fake_fit(Method::CS, f.posterior.mean, f.inclusion_prob)), ContractError);
}

TEST_CASE("threshold grid") {
  const Vector<double> mean = test::vec({5.0, 0.2, -1.5, 0.01});
  const auto grid = default_threshold_grid(mean);
  CHECK(grid.size() == 50);
  CHECK(grid(0) == doctest::Approx(1e-4));
  CHECK(grid(49) == 1.5);  // intercept is not a candidate
  for (Index k = 1; k < 50; ++k) CHECK(grid(k) / grid(k - 1) == doctest::Approx(std::pow(1.5e4, 1.0 / 49)));
  CHECK(hard_threshold(mean, 0.2) == test::vec({5.0, 0.0, -1.5, 0.0}));
}

TEST_CASE("hard threshold minimizes the criterion over the grid") {
  const auto d = test::poisson_data(test::vec({0.4, 0.8, 0.0, -0.6, 0.0, 0.05}), 80, 12);
  const auto fit = fit_laplace(d, Hyperparameters<double>{});
  for (AicForm form : {AicForm::Halved, AicForm::Conventional}) {
    const auto s = threshold_hard(fit, d, form);
    const auto grid = default_threshold_grid(fit.posterior.mean);
    // Brute force with the loop log-likelihood, ties to the larger threshold.
    double best = INFINITY, best_kappa = -1;
    for (Index k = 0; k < grid.size(); ++k) {
      Vector<double> b = fit.posterior.mean;
      Index df = 1;
      for (Index j = 1; j < b.size(); ++j) {
        if (std::abs(b(j)) <= grid(k)) {
          b(j) = 0;
        } else {
          ++df;
        }
      }
      const double scale = form == AicForm::Halved ? 1.0 : 2.0;
      const double aic = -scale * loglik_by_loop(b, d) + 2.0 * double(df);
      if (aic < best - 1e-9 || (std::abs(aic - best) <= 1e-9 && grid(k) > best_kappa)) {
        best = aic;
        best_kappa = grid(k);
      }
    }
    CHECK(s.kappa == best_kappa);
    CHECK(s.aic == doctest::Approx(best).epsilon(1e-12));
    CHECK(s.support.front() == 0);
    CHECK(s.df == Index(s.support.size()));
    CHECK((s.p_binary.array() == 1.0).all());
  }
}

TEST_CASE("a zero threshold is the identity") {
  const auto d = test::poisson_data(test::vec({0.4, 0.8, 0.0}), 30, 13);
  const auto f = fake_fit(Method::Laplace, test::vec({0.4, 0.7, 1e-9}), Vector<double>::Ones(3));
  const auto s = threshold_hard(f, d, test::vec({0.0}));
  CHECK(s.beta_hat == f.posterior.mean);
  CHECK(s.df == 3);
  CHECK_THROWS_AS(threshold_hard(f, d, Vector<double>()), ContractError);
  CHECK_THROWS_AS(threshold_hard(f, d, test::vec({-1.0})), ContractError);
}

TEST_CASE("sparsify dispatches on the method") {
  const auto d = test::poisson_data(test::vec({0.4, 0.8, 0.0}), 30, 14);
  const auto fb = fake_fit(Method::Bernoulli, test::vec({0.4, 0.7, 0.2}), test::vec({1, 0.8, 0.2}));
  const auto sb = sparsify(fb, d);
  CHECK(sb.support == std::vector<Index>{0, 1});
  CHECK(sb.aic == doctest::Approx(-loglik_by_loop(sb.beta_hat, d) + 4.0));
  const auto fl = fake_fit(Method::Laplace, fb.posterior.mean, Vector<double>::Ones(3));
  CHECK(sparsify(fl, d).kappa > 0);
}
