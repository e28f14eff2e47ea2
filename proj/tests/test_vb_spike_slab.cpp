#include <doctest.h>

#include <cmath>

#include "spvb/vb_spike_slab.hpp"
#include "test_support.hpp"

using namespace spvb;

namespace {

const Vector<double> kBeta = test::vec({0.5, 0.9, 0.0, -0.7, 0.0, 0.0});

}  // namespace

TEST_CASE("every spike-and-slab block update ascends with xi frozen") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (double start : {1.0, 0.5}) {
      const auto d = test::poisson_data(kBeta, 60, seed);
      Hyperparameters<double> hp;
      auto s = init_cs(d, hp, start);
      double prev = elbo_cs(s, d, hp);
      for (int it = 0; it < 30; ++it) {
        update_beta_cs(s, d, hp, XiUpdate::Freeze);
        const double a = elbo_cs(s, d, hp);
        update_tau2_cs(s, hp);
        const double b = elbo_cs(s, d, hp);
        update_z_cs(s, hp);
        const double c = elbo_cs(s, d, hp);
        const double tol = 1e-9 * std::abs(prev);
        CHECK(a >= prev - tol);
        CHECK(b >= a - tol);
        CHECK(c >= b - tol);
        prev = c;
      }
    }
  }
}

TEST_CASE("the spike-and-slab beta and inclusion updates are block optima") {
  const auto d = test::poisson_data(kBeta, 60, 4);
  Hyperparameters<double> hp;
  auto s = init_cs(d, hp, 0.5);
  for (int it = 0; it < 5; ++it) sweep_cs(s, d, hp);
  const auto elbo = [&](const CsState<double>& t) { return elbo_cs(t, d, hp); };
  update_beta_cs(s, d, hp, XiUpdate::Freeze);
  CHECK(test::best_mean_nudge(s, elbo) <= 1e-9);
  CHECK(test::best_scale_nudge(s, elbo) <= 1e-9);

  update_tau2_cs(s, hp);
  update_z_cs(s, hp);
  const double base = elbo(s);
  for (Index j = 1; j < s.p_incl.size(); ++j) {
    for (double h : {-1e-4, 1e-4}) {
      auto t = s;
      t.p_incl(j) = std::clamp(t.p_incl(j) + h, 1e-12, 1 - 1e-12);
      CHECK(elbo(t) <= base + 1e-9);
    }
  }
}

TEST_CASE("spike-and-slab separates signals from nulls") {
  // Large enough that a null's posterior sd is well below the spike's.
  const auto d = test::poisson_data(kBeta, 3000, 5, 1.0);
  Hyperparameters<double> hp;
  const auto fit = fit_cs(d, hp);
  CHECK(fit.converged);
  CHECK(fit.method == Method::CS);
  CHECK(fit.elbo_trace.back() > fit.initial_elbo);
  CHECK(fit.inclusion_prob(0) == 1.0);
  CHECK(fit.inclusion_prob(1) > 0.9);
  CHECK(fit.inclusion_prob(3) > 0.9);
  for (Index j : {2, 4, 5}) CHECK(fit.inclusion_prob(j) < 0.5);
  CHECK((fit.inclusion_prob.array() >= 0).all());
  CHECK((fit.inclusion_prob.array() <= 1).all());
  CHECK(std::abs(fit.posterior.mean(1) - 0.9) < 0.15);
}

TEST_CASE("fit_cs keeps the start with the higher final ELBO") {
  const auto d = test::poisson_data(kBeta, 60, 8);
  Hyperparameters<double> hp;
  const auto fit = fit_cs(d, hp);
  double best = -INFINITY;
  for (double start : {1.0, 0.5}) {
    auto s = init_cs(d, hp, start);
    double prev = elbo_cs(s, d, hp);
    for (int it = 0; it < hp.max_iter; ++it) {
      sweep_cs(s, d, hp);
      const double curr = elbo_cs(s, d, hp);
      const bool done = relative_change(prev, curr) < hp.epsilon;
      prev = curr;
      if (done) break;
    }
    best = std::max(best, prev);
  }
  CHECK(fit.elbo_trace.back() == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("spike-and-slab with an intercept only") {
  Dataset<double> d;
  d.design = Matrix<double>::Ones(1, 1);
  d.response = test::vec({0});
  const auto fit = fit_cs(d, Hyperparameters<double>{});
  CHECK(fit.status.empty());
  CHECK(fit.posterior.mean.allFinite());
  CHECK(cs_tau2_shape<double>(1) == 1.0);
  CHECK(std::isfinite(elbo_cs_reported(init_cs(d, Hyperparameters<double>{}), d, Hyperparameters<double>{})));
  CHECK_THROWS_AS(init_cs(d, Hyperparameters<double>{}, 0.0), ContractError);
}
