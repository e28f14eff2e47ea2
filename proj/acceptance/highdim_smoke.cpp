// High-dimensional smoke run: n = 30, p = 200, five replications. Every fit
// must either converge or be flagged (not converged, or failed with a
// message), and whatever was produced must be finite.

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>

#include "spvb/eval_harness.hpp"

using namespace spvb;

namespace {

bool finite(const Vector<double>& v) { return v.size() == 0 || v.allFinite(); }

// A relative error is undefined (NaN) when the responses do not vary, which
// happens with six test rows; anything else must be finite.
bool metric_ok(double value, const Vector<double>& y) {
  const bool constant = y.size() == 0 || y.maxCoeff() == y.minCoeff();
  return std::isfinite(value) || (constant && std::isnan(value));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  ScenarioConfig config = ScenarioConfig::high_dim();
  config.replications = 5;
  const StudyResult study = run_study(config, Hyperparameters<double>{}, StudyOptions{});

  int bad = 0;
  for (const auto& r : study.records) {
    std::string state;
    bool clean = true;
    if (!r.ok) {
      state = "failed: " + r.failure;
      clean = !r.failure.empty();
    } else {
      state = r.converged ? "converged" : "flagged not converged";
      clean = metric_ok(r.tsre, r.test_y) && metric_ok(r.trre, r.train_y) && std::isfinite(r.cre) &&
              finite(r.beta_hat) && finite(r.test_pred) && finite(r.train_pred);
      if (std::isnan(r.tsre)) state += ", test responses constant so tsre undefined";
      if (!clean) state += ", non-finite output";
    }
    if (!clean) ++bad;
    std::cout << (clean ? "ok  " : "BAD ") << "replication " << r.replication << " " << std::setw(9)
              << to_string(r.method) << " iterations " << std::setw(4) << r.iterations << " " << state;
    if (r.ok) std::cout << " tsre " << std::setprecision(4) << r.tsre << " df " << r.df;
    std::cout << std::endl;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < 600;
  std::cout << study.records.size() << " fits, " << bad << " not clean, " << std::setprecision(3) << secs << " s"
            << (in_time ? "" : " (over the 600 s budget)") << std::endl;
  return bad == 0 && in_time ? 0 : 1;
}
