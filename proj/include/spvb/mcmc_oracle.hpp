#ifndef SPVB_MCMC_ORACLE_HPP
#define SPVB_MCMC_ORACLE_HPP

// Metropolis-within-Gibbs sampler for the exact posterior of each model, and
// the accuracy score that compares a variational marginal with a chain.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spvb/core_model.hpp"

namespace spvb {

struct McmcConfig {
  int iterations = 10000;  // total, burn-in included
  int burn_in = 5000;
  int thin = 10;
  double step_scale = 1.0;  // multiplies the 2.38 / sqrt(p) random-walk scale
  std::uint64_t seed = 1;

  void check() const;
  int kept() const { return (iterations - burn_in + thin - 1) / thin; }
};

struct Chain {
  Matrix<double> draws;  // kept draws x parameters
  std::vector<std::string> param_names;
  double acceptance_rate = 0;  // of the beta move after burn-in
  double final_step = 0;       // adapted random-walk multiplier

  /// Column index of a named parameter; throws ContractError if absent.
  Index column(const std::string& name) const;
};

/// Parameter labels in column order: beta0.. then the model's hyperparameters.
std::vector<std::string> parameter_names(Method method, Index p);

/// Runs one chain. `proposal_cov` preconditions the joint beta move (usually
/// the variational covariance); without it the move is isotropic. `start` is
/// the initial beta.
Chain sample(Method method, const Dataset<double>& data, const Hyperparameters<double>& hp, const McmcConfig& cfg,
             const Matrix<double>* proposal_cov = nullptr, const Vector<double>* start = nullptr);

/// 1.06 sd m^(-1/5).
double kde_bandwidth(const Vector<double>& draws);

/// 100 (1 - 1/2 int |q - kde|). `q_lo` and `q_hi` bound the region where q
/// carries its mass. A chain with no spread is a point mass, which shares no
/// mass with a density, so the score is then 0.
double accuracy(const std::function<double(double)>& q, double q_lo, double q_hi, const Vector<double>& draws);

/// Accuracy of N(mean, sd^2) against the draws.
double accuracy_gaussian(double mean, double sd, const Vector<double>& draws);

/// 100 (1 - 1/2 (|q1 - f1| + |q0 - f0|)) with f the empirical frequencies.
double accuracy_discrete(double q1, const Vector<double>& binary_draws);

void write_chain_csv(const Chain& chain, std::ostream& out);

}  // namespace spvb

#endif  // SPVB_MCMC_ORACLE_HPP
