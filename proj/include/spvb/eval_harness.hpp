#ifndef SPVB_EVAL_HARNESS_HPP
#define SPVB_EVAL_HARNESS_HPP

// Simulation scenarios, evaluation metrics and the seeded replication runner.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spvb/core_model.hpp"
#include "spvb/predict.hpp"

namespace spvb {

struct ScenarioConfig {
  Index n = 100;
  Index p = 10;
  double mu0 = 0.7;
  double sigma0 = 0.5;  // standard deviation of the nonzero coefficients
  double mu_x = 0.1;
  double sigma2_x = 1.0;
  double rho = 0.3;  // covariate correlation decays as rho^|i-j|
  std::vector<int> z_mask{1, 0, 1, 0, 0, 0, 1, 0, 1, 0};
  Index random_k = 0;  // when positive, draw a fresh mask with k ones (entry 0 included)
  double train_fraction = 0.8;
  int replications = 100;
  std::uint64_t seed = 1;
  double max_log_rate = 20.0;
  int max_retries = 100;

  static ScenarioConfig low_dim();
  static ScenarioConfig high_dim();
  void check() const;
};

struct Replicate {
  Dataset<double> train, test;
  Vector<double> beta_true;
};

/// Engine for replication `rep` of a study seeded with `seed`.
std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t rep);

/// Draws a full dataset (coefficients, covariates, counts) and splits it.
Replicate generate(const ScenarioConfig& config, std::mt19937_64& rng);

/// Unsplit draw: design with intercept, counts, and the true coefficients.
Dataset<double> generate_full(const ScenarioConfig& config, std::mt19937_64& rng, Vector<double>& beta_true);

double metric_cre(const std::vector<Vector<double>>& beta_hats, const std::vector<Vector<double>>& beta_trues);
double metric_relative_error(const std::vector<Vector<double>>& preds, const std::vector<Vector<double>>& actuals);

struct SelectionRates {
  std::optional<double> fnr, fpr;  // nullopt when the denominator is empty
};
SelectionRates metric_selection(const Vector<double>& beta_hat, const Vector<double>& beta_true);

/// -loglik + 2 df + 2 df (df + 1) / (n - df - 1); +inf when n <= df + 1.
double aicc(double loglik, Index df, Index n);

enum class PointPredictor { Mode, Mean };

struct StudyOptions {
  std::vector<Method> methods{Method::Laplace, Method::CS, Method::Bernoulli};
  int threads = 1;
  // Prior inclusion probability behind rho2 = (1 - p0) / p0. The default
  // does not look at the truth. Negative means (nonzero mask entries) / p of
  // the generating configuration; zero keeps the rho2 already in the
  // hyperparameters.
  double p0 = 0.3;
  PointPredictor predictor = PointPredictor::Mode;
  bool restrict_to_support = true;
  double hpd_level = 0.95;
  AicForm aic_form = AicForm::Halved;
};

/// One method on one replication.
struct ReplicationRecord {
  int replication = 0;
  Method method = Method::Laplace;
  bool ok = false;  // false when the fit raised; the metrics below are then empty
  std::string failure;
  bool converged = false;
  int iterations = 0;
  double cre = 0, trre = 0, tsre = 0;
  std::optional<double> fnr, fpr;
  Index df = 0;
  double aicc = 0;
  std::vector<int> covered;  // per coefficient, truth inside the HPD interval
  double wall_time_s = 0;

  // Raw pieces needed for the pooled metrics.
  Vector<double> beta_hat, beta_true;
  Vector<double> train_pred, train_y, test_pred, test_y;
};

struct MetricsReport {
  Method method = Method::Laplace;
  double cre = 0, trre = 0, tsre = 0;  // pooled over replications
  double median_cre = 0, median_trre = 0, median_tsre = 0;
  std::optional<double> median_fnr, median_fpr, mean_fnr, mean_fpr;
  std::vector<double> coverage;  // per coefficient
  int failures = 0;
  int converged = 0;
  int fitted = 0;
  double wall_time_s = 0;
};

struct StudyResult {
  std::vector<MetricsReport> reports;     // one per method, in option order
  std::vector<ReplicationRecord> records;  // replication-major, then method order
};

/// Fits, sparsifies and predicts one replicate with one method.
ReplicationRecord evaluate_method(const Replicate& rep, Method method, const Hyperparameters<double>& hp,
                                  const StudyOptions& opt);

StudyResult run_study(const ScenarioConfig& config, const Hyperparameters<double>& hp, const StudyOptions& opt);

double median(std::vector<double> v);

}  // namespace spvb

#endif  // SPVB_EVAL_HARNESS_HPP
