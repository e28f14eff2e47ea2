#ifndef SPVB_CLI_IO_HPP
#define SPVB_CLI_IO_HPP

// CSV ingestion, key=value configuration, result bundles and the command
// line front end.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "spvb/core_model.hpp"
#include "spvb/eval_harness.hpp"
#include "spvb/predict.hpp"
#include "spvb/sparsify.hpp"

namespace spvb {

inline constexpr const char* kVersion = "0.1.0";

struct CsvTable {
  std::vector<std::string> header;
  Matrix<double> values;  // rows x columns, all numeric
};

/// Reads an RFC-4180 style table with a header row. Rows and columns in
/// ParseError are 1-based; the header is row 1.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Splits the table into a design (intercept prepended when requested) and
/// the named response. `names` receives the design column labels.
Dataset<double> dataset_from_table(const CsvTable& table, const std::string& response, bool add_intercept,
                                   std::vector<std::string>* names = nullptr);

Dataset<double> load_csv(const std::string& path, const std::string& response, bool add_intercept = true,
                         std::vector<std::string>* names = nullptr);

/// Design matrix only, for prediction. Columns are looked up by name; the
/// response column, if present, is returned through `response`.
Matrix<double> design_from_table(const CsvTable& table, const std::vector<std::string>& names,
                                 const std::string& response_name, Vector<double>* response);

/// Flat key=value pairs; '#' starts a comment. Duplicate keys are an error.
std::map<std::string, std::string> read_config(std::istream& in);
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Applies the hyperparameter keys (nu, delta, A, rho1, rho2, p0, c, a_gamma,
/// b_gamma, epsilon, max_iter) and erases them from `kv`.
Hyperparameters<double> apply_hyper_config(std::map<std::string, std::string>& kv,
                                           Hyperparameters<double> hp = {});

/// Applies scenario keys (n, p, mu0, sigma0, mu_x, sigma2_x, rho, z_mask,
/// random_k, train_fraction) and erases them from `kv`.
ScenarioConfig apply_scenario_config(std::map<std::string, std::string>& kv, ScenarioConfig base);

/// Centering and scaling of the non-intercept design columns.
struct Standardization {
  Vector<double> center, scale;  // entry 0 is (0, 1)

  static Standardization identity(Index p);
  Matrix<double> apply(const Matrix<double>& design) const;
  /// beta_orig = T beta_std for the linear predictor to agree on both scales.
  Matrix<double> to_original() const;
};

Standardization fit_standardization(const Matrix<double>& design);

/// Everything `fit` writes and `predict` reads back.
struct ResultBundle {
  FitResult<double> fit;  // on the standardized scale
  SparseCoefficients<double> sparse;
  Standardization standardization;
  std::vector<std::string> columns;
  std::string response;
  Hyperparameters<double> hp;
  double level = 0.95;
  std::uint64_t seed = 0;
  bool record_timing = false;
  double wall_time_s = 0;
};

nlohmann::json to_json(const ResultBundle& b);
ResultBundle bundle_from_json(const nlohmann::json& j);

/// Entry point of the `spvb` executable. Exit codes: 0 success, 1 usage or
/// input error, 2 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace spvb

#endif  // SPVB_CLI_IO_HPP
