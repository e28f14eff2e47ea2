#include "spvb/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "spvb/mcmc_oracle.hpp"
#include "spvb/vb_bernoulli.hpp"
#include "spvb/vb_laplace.hpp"
#include "spvb/vb_spike_slab.hpp"

namespace spvb {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

// One logical record; quoted fields may span lines. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, long& line) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false, was_quoted = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (ch == '"' && trim(field).empty()) {
      quoted = true;
      was_quoted = true;
      field.clear();
    } else if (ch == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (ch == '\n') {
      ++line;
      fields.push_back(was_quoted ? field : trim(field));
      return true;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line, long(fields.size()) + 1);
  if (!any) return false;
  fields.push_back(was_quoted ? field : trim(field));
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return std::all_of(fields.begin(), fields.end(), [](const std::string& f) { return f.empty(); });
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> fields;
  long line = 0;
  // Skip a UTF-8 byte order mark.
  if (in.peek() == 0xEF) {
    char bom[3];
    in.read(bom, 3);
    if (!in || bom[1] != '\xBB' || bom[2] != '\xBF') throw ParseError("unexpected leading bytes", 1, 1);
  }
  if (!read_record(in, fields, line) || blank(fields)) throw ParseError("missing header row", 1, 0);
  table.header = fields;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < fields.size(); ++c) {
    if (fields[c].empty()) throw ParseError("empty column name", 1, long(c) + 1);
    if (!seen.insert(fields[c]).second) throw ParseError("duplicate column name '" + fields[c] + "'", 1, long(c) + 1);
  }
  std::vector<std::vector<double>> rows;
  long row = 1;
  while (read_record(in, fields, line)) {
    ++row;
    if (blank(fields)) continue;
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << "row " << row << " has " << fields.size() << " fields, header has " << table.header.size();
      throw ParseError(msg.str(), row, long(std::min(fields.size(), table.header.size())) + 1);
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], values[c])) {
        std::ostringstream msg;
        msg << "non-numeric cell '" << fields[c] << "' at row " << row << ", column " << c + 1 << " ("
            << table.header[c] << ")";
        throw ParseError(msg.str(), row, long(c) + 1);
      }
    }
    rows.push_back(std::move(values));
  }
  table.values.resize(Index(rows.size()), Index(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(Index(r), Index(c)) = rows[r][c];
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open " + path);
  return read_csv(in);
}

Dataset<double> dataset_from_table(const CsvTable& table, const std::string& response, bool add_intercept,
                                   std::vector<std::string>* names) {
  const auto it = std::find(table.header.begin(), table.header.end(), response);
  if (it == table.header.end()) throw ContractError("response column '" + response + "' not found");
  const Index rc = Index(it - table.header.begin());
  const Index cols = Index(table.header.size()) - 1 + (add_intercept ? 1 : 0);
  Dataset<double> d;
  d.design.resize(table.values.rows(), cols);
  d.response = table.values.col(rc);
  std::vector<std::string> labels;
  Index k = 0;
  if (add_intercept) {
    d.design.col(k++).setOnes();
    labels.emplace_back("(intercept)");
  }
  for (Index c = 0; c < Index(table.header.size()); ++c) {
    if (c == rc) continue;
    d.design.col(k++) = table.values.col(c);
    labels.push_back(table.header[std::size_t(c)]);
  }
  if (names) *names = std::move(labels);
  return d;
}

Dataset<double> load_csv(const std::string& path, const std::string& response, bool add_intercept,
                         std::vector<std::string>* names) {
  return dataset_from_table(read_csv_file(path), response, add_intercept, names);
}

Matrix<double> design_from_table(const CsvTable& table, const std::vector<std::string>& names,
                                 const std::string& response_name, Vector<double>* response) {
  Matrix<double> x(table.values.rows(), Index(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == "(intercept)") {
      x.col(Index(k)).setOnes();
      continue;
    }
    const auto it = std::find(table.header.begin(), table.header.end(), names[k]);
    if (it == table.header.end()) throw ContractError("covariate column '" + names[k] + "' not found");
    x.col(Index(k)) = table.values.col(Index(it - table.header.begin()));
  }
  if (response) {
    const auto it = std::find(table.header.begin(), table.header.end(), response_name);
    *response = it == table.header.end() ? Vector<double>() : Vector<double>(table.values.col(Index(it - table.header.begin())));
  }
  return x;
}

std::map<std::string, std::string> read_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(n) + " is not key=value", n, 0);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config line " + std::to_string(n) + " has an empty key", n, 0);
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ParseError("duplicate config key '" + key + "'", n, 0);
    }
  }
  return kv;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path);
  return read_config(in);
}

namespace {

double config_number(const std::string& key, const std::string& value) {
  double v;
  if (!parse_double(value, v)) throw ContractError("config key '" + key + "' needs a number, got '" + value + "'");
  return v;
}

std::vector<double> config_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(config_number(key, item));
  if (out.empty()) throw ContractError("config key '" + key + "' is empty");
  return out;
}

long config_integer(const std::string& key, const std::string& value) {
  const double v = config_number(key, value);
  if (v != std::floor(v)) throw ContractError("config key '" + key + "' needs an integer");
  return long(v);
}

template <typename F>
void take(std::map<std::string, std::string>& kv, const std::string& key, F&& f) {
  const auto it = kv.find(key);
  if (it == kv.end()) return;
  f(it->second);
  kv.erase(it);
}

}  // namespace

Hyperparameters<double> apply_hyper_config(std::map<std::string, std::string>& kv, Hyperparameters<double> hp) {
  for (const char* key : {"nu", "delta", "A", "rho1", "rho2", "c", "epsilon"}) {
    take(kv, key, [&](const std::string& v) {
      const double x = config_number(key, v);
      const std::string k = key;
      if (k == "nu") hp.nu = x;
      if (k == "delta") hp.delta = x;
      if (k == "A") hp.A = x;
      if (k == "rho1") hp.rho1 = x;
      if (k == "rho2") hp.rho2 = x;
      if (k == "c") hp.c = x;
      if (k == "epsilon") hp.epsilon = x;
    });
  }
  take(kv, "p0", [&](const std::string& v) {
    const double p0 = config_number("p0", v);
    if (!(p0 > 0 && p0 < 1)) throw ContractError("config key 'p0' must lie in (0, 1)");
    hp.rho2 = (1 - p0) / p0;
  });
  take(kv, "max_iter", [&](const std::string& v) { hp.max_iter = int(config_integer("max_iter", v)); });
  for (const char* key : {"a_gamma", "b_gamma"}) {
    take(kv, key, [&](const std::string& v) {
      const auto list = config_list(key, v);
      Vector<double> vec = Eigen::Map<const Vector<double>>(list.data(), Index(list.size()));
      (std::string(key) == "a_gamma" ? hp.a_gamma : hp.b_gamma) = vec;
    });
  }
  return hp;
}

ScenarioConfig apply_scenario_config(std::map<std::string, std::string>& kv, ScenarioConfig c) {
  take(kv, "n", [&](const std::string& v) { c.n = config_integer("n", v); });
  take(kv, "p", [&](const std::string& v) { c.p = config_integer("p", v); });
  take(kv, "mu0", [&](const std::string& v) { c.mu0 = config_number("mu0", v); });
  take(kv, "sigma0", [&](const std::string& v) { c.sigma0 = config_number("sigma0", v); });
  take(kv, "mu_x", [&](const std::string& v) { c.mu_x = config_number("mu_x", v); });
  take(kv, "sigma2_x", [&](const std::string& v) { c.sigma2_x = config_number("sigma2_x", v); });
  take(kv, "rho", [&](const std::string& v) { c.rho = config_number("rho", v); });
  take(kv, "train_fraction", [&](const std::string& v) { c.train_fraction = config_number("train_fraction", v); });
  take(kv, "random_k", [&](const std::string& v) { c.random_k = config_integer("random_k", v); });
  take(kv, "z_mask", [&](const std::string& v) {
    c.z_mask.clear();
    for (double x : config_list("z_mask", v)) c.z_mask.push_back(int(x));
    c.random_k = 0;
  });
  return c;
}

Standardization Standardization::identity(Index p) {
  return {Vector<double>::Zero(p), Vector<double>::Ones(p)};
}

Matrix<double> Standardization::apply(const Matrix<double>& design) const {
  if (design.cols() != center.size()) throw ContractError("standardization: column count mismatch");
  Matrix<double> out = design;
  for (Index j = 1; j < out.cols(); ++j) out.col(j) = (out.col(j).array() - center(j)) / scale(j);
  return out;
}

Matrix<double> Standardization::to_original() const {
  const Index p = center.size();
  Matrix<double> t = Matrix<double>::Identity(p, p);
  for (Index j = 1; j < p; ++j) {
    t(j, j) = 1.0 / scale(j);
    t(0, j) = -center(j) / scale(j);
  }
  return t;
}

Standardization fit_standardization(const Matrix<double>& design) {
  const Index p = design.cols();
  Standardization s = Standardization::identity(p);
  const double n = double(design.rows());
  for (Index j = 1; j < p; ++j) {
    const double m = design.col(j).mean();
    const double var = (design.col(j).array() - m).square().sum() / std::max(n - 1.0, 1.0);
    s.center(j) = m;
    s.scale(j) = var > 0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

namespace {

json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw ContractError("bundle: bad number '" + s + "'");
}

json vec(const Vector<double>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Vector<double> read_vec(const json& a) {
  Vector<double> v(Index(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(Index(i)) = read_number(a[i]);
  return v;
}

json mat(const Matrix<double>& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

Matrix<double> read_mat(const json& a) {
  const Index rows = Index(a.size());
  const Index cols = rows ? Index(a[0].size()) : 0;
  Matrix<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (Index(a[std::size_t(r)].size()) != cols) throw ContractError("bundle: ragged matrix");
    m.row(r) = read_vec(a[std::size_t(r)]).transpose();
  }
  return m;
}

json hyper_json(const Hyperparameters<double>& hp) {
  return {{"nu", number(hp.nu)},         {"delta", number(hp.delta)}, {"A", number(hp.A)},
          {"rho1", number(hp.rho1)},     {"rho2", number(hp.rho2)},   {"c", number(hp.c)},
          {"a_gamma", vec(hp.a_gamma)}, {"b_gamma", vec(hp.b_gamma)}, {"epsilon", number(hp.epsilon)},
          {"max_iter", hp.max_iter}};
}

Hyperparameters<double> hyper_from_json(const json& j) {
  Hyperparameters<double> hp;
  hp.nu = read_number(j.at("nu"));
  hp.delta = read_number(j.at("delta"));
  hp.A = read_number(j.at("A"));
  hp.rho1 = read_number(j.at("rho1"));
  hp.rho2 = read_number(j.at("rho2"));
  hp.c = read_number(j.at("c"));
  hp.a_gamma = read_vec(j.at("a_gamma"));
  hp.b_gamma = read_vec(j.at("b_gamma"));
  hp.epsilon = read_number(j.at("epsilon"));
  hp.max_iter = j.at("max_iter").get<int>();
  return hp;
}

}  // namespace

json to_json(const ResultBundle& b) {
  const FitResult<double>& f = b.fit;
  json meta = {{"method", std::string(to_string(f.method))},
               {"version", kVersion},
               {"seed", b.seed},
               {"response", b.response},
               {"columns", b.columns},
               {"level", number(b.level)},
               {"hyperparameters", hyper_json(b.hp)}};
  if (b.record_timing) meta["wall_time_s"] = number(b.wall_time_s);

  json hyper = json::object();
  for (const auto& [k, v] : f.hyper_expectations) hyper[k] = vec(v);
  std::vector<double> trace(f.elbo_trace.begin(), f.elbo_trace.end());
  json fit = {{"mean", vec(f.posterior.mean)},
              {"covariance", mat(f.posterior.covariance)},
              {"variance", vec(f.posterior.covariance.diagonal())},
              {"log_det", number(f.posterior.log_det)},
              {"inclusion_prob", vec(f.inclusion_prob)},
              {"elbo_trace", vec(Eigen::Map<const Vector<double>>(trace.data(), Index(trace.size())))},
              {"initial_elbo", number(f.initial_elbo)},
              {"iterations", f.iterations},
              {"converged", f.converged},
              {"status", f.status},
              {"hyper_expectations", hyper}};

  std::vector<long long> support(b.sparse.support.begin(), b.sparse.support.end());
  json sparse = {{"beta_hat", vec(b.sparse.beta_hat)}, {"support", support},
                 {"kappa", number(b.sparse.kappa)},    {"aic", number(b.sparse.aic)},
                 {"df", b.sparse.df},                  {"p_binary", vec(b.sparse.p_binary)}};

  // Same Gaussian q mapped through beta_orig = T beta_std.
  const Matrix<double> t = b.standardization.to_original();
  GaussianPosterior<double> orig;
  orig.mean = t * f.posterior.mean;
  orig.covariance = t * f.posterior.covariance * t.transpose();
  const auto hpd = hpd_coefficients(orig, b.level);
  json intervals = json::array();
  for (const auto& iv : hpd) intervals.push_back({number(iv.lower), number(iv.upper)});
  json original = {{"mean", vec(orig.mean)},
                   {"sd", vec(orig.covariance.diagonal().cwiseMax(0.0).cwiseSqrt())},
                   {"beta_hat", vec(t * b.sparse.beta_hat)},
                   {"hpd", intervals}};

  return {{"format", "spvb-result"},
          {"metadata", meta},
          {"standardization", {{"center", vec(b.standardization.center)}, {"scale", vec(b.standardization.scale)}}},
          {"fit", fit},
          {"sparse", sparse},
          {"original_scale", original}};
}

ResultBundle bundle_from_json(const json& j) {
  if (j.value("format", "") != "spvb-result") throw ContractError("not an spvb result bundle");
  ResultBundle b;
  const json& meta = j.at("metadata");
  b.seed = meta.at("seed").get<std::uint64_t>();
  b.response = meta.at("response").get<std::string>();
  b.columns = meta.at("columns").get<std::vector<std::string>>();
  b.level = read_number(meta.at("level"));
  b.hp = hyper_from_json(meta.at("hyperparameters"));
  b.record_timing = meta.contains("wall_time_s");
  if (b.record_timing) b.wall_time_s = read_number(meta.at("wall_time_s"));
  b.standardization.center = read_vec(j.at("standardization").at("center"));
  b.standardization.scale = read_vec(j.at("standardization").at("scale"));

  const json& f = j.at("fit");
  b.fit.method = parse_method(meta.at("method").get<std::string>());
  b.fit.posterior.mean = read_vec(f.at("mean"));
  b.fit.posterior.covariance = read_mat(f.at("covariance"));
  b.fit.posterior.log_det = read_number(f.at("log_det"));
  b.fit.inclusion_prob = read_vec(f.at("inclusion_prob"));
  const Vector<double> trace = read_vec(f.at("elbo_trace"));
  b.fit.elbo_trace.assign(trace.data(), trace.data() + trace.size());
  b.fit.initial_elbo = read_number(f.at("initial_elbo"));
  b.fit.iterations = f.at("iterations").get<int>();
  b.fit.converged = f.at("converged").get<bool>();
  b.fit.status = f.at("status").get<std::string>();
  for (const auto& [k, v] : f.at("hyper_expectations").items()) b.fit.hyper_expectations[k] = read_vec(v);

  const json& s = j.at("sparse");
  b.sparse.beta_hat = read_vec(s.at("beta_hat"));
  for (long long k : s.at("support").get<std::vector<long long>>()) b.sparse.support.push_back(Index(k));
  b.sparse.kappa = read_number(s.at("kappa"));
  b.sparse.aic = read_number(s.at("aic"));
  b.sparse.df = s.at("df").get<Index>();
  b.sparse.p_binary = read_vec(s.at("p_binary"));

  const Index p = b.fit.posterior.mean.size();
  if (b.fit.posterior.covariance.rows() != p || b.fit.posterior.covariance.cols() != p ||
      b.sparse.beta_hat.size() != p || b.standardization.center.size() != p || Index(b.columns.size()) != p) {
    throw ContractError("bundle: inconsistent dimensions");
  }
  return b;
}

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;

FitResult<double> fit_by_method(Method m, const Dataset<double>& d, const Hyperparameters<double>& hp) {
  switch (m) {
    case Method::Laplace: return fit_laplace(d, hp);
    case Method::CS: return fit_cs(d, hp);
    case Method::Bernoulli: return fit_bernoulli(d, hp);
  }
  throw ContractError("unknown method");
}

std::string fmt(double x) {
  if (std::isnan(x)) return "NA";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : "NA"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write " + path);
  out << text;
  if (!out) throw ContractError("write failed for " + path);
}

Hyperparameters<double> hyper_from_file(const std::string& path) {
  if (path.empty()) return {};
  auto kv = read_config_file(path);
  Hyperparameters<double> hp = apply_hyper_config(kv);
  if (!kv.empty()) throw ContractError("unknown config key '" + kv.begin()->first + "'");
  return hp;
}

// What each subcommand collects from the command line.
struct FitArgs {
  std::string method, data, response = "y", config, out, aic = "halved";
  std::uint64_t seed = 1;
  bool standardize = true, record_timing = false;
  double level = 0.95;
};

struct PredictArgs {
  std::string model, data, out, interval = "highest";
  double level = -1;
};

struct SimulateArgs {
  std::string scenario, config, out, summary, methods = "laplace,cs,bernoulli", predictor = "mode";
  int replications = 100, threads = 1;
  std::uint64_t seed = 1;
  bool record_timing = false;
};

struct SampleArgs {
  std::string method, data, response = "y", config, out;
  std::uint64_t seed = 1;
  int iterations = 10000, burn_in = 5000, thin = 10;
  bool standardize = true, precondition = true;
};

int do_fit(const FitArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const Method method = parse_method(a.method);
  std::vector<std::string> names;
  Dataset<double> raw = load_csv(a.data, a.response, true, &names);
  std::cerr << "read " << raw.n() << " rows, " << raw.p() - 1 << " covariates from " << a.data << "\n";
  require_valid(raw);
  ResultBundle b;
  b.hp = hyper_from_file(a.config);
  b.columns = names;
  b.response = a.response;
  b.seed = a.seed;
  b.level = a.level;
  b.record_timing = a.record_timing;
  b.standardization = a.standardize ? fit_standardization(raw.design) : Standardization::identity(raw.p());
  Dataset<double> d{b.standardization.apply(raw.design), raw.response};
  b.fit = fit_by_method(method, d, b.hp);
  const AicForm form = lower(a.aic) == "conventional" ? AicForm::Conventional : AicForm::Halved;
  b.sparse = sparsify(b.fit, d, form);
  b.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(a.out, to_json(b).dump(2) + "\n");
  std::cerr << to_string(method) << ": " << b.fit.iterations << " iterations, converged="
            << (b.fit.converged ? "true" : "false") << ", support size " << b.sparse.df << "\n";
  if (!b.fit.status.empty()) {
    std::cerr << "numerical failure: " << b.fit.status << "\n";
    return kNumerical;
  }
  return kOk;
}

int do_predict(const PredictArgs& a) {
  std::ifstream in(a.model);
  if (!in) throw ContractError("cannot open " + a.model);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError(std::string("model file is not valid JSON: ") + e.what());
  }
  const ResultBundle b = bundle_from_json(j);
  const CsvTable table = read_csv_file(a.data);
  Vector<double> y;
  const Matrix<double> x = b.standardization.apply(design_from_table(table, b.columns, b.response, &y));
  PredictOptions opt;
  opt.level = a.level > 0 ? a.level : b.level;
  if (!(opt.level > 0 && opt.level < 1)) throw ContractError("--level must lie in (0, 1)");
  opt.interval = lower(a.interval) == "contiguous" ? IntervalKind::Contiguous : IntervalKind::HighestMass;

  std::ostringstream out;
  out << "# spvb predict\n# version=" << kVersion << "\n# method=" << to_string(b.fit.method)
      << "\n# level=" << opt.level << "\n# interval=" << (opt.interval == IntervalKind::Contiguous ? "contiguous" : "highest")
      << "\n";
  out << "row,m,s2,mode,mean,hpd_lower,hpd_upper,hpd_size,hpd_mass,tail_mass";
  if (y.size()) out << ",y,in_hpd";
  out << "\n";
  for (Index i = 0; i < x.rows(); ++i) {
    const auto pd = predictive_distribution<double>(x.row(i).transpose(), b.fit, b.sparse, opt);
    double mass = 0;
    for (long k : pd.hpd_set) mass += pd.pmf[std::size_t(k)];
    out << i + 1 << "," << fmt(pd.m) << "," << fmt(pd.s2) << "," << pd.mode << "," << fmt(pd.mean) << ","
        << pd.hpd_set.front() << "," << pd.hpd_set.back() << "," << pd.hpd_set.size() << "," << fmt(mass) << ","
        << fmt(pd.tail_mass);
    if (y.size()) {
      const long yi = long(y(i));
      const bool in_set = std::binary_search(pd.hpd_set.begin(), pd.hpd_set.end(), yi);
      out << "," << fmt(y(i)) << "," << (in_set ? 1 : 0);
    }
    out << "\n";
  }
  write_text(a.out, out.str());
  return kOk;
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_method(trim(item)));
  if (out.empty()) throw ContractError("--methods is empty");
  return out;
}

int do_simulate(const SimulateArgs& a) {
  ScenarioConfig c;
  const std::string sc = lower(a.scenario);
  if (sc == "low") {
    c = ScenarioConfig::low_dim();
  } else if (sc == "high") {
    c = ScenarioConfig::high_dim();
  } else if (sc == "custom") {
    if (a.config.empty()) throw ContractError("--scenario custom needs --config");
    c = ScenarioConfig::low_dim();
  } else {
    throw ContractError("unknown scenario '" + a.scenario + "'");
  }
  Hyperparameters<double> hp;
  StudyOptions opt;
  if (!a.config.empty()) {
    auto kv = read_config_file(a.config);
    const bool has_rho2 = kv.count("rho2") || kv.count("p0");
    hp = apply_hyper_config(kv);
    c = apply_scenario_config(kv, c);
    // An explicit prior inclusion in the config wins over the study default.
    if (has_rho2) opt.p0 = 0;
    if (!kv.empty()) throw ContractError("unknown config key '" + kv.begin()->first + "'");
  }
  c.replications = a.replications;
  c.seed = a.seed;
  opt.methods = parse_methods(a.methods);
  opt.threads = a.threads;
  opt.predictor = lower(a.predictor) == "mean" ? PointPredictor::Mean : PointPredictor::Mode;
  const StudyResult res = run_study(c, hp, opt);

  std::ostringstream rec;
  rec << "# spvb simulate\n# version=" << kVersion << "\n# scenario=" << sc << "\n# n=" << c.n << "\n# p=" << c.p
      << "\n# replications=" << c.replications << "\n# seed=" << c.seed << "\n";
  rec << "replication,method,ok,converged,iterations,cre,trre,tsre,fnr,fpr,df,aicc";
  for (Index j = 0; j < c.p; ++j) rec << ",cov" << j;
  for (Index j = 0; j < c.p; ++j) rec << ",beta_hat" << j;
  if (a.record_timing) rec << ",wall_time_s";
  rec << ",failure\n";
  for (const auto& r : res.records) {
    rec << r.replication << "," << to_string(r.method) << "," << (r.ok ? 1 : 0) << "," << (r.converged ? 1 : 0) << ","
        << r.iterations << ",";
    if (r.ok) {
      rec << fmt(r.cre) << "," << fmt(r.trre) << "," << fmt(r.tsre) << "," << fmt(r.fnr) << "," << fmt(r.fpr) << ","
          << r.df << "," << fmt(r.aicc);
      for (int v : r.covered) rec << "," << v;
      for (Index j = 0; j < r.beta_hat.size(); ++j) rec << "," << fmt(r.beta_hat(j));
    } else {
      rec << "NA,NA,NA,NA,NA,NA,NA";
      for (Index j = 0; j < 2 * c.p; ++j) rec << ",NA";
    }
    if (a.record_timing) rec << "," << fmt(r.wall_time_s);
    std::string failure = r.failure;
    std::replace(failure.begin(), failure.end(), '"', '\'');
    rec << ",\"" << failure << "\"\n";
  }
  write_text(a.out, rec.str());

  std::ostringstream sum;
  sum << "# spvb simulate summary\n# version=" << kVersion << "\n# scenario=" << sc << "\n# replications="
      << c.replications << "\n# seed=" << c.seed << "\n";
  sum << "method,fitted,failures,converged,cre,trre,tsre,median_cre,median_trre,median_tsre,median_fnr,median_fpr,"
         "mean_fnr,mean_fpr";
  for (Index j = 0; j < c.p; ++j) sum << ",coverage" << j;
  if (a.record_timing) sum << ",wall_time_s";
  sum << "\n";
  for (const auto& m : res.reports) {
    sum << to_string(m.method) << "," << m.fitted << "," << m.failures << "," << m.converged << "," << fmt(m.cre) << ","
        << fmt(m.trre) << "," << fmt(m.tsre) << "," << fmt(m.median_cre) << "," << fmt(m.median_trre) << ","
        << fmt(m.median_tsre) << "," << fmt(m.median_fnr) << "," << fmt(m.median_fpr) << "," << fmt(m.mean_fnr)
        << "," << fmt(m.mean_fpr);
    for (double v : m.coverage) sum << "," << fmt(v);
    if (a.record_timing) sum << "," << fmt(m.wall_time_s);
    sum << "\n";
  }
  const std::string summary_path = a.summary.empty() ? a.out + ".summary.csv" : a.summary;
  write_text(summary_path, sum.str());
  for (const auto& m : res.reports) {
    std::cerr << to_string(m.method) << ": median TSRE " << fmt(m.median_tsre) << ", median FNR " << fmt(m.median_fnr)
              << ", failures " << m.failures << "\n";
  }
  return kOk;
}

int do_sample(const SampleArgs& a) {
  const Method method = parse_method(a.method);
  std::vector<std::string> names;
  Dataset<double> raw = load_csv(a.data, a.response, true, &names);
  require_valid(raw);
  const Hyperparameters<double> hp = hyper_from_file(a.config);
  const Standardization st = a.standardize ? fit_standardization(raw.design) : Standardization::identity(raw.p());
  Dataset<double> d{st.apply(raw.design), raw.response};
  McmcConfig cfg;
  cfg.iterations = a.iterations;
  cfg.burn_in = a.burn_in;
  cfg.thin = a.thin;
  cfg.seed = a.seed;
  Chain chain;
  if (a.precondition) {
    const FitResult<double> f = fit_by_method(method, d, hp);
    chain = sample(method, d, hp, cfg, &f.posterior.covariance, &f.posterior.mean);
  } else {
    chain = sample(method, d, hp, cfg);
  }
  std::ostringstream out;
  out << "# spvb sample\n# version=" << kVersion << "\n# method=" << to_string(method) << "\n# seed=" << a.seed
      << "\n# iterations=" << a.iterations << "\n# burn_in=" << a.burn_in << "\n# thin=" << a.thin
      << "\n# standardized=" << (a.standardize ? "true" : "false") << "\n# acceptance_rate=" << fmt(chain.acceptance_rate)
      << "\n# columns:";
  for (const auto& n : names) out << " " << n;
  out << "\n";
  write_chain_csv(chain, out);
  write_text(a.out, out.str());
  return kOk;
}

int do_validate(const std::string& data, const std::string& response) {
  const Dataset<double> d = load_csv(data, response, true);
  std::cout << "rows=" << d.n() << " covariates=" << d.p() - 1 << "\n";
  const auto diagnostics = validate(d);
  for (const auto& msg : diagnostics) std::cout << "diagnostic: " << msg << "\n";
  if (diagnostics.empty()) std::cout << "ok\n";
  return diagnostics.empty() ? kOk : kUsage;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Sparse Poisson regression by variational Bayes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit one model to a CSV file and write a JSON result bundle");
  fit->add_option("--method", fa.method, "laplace, cs or bernoulli")->required()->check(CLI::IsMember({"laplace", "cs", "bernoulli"}));
  fit->add_option("--data", fa.data, "Input CSV with a header row")->required();
  fit->add_option("--response", fa.response, "Name of the count column")->capture_default_str();
  fit->add_option("--config", fa.config, "key=value hyperparameter file");
  fit->add_option("--seed", fa.seed, "Recorded in the bundle; fits are deterministic")->capture_default_str();
  fit->add_option("--out", fa.out, "Output JSON path")->required();
  fit->add_option("--level", fa.level, "HPD level for reported intervals")->capture_default_str();
  fit->add_option("--aic", fa.aic, "halved (-log L + 2 df) or conventional")->capture_default_str();
  fit->add_flag("--standardize,!--no-standardize", fa.standardize, "Center and scale covariates (default on)");
  fit->add_flag("--record-timing", fa.record_timing, "Write wall-clock time into the bundle");

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Posterior predictive summaries for new rows");
  pred->add_option("--model", pa.model, "JSON bundle written by fit")->required();
  pred->add_option("--data", pa.data, "CSV with the covariate columns used in fit")->required();
  pred->add_option("--out", pa.out, "Output CSV path")->required();
  pred->add_option("--level", pa.level, "Predictive set level (default: the bundle's)");
  pred->add_option("--interval", pa.interval, "highest (greedy mass) or contiguous")->capture_default_str();

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run the seeded simulation study");
  sim->add_option("--scenario", sa.scenario, "low, high or custom")->required();
  sim->add_option("--config", sa.config, "key=value scenario and hyperparameter overrides");
  sim->add_option("--replications", sa.replications)->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed)->required();
  sim->add_option("--out", sa.out, "Per-replication CSV")->required();
  sim->add_option("--summary", sa.summary, "Summary CSV (default: <out>.summary.csv)");
  sim->add_option("--threads", sa.threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  sim->add_option("--methods", sa.methods, "Comma-separated methods")->capture_default_str();
  sim->add_option("--predictor", sa.predictor, "mode or mean of the predictive")->capture_default_str();
  sim->add_flag("--record-timing", sa.record_timing, "Add wall-clock columns");

  SampleArgs ma;
  auto* smp = app.add_subcommand("sample", "Metropolis-within-Gibbs chain for the exact posterior");
  smp->add_option("--method", ma.method)->required()->check(CLI::IsMember({"laplace", "cs", "bernoulli"}));
  smp->add_option("--data", ma.data)->required();
  smp->add_option("--response", ma.response)->capture_default_str();
  smp->add_option("--config", ma.config);
  smp->add_option("--seed", ma.seed)->capture_default_str();
  smp->add_option("--iterations", ma.iterations)->capture_default_str();
  smp->add_option("--burn-in", ma.burn_in)->capture_default_str();
  smp->add_option("--thin", ma.thin)->capture_default_str();
  smp->add_option("--out", ma.out)->required();
  smp->add_flag("--standardize,!--no-standardize", ma.standardize, "Center and scale covariates (default on)");
  smp->add_flag("--precondition,!--no-precondition", ma.precondition, "Use the VB covariance for the beta proposal");

  std::string vdata, vresponse = "y";
  auto* val = app.add_subcommand("validate", "Check a CSV file against the model's data requirements");
  val->add_option("--data", vdata)->required();
  val->add_option("--response", vresponse)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*fit) return do_fit(fa);
    if (*pred) return do_predict(pa);
    if (*sim) return do_simulate(sa);
    if (*smp) return do_sample(ma);
    if (*val) return do_validate(vdata, vresponse);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace spvb
