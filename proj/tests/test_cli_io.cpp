#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "spvb/cli_io.hpp"
#include "spvb/vb_spike_slab.hpp"
#include "test_support.hpp"

using namespace spvb;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spvb_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spvb");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

void write_dataset(const fs::path& p, const Dataset<double>& d) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (Index j = 1; j < d.p(); ++j) out << "x" << j << ",";
  out << "count\n";
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 1; j < d.p(); ++j) out << d.design(i, j) << ",";
    out << d.response(i) << "\n";
  }
  spit(p, out.str());
}

}  // namespace

TEST_CASE("CSV with quotes, CRLF, BOM and a trailing blank line") {
  std::istringstream in("\xEF\xBB\xBF\"a\",\"b, c\"\r\n1,\" 2.5\"\r\n-3e-1,4\r\n\r\n");
  const auto t = read_csv(in);
  CHECK(t.header == std::vector<std::string>{"a", "b, c"});
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(0, 1) == 2.5);
  CHECK(t.values(1, 0) == -0.3);
}

TEST_CASE("CSV errors carry 1-based positions") {
  const auto position = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_csv(in);
    } catch (const ParseError& e) {
      return std::pair{e.row(), e.column()};
    }
    return std::pair{-1L, -1L};
  };
  CHECK(position("x,y\n1,2\n3,abc\n") == std::pair{3L, 2L});
  CHECK(position("x,y\n1,2,3\n") == std::pair{2L, 3L});
  CHECK(position("x,x\n1,2\n") == std::pair{1L, 2L});
  CHECK(position("x,\"y\n1,2\n") != std::pair{-1L, -1L});
  CHECK(position("") == std::pair{1L, 0L});
}

TEST_CASE("dataset from a table") {
  std::istringstream in("y,u,v\n1,0.5,2\n0,1.5,3\n");
  const auto t = read_csv(in);
  std::vector<std::string> names;
  const auto d = dataset_from_table(t, "y", true, &names);
  CHECK(names == std::vector<std::string>{"(intercept)", "u", "v"});
  CHECK(d.design.col(0).isOnes());
  CHECK(d.design(1, 2) == 3);
  CHECK(d.response == test::vec({1, 0}));
  CHECK_THROWS_AS(dataset_from_table(t, "w", true), ContractError);
  Vector<double> y;
  const auto x = design_from_table(t, {"(intercept)", "v"}, "y", &y);
  CHECK(x.cols() == 2);
  CHECK(y.size() == 2);
  CHECK_THROWS_AS(design_from_table(t, {"z"}, "y", &y), ContractError);
}

TEST_CASE("config files") {
  std::istringstream in("# prior\nnu = 0.5\np0=0.25  # inline\na_gamma = 1, 2\n\nn=50\nmax_iter=30\n");
  auto kv = read_config(in);
  const auto hp = apply_hyper_config(kv);
  CHECK(hp.nu == 0.5);
  CHECK(hp.rho2 == doctest::Approx(3.0));
  CHECK(hp.a_gamma == test::vec({1, 2}));
  CHECK(hp.max_iter == 30);
  const auto sc = apply_scenario_config(kv, ScenarioConfig{});
  CHECK(sc.n == 50);
  CHECK(kv.empty());

  std::istringstream dup("c=0.1\nc=0.2\n");
  CHECK_THROWS_AS(read_config(dup), ParseError);
  std::istringstream bad("c\n");
  CHECK_THROWS_AS(read_config(bad), ParseError);
  std::map<std::string, std::string> nonnum{{"delta", "big"}};
  CHECK_THROWS_AS(apply_hyper_config(nonnum), ContractError);
}

TEST_CASE("standardization preserves the linear predictor") {
  const auto d = test::poisson_data(test::vec({0.2, 0.5, -0.3}), 30, 31);
  Matrix<double> raw = d.design;
  raw.col(1) = raw.col(1) * 7.0 + Vector<double>::Constant(30, 3.0);
  const auto st = fit_standardization(raw);
  const Matrix<double> z = st.apply(raw);
  CHECK(z.col(0).isOnes());
  CHECK(std::abs(z.col(1).mean()) < 1e-12);
  CHECK((z.col(1).array() - z.col(1).mean()).square().sum() / 29 == doctest::Approx(1.0));
  const Vector<double> beta_std = test::vec({0.1, 0.4, -0.2});
  CHECK(((z * beta_std) - raw * (st.to_original() * beta_std)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("result bundles round trip exactly") {
  const auto d = test::poisson_data(test::vec({0.2, 0.5, 0.0}), 40, 32);
  ResultBundle b;
  b.fit = fit_cs(d, Hyperparameters<double>{});
  b.sparse = sparsify(b.fit, d);
  b.standardization = Standardization::identity(3);
  b.columns = {"(intercept)", "x1", "x2"};
  b.response = "count";
  b.seed = 9;
  b.fit.hyper_expectations["odd"] = test::vec({std::numeric_limits<double>::infinity(), NAN});
  const ResultBundle r = bundle_from_json(nlohmann::json::parse(to_json(b).dump()));
  CHECK(r.fit.posterior.mean == b.fit.posterior.mean);
  CHECK(r.fit.posterior.covariance == b.fit.posterior.covariance);
  CHECK(r.fit.elbo_trace == b.fit.elbo_trace);
  CHECK(r.fit.inclusion_prob == b.fit.inclusion_prob);
  CHECK(r.sparse.support == b.sparse.support);
  CHECK(r.sparse.kappa == b.sparse.kappa);
  CHECK(r.fit.method == Method::CS);
  CHECK(std::isinf(r.fit.hyper_expectations.at("odd")(0)));
  CHECK(std::isnan(r.fit.hyper_expectations.at("odd")(1)));
  CHECK(r.columns == b.columns);
  CHECK(r.seed == 9);
  CHECK_FALSE(to_json(b)["metadata"].contains("wall_time_s"));
  CHECK_THROWS_AS(bundle_from_json(nlohmann::json::object()), ContractError);
}

TEST_CASE("fit then predict through the command line") {
  const fs::path dir = scratch_dir("fit_predict");
  const auto d = test::poisson_data(test::vec({0.4, 0.7, 0.0, -0.5}), 60, 33);
  write_dataset(dir / "train.csv", d);
  for (const char* method : {"laplace", "cs", "bernoulli"}) {
    CAPTURE(method);
    const std::string model = (dir / (std::string(method) + ".json")).string();
    const std::string pred = (dir / (std::string(method) + ".csv")).string();
    CHECK(cli({"fit", "--method", method, "--data", (dir / "train.csv").string(), "--response", "count", "--out", model}) == 0);
    const std::string first = slurp(model);
    CHECK(cli({"fit", "--method", method, "--data", (dir / "train.csv").string(), "--response", "count", "--out", model}) == 0);
    CHECK(slurp(model) == first);
    CHECK(cli({"predict", "--model", model, "--data", (dir / "train.csv").string(), "--out", pred}) == 0);
    const std::string text = slurp(pred);
    CHECK(text.rfind("# spvb predict", 0) == 0);
    CHECK(text.find("row,m,s2,mode,mean,hpd_lower,hpd_upper,hpd_size,hpd_mass,tail_mass,y,in_hpd\n") != std::string::npos);
  }
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch_dir("exit_codes");
  spit(dir / "bad.csv", "x,count\n1,2\n2,oops\n");
  spit(dir / "neg.csv", "x,count\n1,2\n2,-1\n");
  const std::string out = (dir / "o.json").string();
  CHECK(cli({"fit", "--method", "cs", "--data", (dir / "bad.csv").string(), "--response", "count", "--out", out}) == 1);
  CHECK(cli({"fit", "--method", "cs", "--data", (dir / "neg.csv").string(), "--response", "count", "--out", out}) == 1);
  CHECK(cli({"fit", "--method", "cs", "--data", (dir / "missing.csv").string(), "--out", out}) == 1);
  CHECK(cli({"fit", "--method", "mcmc", "--data", (dir / "bad.csv").string(), "--out", out}) == 1);
  CHECK(cli({"validate", "--data", (dir / "neg.csv").string(), "--response", "count"}) == 1);
  CHECK(cli({}) == 1);
  CHECK(cli({"--help"}) == 0);
  spit(dir / "cfg.txt", "bogus=1\n");
  CHECK(cli({"simulate", "--scenario", "low", "--config", (dir / "cfg.txt").string(), "--replications", "1", "--seed",
             "1", "--out", out}) == 1);
}

TEST_CASE("simulate output does not depend on the thread count") {
  const fs::path dir = scratch_dir("simulate");
  const auto run = [&](const std::string& tag, int threads) {
    const std::string out = (dir / (tag + ".csv")).string();
    CHECK(cli({"simulate", "--scenario", "low", "--replications", "4", "--seed", "5", "--threads",
               std::to_string(threads), "--out", out}) == 0);
    return slurp(out) + slurp(out + ".summary.csv");
  };
  CHECK(run("one", 1) == run("three", 3));
}
