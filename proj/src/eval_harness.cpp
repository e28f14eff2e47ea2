#include "spvb/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "spvb/sparsify.hpp"
#include "spvb/vb_bernoulli.hpp"
#include "spvb/vb_laplace.hpp"
#include "spvb/vb_spike_slab.hpp"

namespace spvb {

ScenarioConfig ScenarioConfig::low_dim() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::high_dim() {
  ScenarioConfig c;
  c.n = 30;
  c.p = 200;
  c.mu0 = 0.1;
  c.sigma0 = 0.6;
  c.mu_x = 0.1;
  c.sigma2_x = 0.05;
  c.z_mask.clear();
  c.random_k = 60;
  return c;
}

void ScenarioConfig::check() const {
  if (n < 2 || p < 1) throw ContractError("scenario: need n >= 2 and p >= 1");
  if (random_k > 0) {
    if (random_k > p) throw ContractError("scenario: random_k exceeds p");
  } else {
    if (static_cast<Index>(z_mask.size()) != p) throw ContractError("scenario: z_mask must have length p");
    if (z_mask[0] != 1) throw ContractError("scenario: z_mask entry 0 must be 1");
    for (int z : z_mask) {
      if (z != 0 && z != 1) throw ContractError("scenario: z_mask entries must be 0 or 1");
    }
  }
  if (!(train_fraction > 0 && train_fraction < 1)) throw ContractError("scenario: train_fraction must lie in (0, 1)");
  if (replications < 1) throw ContractError("scenario: replications must be positive");
  if (!(sigma0 >= 0) || !(sigma2_x >= 0)) throw ContractError("scenario: sigma0 and sigma2_x must be non-negative");
  if (!(std::abs(rho) < 1)) throw ContractError("scenario: |rho| must be below 1");
  if (max_retries < 1) throw ContractError("scenario: max_retries must be positive");
}

std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
  return std::mt19937_64(seq);
}

namespace {

std::vector<int> draw_mask(const ScenarioConfig& c, std::mt19937_64& rng) {
  if (c.random_k <= 0) return c.z_mask;
  std::vector<Index> rest(static_cast<std::size_t>(c.p - 1));
  std::iota(rest.begin(), rest.end(), Index(1));
  std::shuffle(rest.begin(), rest.end(), rng);
  std::vector<int> mask(static_cast<std::size_t>(c.p), 0);
  mask[0] = 1;
  for (Index k = 0; k + 1 < c.random_k; ++k) mask[static_cast<std::size_t>(rest[static_cast<std::size_t>(k)])] = 1;
  return mask;
}

}  // namespace

Dataset<double> generate_full(const ScenarioConfig& c, std::mt19937_64& rng, Vector<double>& beta_true) {
  c.check();
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd_x = std::sqrt(c.sigma2_x);
  const double innov = std::sqrt(1.0 - c.rho * c.rho);
  for (int attempt = 0; attempt < c.max_retries; ++attempt) {
    const std::vector<int> mask = draw_mask(c, rng);
    beta_true = Vector<double>::Zero(c.p);
    for (Index j = 0; j < c.p; ++j) {
      if (mask[static_cast<std::size_t>(j)]) beta_true(j) = c.mu0 + c.sigma0 * normal(rng);
    }
    Dataset<double> d;
    d.design.resize(c.n, c.p);
    d.response.resize(c.n);
    for (Index i = 0; i < c.n; ++i) {
      d.design(i, 0) = 1.0;
      double state = 0.0;
      for (Index j = 1; j < c.p; ++j) {
        const double e = normal(rng);
        state = j == 1 ? e : c.rho * state + innov * e;
        d.design(i, j) = c.mu_x + sd_x * state;
      }
    }
    const Vector<double> eta = d.design * beta_true;
    if (eta.maxCoeff() > c.max_log_rate) continue;
    for (Index i = 0; i < c.n; ++i) {
      std::poisson_distribution<long> pois(std::exp(eta(i)));
      d.response(i) = static_cast<double>(pois(rng));
    }
    return d;
  }
  throw NumericalError("scenario generation: rate cap exceeded on every retry");
}

Replicate generate(const ScenarioConfig& c, std::mt19937_64& rng) {
  Replicate rep;
  const Dataset<double> full = generate_full(c, rng, rep.beta_true);
  std::vector<Index> idx(static_cast<std::size_t>(c.n));
  std::iota(idx.begin(), idx.end(), Index(0));
  std::shuffle(idx.begin(), idx.end(), rng);
  const Index n_train = std::clamp<Index>(std::llround(c.train_fraction * double(c.n)), 1, c.n - 1);
  auto take = [&](Index from, Index to) {
    Dataset<double> d;
    d.design.resize(to - from, c.p);
    d.response.resize(to - from);
    for (Index r = from; r < to; ++r) {
      d.design.row(r - from) = full.design.row(idx[static_cast<std::size_t>(r)]);
      d.response(r - from) = full.response(idx[static_cast<std::size_t>(r)]);
    }
    return d;
  };
  rep.train = take(0, n_train);
  rep.test = take(n_train, c.n);
  return rep;
}

double metric_cre(const std::vector<Vector<double>>& beta_hats, const std::vector<Vector<double>>& beta_trues) {
  if (beta_hats.size() != beta_trues.size()) throw ContractError("metric_cre: list lengths differ");
  double num = 0, den = 0;
  for (std::size_t r = 0; r < beta_hats.size(); ++r) {
    num += (beta_hats[r] - beta_trues[r]).squaredNorm();
    den += beta_trues[r].squaredNorm();
  }
  if (!(den > 0)) throw DomainError("metric_cre: all true coefficients are zero");
  return num / den;
}

double metric_relative_error(const std::vector<Vector<double>>& preds, const std::vector<Vector<double>>& actuals) {
  if (preds.size() != actuals.size()) throw ContractError("metric_relative_error: list lengths differ");
  double num = 0, den = 0;
  for (std::size_t r = 0; r < preds.size(); ++r) {
    if (preds[r].size() != actuals[r].size()) throw ContractError("metric_relative_error: length mismatch");
    num += (preds[r] - actuals[r]).squaredNorm();
    den += (actuals[r].array() - actuals[r].mean()).square().sum();
  }
  if (!(den > 0)) throw DomainError("metric_relative_error: responses have no variation");
  return num / den;
}

SelectionRates metric_selection(const Vector<double>& beta_hat, const Vector<double>& beta_true) {
  if (beta_hat.size() != beta_true.size()) throw ContractError("metric_selection: length mismatch");
  int pos = 0, neg = 0, fn = 0, fp = 0;
  for (Index j = 1; j < beta_true.size(); ++j) {
    if (beta_true(j) != 0) {
      ++pos;
      if (beta_hat(j) == 0) ++fn;
    } else {
      ++neg;
      if (beta_hat(j) != 0) ++fp;
    }
  }
  SelectionRates out;
  if (pos > 0) out.fnr = double(fn) / pos;
  if (neg > 0) out.fpr = double(fp) / neg;
  return out;
}

double aicc(double loglik, Index df, Index n) {
  if (n <= df + 1) return std::numeric_limits<double>::infinity();
  const double k = double(df);
  return -loglik + 2 * k + 2 * k * (k + 1) / double(n - df - 1);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace {

FitResult<double> fit_method(const Dataset<double>& d, Method m, const Hyperparameters<double>& hp) {
  switch (m) {
    case Method::Laplace: return fit_laplace(d, hp);
    case Method::CS: return fit_cs(d, hp);
    case Method::Bernoulli: return fit_bernoulli(d, hp);
  }
  throw ContractError("unknown method");
}

Vector<double> point_predictions(const Dataset<double>& d, const FitResult<double>& fit,
                                 const SparseCoefficients<double>& sparse, const StudyOptions& opt) {
  PredictOptions popt;
  popt.restrict_to_support = opt.restrict_to_support;
  const Vector<double> mask = prediction_mask(fit, sparse, opt.restrict_to_support);
  Vector<double> out(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    const Vector<double> x0 = d.design.row(i).transpose();
    const auto [m, s2] = linear_predictor_moments(x0, fit.posterior, mask);
    if (opt.predictor == PointPredictor::Mean) {
      out(i) = std::exp(m + s2 / 2);
    } else {
      out(i) = double(predictive_from_moments(m, s2, popt).mode);
    }
  }
  return out;
}

}  // namespace

ReplicationRecord evaluate_method(const Replicate& rep, Method method, const Hyperparameters<double>& hp,
                                  const StudyOptions& opt) {
  ReplicationRecord r;
  r.method = method;
  r.beta_true = rep.beta_true;
  const auto start = std::chrono::steady_clock::now();
  try {
    const FitResult<double> fit = fit_method(rep.train, method, hp);
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    const SparseCoefficients<double> sparse = sparsify(fit, rep.train, opt.aic_form);
    r.beta_hat = sparse.beta_hat;
    r.df = sparse.df;
    r.aicc = aicc(poisson_loglik(sparse.beta_hat, rep.train), sparse.df, rep.train.n());
    r.train_y = rep.train.response;
    r.test_y = rep.test.response;
    r.train_pred = point_predictions(rep.train, fit, sparse, opt);
    r.test_pred = point_predictions(rep.test, fit, sparse, opt);
    const auto hpd = hpd_coefficients(fit.posterior, opt.hpd_level);
    for (Index j = 0; j < rep.beta_true.size(); ++j) {
      const auto& iv = hpd[static_cast<std::size_t>(j)];
      r.covered.push_back(iv.lower <= rep.beta_true(j) && rep.beta_true(j) <= iv.upper ? 1 : 0);
    }
    const double den = rep.beta_true.squaredNorm();
    r.cre = den > 0 ? (r.beta_hat - rep.beta_true).squaredNorm() / den : std::numeric_limits<double>::quiet_NaN();
    auto rel = [](const Vector<double>& pred, const Vector<double>& y) {
      const double ss = (y.array() - y.mean()).square().sum();
      return ss > 0 ? (pred - y).squaredNorm() / ss : std::numeric_limits<double>::quiet_NaN();
    };
    r.trre = rel(r.train_pred, r.train_y);
    r.tsre = rel(r.test_pred, r.test_y);
    const SelectionRates sel = metric_selection(r.beta_hat, rep.beta_true);
    r.fnr = sel.fnr;
    r.fpr = sel.fpr;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.failure = e.what();
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

double prior_inclusion(const ScenarioConfig& c) {
  if (c.random_k > 0) return double(c.random_k) / double(c.p);
  return double(std::count(c.z_mask.begin(), c.z_mask.end(), 1)) / double(c.p);
}

MetricsReport summarize(Method m, const std::vector<const ReplicationRecord*>& recs, Index p) {
  MetricsReport rep;
  rep.method = m;
  rep.coverage.assign(static_cast<std::size_t>(p), 0.0);
  std::vector<Vector<double>> bh, bt, trp, tra, tsp, tsa;
  std::vector<double> cre, trre, tsre, fnr, fpr;
  for (const auto* r : recs) {
    rep.wall_time_s += r->wall_time_s;
    if (!r->ok) {
      ++rep.failures;
      continue;
    }
    ++rep.fitted;
    if (r->converged) ++rep.converged;
    bh.push_back(r->beta_hat);
    bt.push_back(r->beta_true);
    trp.push_back(r->train_pred);
    tra.push_back(r->train_y);
    tsp.push_back(r->test_pred);
    tsa.push_back(r->test_y);
    if (std::isfinite(r->cre)) cre.push_back(r->cre);
    if (std::isfinite(r->trre)) trre.push_back(r->trre);
    if (std::isfinite(r->tsre)) tsre.push_back(r->tsre);
    if (r->fnr) fnr.push_back(*r->fnr);
    if (r->fpr) fpr.push_back(*r->fpr);
    for (std::size_t j = 0; j < r->covered.size(); ++j) rep.coverage[j] += r->covered[j];
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto guarded = [&](auto&& f) {
    try {
      return f();
    } catch (const Error&) {
      return nan;
    }
  };
  rep.cre = bh.empty() ? nan : guarded([&] { return metric_cre(bh, bt); });
  rep.trre = trp.empty() ? nan : guarded([&] { return metric_relative_error(trp, tra); });
  rep.tsre = tsp.empty() ? nan : guarded([&] { return metric_relative_error(tsp, tsa); });
  rep.median_cre = median(cre);
  rep.median_trre = median(trre);
  rep.median_tsre = median(tsre);
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
  if (!fnr.empty()) {
    rep.median_fnr = median(fnr);
    rep.mean_fnr = mean(fnr);
  }
  if (!fpr.empty()) {
    rep.median_fpr = median(fpr);
    rep.mean_fpr = mean(fpr);
  }
  for (auto& c : rep.coverage) c = rep.fitted > 0 ? c / rep.fitted : nan;
  return rep;
}

}  // namespace

StudyResult run_study(const ScenarioConfig& config, const Hyperparameters<double>& hp_in, const StudyOptions& opt) {
  config.check();
  if (opt.methods.empty()) throw ContractError("run_study: no methods requested");
  Hyperparameters<double> hp = hp_in;
  if (opt.p0 != 0) {
    const double p0 = opt.p0 < 0 ? prior_inclusion(config) : opt.p0;
    if (!(p0 > 0 && p0 < 1)) throw ContractError("run_study: prior inclusion must lie in (0, 1)");
    hp.rho2 = (1 - p0) / p0;
  }
  const int reps = config.replications;
  const std::size_t n_methods = opt.methods.size();
  std::vector<std::vector<ReplicationRecord>> slots(static_cast<std::size_t>(reps));

  auto work = [&](int r) {
    auto& out = slots[static_cast<std::size_t>(r)];
    std::mt19937_64 rng = replication_engine(config.seed, static_cast<std::uint64_t>(r));
    std::optional<Replicate> rep;
    std::string failure;
    try {
      rep = generate(config, rng);
    } catch (const Error& e) {
      failure = e.what();
    }
    for (Method m : opt.methods) {
      ReplicationRecord rec;
      if (rep) {
        rec = evaluate_method(*rep, m, hp, opt);
      } else {
        rec.method = m;
        rec.failure = failure;
      }
      rec.replication = r;
      out.push_back(std::move(rec));
    }
  };

  const int threads = std::clamp(opt.threads, 1, reps);
  if (threads == 1) {
    for (int r = 0; r < reps; ++r) work(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int r = next++; r < reps; r = next++) work(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  StudyResult result;
  for (auto& s : slots) {
    for (auto& rec : s) result.records.push_back(std::move(rec));
  }
  for (std::size_t k = 0; k < n_methods; ++k) {
    std::vector<const ReplicationRecord*> recs;
    for (std::size_t i = k; i < result.records.size(); i += n_methods) recs.push_back(&result.records[i]);
    result.reports.push_back(summarize(opt.methods[k], recs, config.p));
  }
  return result;
}

}  // namespace spvb
