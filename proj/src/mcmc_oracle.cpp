#include "spvb/mcmc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>

#include "spvb/special_math.hpp"

namespace spvb {

void McmcConfig::check() const {
  if (iterations < 1) throw ContractError("mcmc: iterations must be positive");
  if (burn_in < 0) throw ContractError("mcmc: burn_in must be non-negative");
  if (burn_in >= iterations) throw ContractError("mcmc: no iterations left after burn-in");
  if (thin < 1) throw ContractError("mcmc: thin must be at least 1");
  if (!(step_scale > 0) || !std::isfinite(step_scale)) throw ContractError("mcmc: step_scale must be positive");
}

Index Chain::column(const std::string& name) const {
  const auto it = std::find(param_names.begin(), param_names.end(), name);
  if (it == param_names.end()) throw ContractError("chain has no parameter " + name);
  return static_cast<Index>(it - param_names.begin());
}

std::vector<std::string> parameter_names(Method method, Index p) {
  std::vector<std::string> names;
  const auto add_range = [&](const std::string& stem, Index from) {
    for (Index j = from; j < p; ++j) names.push_back(stem + std::to_string(j));
  };
  add_range("beta", 0);
  switch (method) {
    case Method::Laplace:
      add_range("tau", 1);
      names.insert(names.end(), {"eta", "tau0", "a"});
      break;
    case Method::CS:
      add_range("z", 1);
      add_range("pi", 1);
      names.insert(names.end(), {"tau2", "a"});
      break;
    case Method::Bernoulli:
      add_range("gamma", 1);
      add_range("alpha", 0);
      add_range("pi", 1);
      break;
  }
  return names;
}

namespace {

using Rng = std::mt19937_64;

double poisson_loglik_eta(const Vector<double>& eta, const Vector<double>& y) {
  double total = 0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double rate = std::exp(eta(i));
    if (!std::isfinite(rate)) return -std::numeric_limits<double>::infinity();
    total += y(i) * eta(i) - rate;
  }
  return total;
}

double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double draw_inv_gamma(Rng& rng, double shape, double scale) { return 1.0 / draw_gamma(rng, shape, scale); }

double draw_beta(Rng& rng, double a, double b) {
  const double x = draw_gamma(rng, a, 1.0);
  const double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

// GIG(1/2, a, b) through its reciprocal, an inverse Gaussian with mean
// mu = sqrt(a / b) and shape a, drawn by the Michael, Schucany and Haas
// transformation. With t = mu chi^2 / a the smaller root is mu / s for
// s = 1 + t/2 + sqrt(t^2 + 4t)/2, which avoids the cancellation of the usual
// form once beta_j is tiny. At b = 0 the law is Gamma(1/2, a/2) = chi^2_1 / a,
// and large t reaches that limit smoothly.
double draw_gig_half(Rng& rng, double a, double b) {
  const double nu = std::normal_distribution<double>(0.0, 1.0)(rng);
  const double y = nu * nu;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (!(b > 0)) return y / a;
  const double mu = std::sqrt(a / b);
  const double t = mu * y / a;
  const double s = t > 1e150 ? t + 2 : 1 + 0.5 * t + 0.5 * std::sqrt(t * (t + 4));
  // The inverse Gaussian is mu / s with probability s / (s + 1), else mu s.
  return u <= s / (s + 1) ? s / mu : 1 / (mu * s);
}

bool draw_bernoulli_logit(Rng& rng, double logit) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < sigmoid(logit);
}

// Everything the joint random-walk move on beta needs. The prior on beta is
// N(0, diag(1 / prior_prec)) and the linear predictor is X (mask .* beta).
struct BetaBlock {
  explicit BetaBlock(const Dataset<double>& d) : data(d) {}

  const Dataset<double>& data;
  Matrix<double> chol;  // proposal factor before scaling
  double base = 1;
  double step = 1;
  Vector<double> beta, prior_prec, mask, eta;
  double loglik = 0;

  void recompute() {
    eta = data.design * beta.cwiseProduct(mask);
    loglik = poisson_loglik_eta(eta, data.response);
  }

  bool move(Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Vector<double> noise(beta.size());
    for (Index j = 0; j < noise.size(); ++j) noise(j) = z(rng);
    const Vector<double> cand = beta + step * base * (chol * noise);
    const Vector<double> cand_eta = data.design * cand.cwiseProduct(mask);
    const double cand_ll = poisson_loglik_eta(cand_eta, data.response);
    const double delta = cand_ll - loglik - 0.5 * (prior_prec.array() * (cand.array().square() - beta.array().square())).sum();
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (std::isfinite(delta) && std::log(u) < delta) {
      beta = cand;
      eta = cand_eta;
      loglik = cand_ll;
      return true;
    }
    return false;
  }
};

}  // namespace

Chain sample(Method method, const Dataset<double>& data, const Hyperparameters<double>& hp, const McmcConfig& cfg,
             const Matrix<double>* proposal_cov, const Vector<double>* start) {
  cfg.check();
  require_valid(data);
  const Index p = data.p();
  hp.check(p);
  Rng rng(cfg.seed);

  BetaBlock blk(data);
  if (proposal_cov) {
    if (proposal_cov->rows() != p || proposal_cov->cols() != p) throw ContractError("mcmc: proposal covariance must be p x p");
    Eigen::LLT<Matrix<double>> llt(*proposal_cov);
    if (llt.info() != Eigen::Success) throw NumericalError("mcmc: proposal covariance is not positive definite");
    blk.chol = llt.matrixL();
  } else {
    blk.chol = 0.1 * Matrix<double>::Identity(p, p);
  }
  blk.base = 2.38 / std::sqrt(double(p));
  blk.step = cfg.step_scale;
  if (start) {
    if (start->size() != p) throw ContractError("mcmc: start must have length p");
    blk.beta = *start;
  } else {
    blk.beta = Vector<double>::Zero(p);
    blk.beta(0) = std::log(data.response.mean() + 0.5);
  }
  blk.mask = Vector<double>::Ones(p);
  blk.prior_prec = Vector<double>::Ones(p);
  blk.recompute();

  // Model-specific latent state; only the members of the active model are used.
  Vector<double> tau = Vector<double>::Ones(p);  // Laplace tau_j, entry 0 is tau0
  double eta_l = 1, a = 1, tau2 = 1;
  Vector<double> z = Vector<double>::Ones(p);  // CS Z_j or Bernoulli gamma_j
  Vector<double> pi = Vector<double>::Constant(p, 0.5);
  Vector<double> alpha = Vector<double>::Ones(p);

  const auto set_prior_prec = [&]() {
    switch (method) {
      case Method::Laplace:
        blk.prior_prec = tau.cwiseInverse();
        break;
      case Method::CS:
        for (Index j = 0; j < p; ++j) blk.prior_prec(j) = 1.0 / (tau2 * (z(j) + hp.c * (1.0 - z(j))));
        break;
      case Method::Bernoulli:
        blk.prior_prec = alpha;
        break;
    }
  };

  const auto gibbs = [&]() {
    const Vector<double>& b = blk.beta;
    switch (method) {
      case Method::Laplace: {
        for (Index j = 1; j < p; ++j) tau(j) = draw_gig_half(rng, eta_l, b(j) * b(j));
        eta_l = draw_gamma(rng, hp.nu + double(p - 1), hp.delta + 0.5 * tau.tail(p - 1).sum());
        tau(0) = draw_inv_gamma(rng, 1.0, 1.0 / a + 0.5 * b(0) * b(0));
        a = draw_inv_gamma(rng, 1.0, 1.0 / hp.A + 1.0 / tau(0));
        break;
      }
      case Method::CS: {
        const double log_c = std::log(hp.c);
        for (Index j = 1; j < p; ++j) {
          // log N(b; 0, tau2) - log N(b; 0, c tau2)
          const double lr = 0.5 * log_c - 0.5 * b(j) * b(j) / tau2 * (1.0 - 1.0 / hp.c);
          z(j) = draw_bernoulli_logit(rng, lr + std::log(pi(j)) - std::log1p(-pi(j))) ? 1.0 : 0.0;
          pi(j) = draw_beta(rng, hp.rho1 + z(j), hp.rho2 + 1.0 - z(j));
        }
        double ss = 0;
        for (Index j = 0; j < p; ++j) ss += b(j) * b(j) / (z(j) + hp.c * (1.0 - z(j)));
        tau2 = draw_inv_gamma(rng, 0.5 + 0.5 * double(p), 1.0 / a + 0.5 * ss);
        a = draw_inv_gamma(rng, 1.0, 1.0 / hp.A + 1.0 / tau2);
        break;
      }
      case Method::Bernoulli: {
        for (Index j = 1; j < p; ++j) {
          const auto col = data.design.col(j);
          const Vector<double> eta_off = blk.eta - blk.mask(j) * b(j) * col;
          const Vector<double> eta_on = eta_off + b(j) * col;
          const double ll_on = poisson_loglik_eta(eta_on, data.response);
          const double ll_off = poisson_loglik_eta(eta_off, data.response);
          double logit = ll_on - ll_off + std::log(pi(j)) - std::log1p(-pi(j));
          if (std::isnan(logit)) logit = -std::numeric_limits<double>::infinity();
          const bool on = draw_bernoulli_logit(rng, logit);
          blk.mask(j) = on ? 1.0 : 0.0;
          blk.eta = on ? eta_on : eta_off;
          blk.loglik = on ? ll_on : ll_off;
          pi(j) = draw_beta(rng, hp.rho1 + blk.mask(j), hp.rho2 + 1.0 - blk.mask(j));
        }
        z = blk.mask;
        for (Index j = 0; j < p; ++j) alpha(j) = draw_gamma(rng, hp.a_at(j) + 0.5, hp.b_at(j) + 0.5 * b(j) * b(j));
        break;
      }
    }
    set_prior_prec();
  };

  set_prior_prec();
  Chain chain;
  chain.param_names = parameter_names(method, p);
  chain.draws.resize(cfg.kept(), static_cast<Index>(chain.param_names.size()));

  const int window = 50;
  int window_accepts = 0, kept_accepts = 0, row = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const bool accepted = blk.move(rng);
    gibbs();
    if (it < cfg.burn_in) {
      window_accepts += accepted;
      if ((it + 1) % window == 0) {
        const double rate = double(window_accepts) / window;
        if (rate < 0.25) blk.step *= 0.8;
        if (rate > 0.40) blk.step *= 1.25;
        window_accepts = 0;
      }
      continue;
    }
    kept_accepts += accepted;
    if ((it - cfg.burn_in) % cfg.thin != 0) continue;

    auto out = chain.draws.row(row++);
    Index k = 0;
    for (Index j = 0; j < p; ++j) out(k++) = blk.beta(j);
    switch (method) {
      case Method::Laplace:
        for (Index j = 1; j < p; ++j) out(k++) = tau(j);
        out(k++) = eta_l;
        out(k++) = tau(0);
        out(k++) = a;
        break;
      case Method::CS:
        for (Index j = 1; j < p; ++j) out(k++) = z(j);
        for (Index j = 1; j < p; ++j) out(k++) = pi(j);
        out(k++) = tau2;
        out(k++) = a;
        break;
      case Method::Bernoulli:
        for (Index j = 1; j < p; ++j) out(k++) = z(j);
        for (Index j = 0; j < p; ++j) out(k++) = alpha(j);
        for (Index j = 1; j < p; ++j) out(k++) = pi(j);
        break;
    }
  }
  chain.acceptance_rate = double(kept_accepts) / double(cfg.iterations - cfg.burn_in);
  chain.final_step = blk.step;
  if (!chain.draws.allFinite()) throw NumericalError("mcmc: non-finite draw");
  if (chain.acceptance_rate < 0.01) throw TuningError("mcmc: acceptance rate below 1% after adaptation");
  return chain;
}

double kde_bandwidth(const Vector<double>& draws) {
  const double m = double(draws.size());
  const double mean = draws.mean();
  const double sd = std::sqrt((draws.array() - mean).square().sum() / std::max(m - 1.0, 1.0));
  return 1.06 * sd * std::pow(m, -0.2);
}

double accuracy(const std::function<double(double)>& q, double q_lo, double q_hi, const Vector<double>& draws) {
  if (draws.size() < 2) throw ContractError("accuracy: need at least two draws");
  if (!(q_lo < q_hi)) throw ContractError("accuracy: empty support for q");
  if (draws.maxCoeff() == draws.minCoeff()) return 0.0;
  const double h = kde_bandwidth(draws);
  const double m = double(draws.size());
  const double norm = 1.0 / (m * h * std::sqrt(2 * std::numbers::pi));
  const auto kde = [&](double x) {
    double s = 0;
    for (Index i = 0; i < draws.size(); ++i) {
      const double u = (x - draws(i)) / h;
      s += std::exp(-0.5 * u * u);
    }
    return norm * s;
  };
  const double lo = std::min(q_lo, draws.minCoeff() - 5 * h);
  const double hi = std::max(q_hi, draws.maxCoeff() + 5 * h);
  QuadratureOptions opt;
  opt.abs_tol = 1e-7;
  double l1;
  try {
    l1 = integrate_1d([&](double x) { return std::abs(q(x) - kde(x)); }, lo, hi, 1e-6, opt);
  } catch (const IntegrationError& e) {
    l1 = e.partial();
  }
  return std::clamp(100.0 * (1.0 - 0.5 * l1), 0.0, 100.0);
}

double accuracy_gaussian(double mean, double sd, const Vector<double>& draws) {
  if (!(sd > 0)) throw DomainError("accuracy_gaussian: sd must be positive");
  const double norm = 1.0 / (sd * std::sqrt(2 * std::numbers::pi));
  return accuracy(
      [&](double x) {
        const double u = (x - mean) / sd;
        return norm * std::exp(-0.5 * u * u);
      },
      mean - 10 * sd, mean + 10 * sd, draws);
}

double accuracy_discrete(double q1, const Vector<double>& binary_draws) {
  if (!(q1 >= 0 && q1 <= 1)) throw DomainError("accuracy_discrete: q1 must lie in [0, 1]");
  if (binary_draws.size() == 0) throw ContractError("accuracy_discrete: no draws");
  for (Index i = 0; i < binary_draws.size(); ++i) {
    if (binary_draws(i) != 0 && binary_draws(i) != 1) throw ContractError("accuracy_discrete: draws must be 0 or 1");
  }
  const double f1 = binary_draws.mean();
  return 100.0 * (1.0 - 0.5 * (std::abs(q1 - f1) + std::abs((1 - q1) - (1 - f1))));
}

void write_chain_csv(const Chain& chain, std::ostream& out) {
  for (std::size_t k = 0; k < chain.param_names.size(); ++k) out << (k ? "," : "") << chain.param_names[k];
  out << "\n" << std::setprecision(17);
  for (Index r = 0; r < chain.draws.rows(); ++r) {
    for (Index c = 0; c < chain.draws.cols(); ++c) out << (c ? "," : "") << chain.draws(r, c);
    out << "\n";
  }
}

}  // namespace spvb
