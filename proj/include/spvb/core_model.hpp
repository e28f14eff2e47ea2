#ifndef SPVB_CORE_MODEL_HPP
#define SPVB_CORE_MODEL_HPP

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "spvb/errors.hpp"

namespace spvb {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Count-regression data. Column 0 of the design is the intercept; index 0
/// of every coefficient vector is the intercept for all three methods.
template <typename Scalar = double>
struct Dataset {
  Matrix<Scalar> design;    // n x p
  Vector<Scalar> response;  // n counts stored as integral values

  Index n() const { return design.rows(); }
  Index p() const { return design.cols(); }
};

/// Returns one message per violated invariant; empty means the dataset is
/// usable by every engine.
template <typename Scalar>
std::vector<std::string> validate(const Dataset<Scalar>& data) {
  std::vector<std::string> out;
  if (data.n() < 1 || data.p() < 1) {
    out.emplace_back("empty dataset");
    return out;
  }
  if (data.response.size() != data.n()) {
    std::ostringstream msg;
    msg << "dimension mismatch: design has " << data.n() << " rows, response has "
        << data.response.size() << " entries";
    out.push_back(msg.str());
  }
  if (!data.design.allFinite()) out.emplace_back("non-finite design entry");
  if ((data.design.col(0).array() != Scalar(1)).any()) {
    out.emplace_back("intercept column not constant one");
  }
  const Index n = std::min<Index>(data.n(), data.response.size());
  bool negative = false, fractional = false, non_finite = false;
  for (Index i = 0; i < n; ++i) {
    const Scalar y = data.response(i);
    if (!std::isfinite(y)) {
      non_finite = true;
    } else {
      if (y < Scalar(0)) negative = true;
      if (y != std::floor(y)) fractional = true;
    }
  }
  if (non_finite) out.emplace_back("non-finite count");
  if (negative) out.emplace_back("negative count");
  if (fractional) out.emplace_back("non-integer count");
  if (data.n() > 1) {
    for (Index j = 1; j < data.p(); ++j) {
      const auto col = data.design.col(j);
      if (col.allFinite() && (col.array() == col(0)).all()) {
        out.push_back("zero-variance column " + std::to_string(j));
      }
    }
  }
  return out;
}

template <typename Scalar>
void require_valid(const Dataset<Scalar>& data) {
  const auto diagnostics = validate(data);
  if (!diagnostics.empty()) {
    std::string msg = "invalid dataset:";
    for (const auto& d : diagnostics) msg += " " + d + ";";
    throw ContractError(msg);
  }
}

/// Fixed prior constants and convergence controls shared by the engines.
template <typename Scalar = double>
struct Hyperparameters {
  Scalar nu = Scalar(0.0001);
  Scalar delta = Scalar(0.01);
  Scalar A = Scalar(0.01);
  Scalar rho1 = Scalar(1);
  Scalar rho2 = Scalar(0.7) / Scalar(0.3);
  Scalar c = Scalar(0.001);
  Vector<Scalar> a_gamma = Vector<Scalar>::Constant(1, Scalar(0.01));
  Vector<Scalar> b_gamma = Vector<Scalar>::Constant(1, Scalar(0.01));
  Scalar epsilon = Scalar(1e-6);
  int max_iter = 500;

  /// Defaults with rho2 = (1 - p0) / p0 so that the prior mean of pi_j is p0.
  static Hyperparameters with_prior_inclusion(Scalar p0) {
    if (!(p0 > Scalar(0) && p0 < Scalar(1))) throw ContractError("p0 must lie in (0, 1)");
    Hyperparameters hp;
    hp.rho2 = (Scalar(1) - p0) / p0;
    return hp;
  }

  // a_j and b_j broadcast when given as a single value.
  Scalar a_at(Index j) const { return a_gamma.size() == 1 ? a_gamma(0) : a_gamma(j); }
  Scalar b_at(Index j) const { return b_gamma.size() == 1 ? b_gamma(0) : b_gamma(j); }

  void check(Index p) const {
    auto positive = [](Scalar v) { return v > Scalar(0) && std::isfinite(v); };
    if (!positive(nu) || !positive(delta) || !positive(A) || !positive(rho1) || !positive(rho2)) {
      throw ContractError("hyperparameters nu, delta, A, rho1, rho2 must be positive");
    }
    if (!(c > Scalar(0) && c < Scalar(1))) throw ContractError("c must lie in (0, 1)");
    if (!(epsilon > Scalar(0) && epsilon < Scalar(1))) throw ContractError("epsilon must lie in (0, 1)");
    if (max_iter < 1) throw ContractError("max_iter must be positive");
    for (const auto* v : {&a_gamma, &b_gamma}) {
      if (v->size() != 1 && v->size() != p) throw ContractError("a_gamma/b_gamma must have length 1 or p");
      if (!((v->array() > Scalar(0)).all())) throw ContractError("a_gamma/b_gamma must be positive");
    }
  }
};

/// q(beta) = N(mean, covariance).
template <typename Scalar = double>
struct GaussianPosterior {
  Vector<Scalar> mean;
  Matrix<Scalar> covariance;
  Scalar log_det = 0;  // log |covariance|

  Index size() const { return mean.size(); }
  /// E(beta beta^T) = mu mu^T + Sigma.
  Matrix<Scalar> second_moment() const { return mean * mean.transpose() + covariance; }
  /// Diagonal of E(beta beta^T).
  Vector<Scalar> second_moment_diag() const {
    return mean.array().square().matrix() + covariance.diagonal();
  }
};

/// Inverts a symmetric positive-definite precision matrix and solves for the
/// mean. Falls back once to a diagonal jitter of 1e-10 trace / p.
template <typename Scalar>
GaussianPosterior<Scalar> gaussian_from_precision(const Matrix<Scalar>& precision,
                                                  const Vector<Scalar>& rhs) {
  const Index p = precision.rows();
  if (precision.cols() != p || rhs.size() != p) {
    throw ContractError("gaussian_from_precision: dimension mismatch");
  }
  Eigen::LLT<Matrix<Scalar>> llt(precision);
  if (llt.info() != Eigen::Success) {
    Matrix<Scalar> jittered = precision;
    jittered.diagonal().array() += Scalar(1e-10) * precision.trace() / Scalar(p);
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) {
      Eigen::LDLT<Matrix<Scalar>> ldlt(precision);
      std::ostringstream msg;
      msg << "precision matrix is not positive definite (reciprocal condition estimate "
          << ldlt.rcond() << ")";
      throw NumericalError(msg.str());
    }
  }
  GaussianPosterior<Scalar> post;
  post.covariance = llt.solve(Matrix<Scalar>::Identity(p, p));
  post.covariance = Scalar(0.5) * (post.covariance + post.covariance.transpose()).eval();
  post.mean = llt.solve(rhs);
  const Matrix<Scalar> l = llt.matrixL();
  post.log_det = -Scalar(2) * l.diagonal().array().log().sum();
  if (!post.mean.allFinite() || !std::isfinite(post.log_det)) {
    throw NumericalError("gaussian_from_precision: non-finite posterior");
  }
  return post;
}

enum class Method { Laplace, CS, Bernoulli };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Laplace: return "laplace";
    case Method::CS: return "cs";
    case Method::Bernoulli: return "bernoulli";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  if (s == "laplace") return Method::Laplace;
  if (s == "cs") return Method::CS;
  if (s == "bernoulli") return Method::Bernoulli;
  throw ContractError("unknown method: " + std::string(s));
}

/// Output of any of the three coordinate-ascent fits.
template <typename Scalar = double>
struct FitResult {
  Method method = Method::Laplace;
  GaussianPosterior<Scalar> posterior;
  Vector<Scalar> inclusion_prob;  // entry 0 is 1; all ones for Laplace
  std::map<std::string, Vector<Scalar>> hyper_expectations;
  std::vector<Scalar> elbo_trace;
  Scalar initial_elbo = 0;  // ELBO of the initial state, before the first sweep
  int iterations = 0;
  bool converged = false;
  std::string status;  // empty unless the fit stopped on a numerical failure
};

/// |curr - prev| / max(|prev|, 1e-12).
template <typename Scalar>
Scalar relative_change(Scalar prev, Scalar curr) {
  return std::abs(curr - prev) / std::max(std::abs(prev), Scalar(1e-12));
}

/// Whether a sweep re-expands the likelihood surrogate after the beta update.
enum class XiUpdate { Refresh, Freeze };

namespace detail {

template <typename Scalar>
Scalar checked(Scalar v, const char* term) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ELBO term: ") + term);
  return v;
}

/// Shared coordinate-ascent driver: sweep, score, stop on relative ELBO change.
/// A numerical failure ends the run with the last good state and
/// converged = false.
template <typename Scalar, typename State, typename Sweep, typename Elbo, typename Finish>
FitResult<Scalar> ascend(State state, const Hyperparameters<Scalar>& hp, Sweep&& sweep, Elbo&& elbo,
                         Finish&& finish) {
  FitResult<Scalar> result;
  result.initial_elbo = elbo(state);
  Scalar prev = result.initial_elbo;
  for (int it = 0; it < hp.max_iter; ++it) {
    State next = state;
    Scalar curr;
    try {
      sweep(next);
      curr = elbo(next);
    } catch (const NumericalError& e) {
      result.status = e.what();
      break;
    }
    state = std::move(next);
    result.elbo_trace.push_back(curr);
    result.iterations = it + 1;
    if (relative_change(prev, curr) < hp.epsilon) {
      result.converged = true;
      break;
    }
    prev = curr;
  }
  finish(state, result);
  return result;
}

}  // namespace detail

}  // namespace spvb

#endif  // SPVB_CORE_MODEL_HPP
