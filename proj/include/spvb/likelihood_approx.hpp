#ifndef SPVB_LIKELIHOOD_APPROX_HPP
#define SPVB_LIKELIHOOD_APPROX_HPP

// Local quadratic surrogate for e^x and the Poisson log-likelihood it induces.

#include <cmath>
#include <sstream>

#include "spvb/core_model.hpp"

namespace spvb {

/// Expansion points past this value would overflow e^xi downstream.
inline constexpr double kMaxExpansionPoint = 700.0;

/// g(x, xi) = e^xi [(1 - xi)(1 + x) + x^2 / 2 + xi^2 / 2]; g(xi, xi) = e^xi.
template <typename Scalar>
Scalar quad_bound(Scalar x, Scalar xi) {
  return std::exp(xi) * ((Scalar(1) - xi) * (Scalar(1) + x) + x * x / Scalar(2) + xi * xi / Scalar(2));
}

/// Snapshot of the surrogate at expansion points xi.
template <typename Scalar = double>
struct QuadApprox {
  Vector<Scalar> xi;      // n
  Vector<Scalar> exp_xi;  // e^xi
  Vector<Scalar> m_xi;    // e^xi (1 - xi)
  Matrix<Scalar> s_x_xi;  // sum_i e^xi_i X_i X_i^T, p x p
};

template <typename Scalar>
QuadApprox<Scalar> refresh(const Vector<Scalar>& xi, const Dataset<Scalar>& data) {
  if (xi.size() != data.n()) throw ContractError("refresh: xi must have length n");
  for (Index i = 0; i < xi.size(); ++i) {
    if (!(xi(i) <= Scalar(kMaxExpansionPoint)) || !std::isfinite(xi(i))) {
      std::ostringstream msg;
      msg << "linear predictor diverged: xi[" << i << "] = " << xi(i);
      throw DivergenceError(msg.str());
    }
  }
  QuadApprox<Scalar> q;
  q.xi = xi;
  q.exp_xi = xi.array().exp().matrix();
  q.m_xi = (q.exp_xi.array() * (Scalar(1) - xi.array())).matrix();
  q.s_x_xi = data.design.transpose() * q.exp_xi.asDiagonal() * data.design;
  return q;
}

/// Starting expansion points xi_i = log(y_i + 1). Starting from xi = 0 the
/// first beta update is a full Newton step from unit rates, which overshoots
/// badly once counts run into the hundreds.
template <typename Scalar>
Vector<Scalar> initial_expansion(const Dataset<Scalar>& data) {
  return (data.response.array() + Scalar(1)).log().matrix();
}

/// E_q log p~(y | beta, xi) for q(beta) with mean mu and E(beta beta^T) = d_beta,
/// dropping -sum log y_i!.
template <typename Scalar>
Scalar approx_loglik(const QuadApprox<Scalar>& q, const Dataset<Scalar>& data, const Vector<Scalar>& mu,
                     const Matrix<Scalar>& d_beta) {
  const Index n = data.n(), p = data.p();
  if (q.xi.size() != n || mu.size() != p || d_beta.rows() != p || d_beta.cols() != p ||
      q.s_x_xi.rows() != p) {
    throw ContractError("approx_loglik: dimension mismatch");
  }
  const Vector<Scalar> eta = data.design * mu;
  return -q.m_xi.sum() - q.m_xi.dot(eta) -
         Scalar(0.5) * (q.xi.array().square() * q.exp_xi.array()).sum() -
         Scalar(0.5) * (q.s_x_xi.cwiseProduct(d_beta)).sum() + data.response.dot(eta);
}

/// X^T (y - M_xi), the linear term of every beta update.
template <typename Scalar>
Vector<Scalar> score_term(const QuadApprox<Scalar>& q, const Dataset<Scalar>& data) {
  return data.design.transpose() * (data.response - q.m_xi);
}

}  // namespace spvb

#endif  // SPVB_LIKELIHOOD_APPROX_HPP
