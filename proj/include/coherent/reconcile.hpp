#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "coherent/base_forecast.hpp"
#include "coherent/covariance.hpp"
#include "coherent/error.hpp"
#include "coherent/hierarchy.hpp"

namespace coherent {

struct ReconciliationResult {
  Eigen::MatrixXd y_tilde;  // H x n
  std::vector<double> max_constraint_violation;  // per horizon, relative
  WeightMethod method = WeightMethod::ols;
};

namespace detail {

struct ConstraintSolve {
  Eigen::MatrixXd WU;       // n x K
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  bool qr_fallback = false;
  double condition = 0.0;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (qr_fallback) return cod.solve(rhs);
    return llt.solve(rhs);
  }
};

/// Factorizes the K x K system U' W U once; reusable across horizons.
inline ConstraintSolve factor_constraints(const LinkedSystem& sys,
                                          const CovarianceEstimate& W) {
  if (W.W.rows() != sys.n || W.W.cols() != sys.n)
    throw input_error("weight matrix is " + std::to_string(W.W.rows()) + "x" +
                      std::to_string(W.W.cols()) + ", system has n = " +
                      std::to_string(sys.n));
  ConstraintSolve cs;
  cs.WU = W.W * sys.U_full.transpose();
  Eigen::MatrixXd A = sys.U_full * cs.WU;
  A = (A + A.transpose()) / 2.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin <= 0.0)
    throw numeric_error("U'WU is not positive definite (rank-deficient "
                        "constraints or non-PD weight matrix)");
  cs.condition = lmax / lmin;
  if (cs.condition > 1e12) {
    // Shrinkage normally keeps W well conditioned; ingested W may not be.
    cs.qr_fallback = true;
    cs.cod.compute(A);
  } else {
    cs.llt.compute(A);
    if (cs.llt.info() != Eigen::Success)
      throw numeric_error("Cholesky factorization of U'WU failed");
  }
  return cs;
}

inline Eigen::VectorXd project(const ConstraintSolve& cs, const LinkedSystem& sys,
                               const Eigen::VectorXd& y_hat) {
  Eigen::VectorXd z = cs.solve(sys.U_full * y_hat);
  return y_hat - cs.WU * z;
}

inline double relative_violation(const LinkedSystem& sys,
                                 const Eigen::VectorXd& y_hat,
                                 const Eigen::VectorXd& y_tilde) {
  double scale = std::max(1.0, y_hat.lpNorm<Eigen::Infinity>());
  return (sys.U_full * y_tilde).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace detail

/// Projects base forecasts onto the coherent subspace:
/// y_tilde = y_hat - W U (U' W U)^{-1} U' y_hat, solved by Cholesky of the
/// K x K system (never an explicit inverse). Coherent inputs are fixed points.
inline Eigen::VectorXd reconcile(const Eigen::VectorXd& y_hat,
                                 const LinkedSystem& sys,
                                 const CovarianceEstimate& W) {
  if (y_hat.size() != sys.n)
    throw input_error("forecast vector has " + std::to_string(y_hat.size()) +
                      " entries, system has n = " + std::to_string(sys.n));
  auto cs = detail::factor_constraints(sys, W);
  Eigen::VectorXd y_tilde = detail::project(cs, sys, y_hat);
  double viol = detail::relative_violation(sys, y_hat, y_tilde);
  if (viol > 1e-8)
    throw numeric_error("constraint violation " + std::to_string(viol) +
                        " after reconciliation (condition estimate " +
                        std::to_string(cs.condition) + ")");
  return y_tilde;
}

/// Reconciles every horizon of a base forecast set with the same W.
inline ReconciliationResult reconcile_batch(const BaseForecastSet& base,
                                            const LinkedSystem& sys,
                                            const CovarianceEstimate& W) {
  if (base.forecasts.cols() != sys.n)
    throw input_error("base forecast set does not match the system size");
  auto cs = detail::factor_constraints(sys, W);

  ReconciliationResult out;
  out.method = W.method;
  out.y_tilde.resize(base.forecasts.rows(), sys.n);
  for (Eigen::Index h = 0; h < base.forecasts.rows(); ++h) {
    Eigen::VectorXd y_hat = base.forecasts.row(h).transpose();
    Eigen::VectorXd y_tilde = detail::project(cs, sys, y_hat);
    double viol = detail::relative_violation(sys, y_hat, y_tilde);
    if (viol > 1e-8)
      throw numeric_error("constraint violation " + std::to_string(viol) +
                          " at horizon " + std::to_string(h + 1) +
                          " (condition estimate " +
                          std::to_string(cs.condition) + ")");
    out.y_tilde.row(h) = y_tilde.transpose();
    out.max_constraint_violation.push_back(viol);
  }
  return out;
}

/// Dense projection matrix M = I - W U (U' W U)^{-1} U', for diagnostics
/// and property checks. reconcile(y) == M y.
inline Eigen::MatrixXd projection_matrix(const LinkedSystem& sys,
                                         const CovarianceEstimate& W) {
  auto cs = detail::factor_constraints(sys, W);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(sys.n, sys.n);
  for (int j = 0; j < sys.n; ++j)
    M.col(j) = detail::project(cs, sys, M.col(j));
  return M;
}

}  // namespace coherent
