#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "coherent/error.hpp"

namespace coherent {

enum class WeightMethod { ols, wls, mint_shr };

inline std::string weight_method_name(WeightMethod m) {
  switch (m) {
    case WeightMethod::ols: return "ols";
    case WeightMethod::wls: return "wls";
    case WeightMethod::mint_shr: return "mint_shr";
  }
  return "?";
}

inline WeightMethod parse_weight_method(const std::string& s) {
  if (s == "ols") return WeightMethod::ols;
  if (s == "wls") return WeightMethod::wls;
  if (s == "mint-shr" || s == "mint_shr") return WeightMethod::mint_shr;
  throw input_error("unknown weighting method '" + s + "'");
}

struct CovarianceSpec {
  WeightMethod method = WeightMethod::ols;
  double variance_floor = 1e-10;  // relative to the largest diagonal entry
  std::optional<double> lambda_override;
  // Column means are removed before estimating the covariance by default;
  // unbiased base forecasts make the means near zero either way.
  bool center = true;
};

struct CovarianceEstimate {
  Eigen::MatrixXd W;  // n x n symmetric positive definite
  WeightMethod method = WeightMethod::ols;
  double lambda = 0.0;        // mint_shr only
  Eigen::VectorXd diag_W1;    // floored diagonal of the one-step covariance
};

/// Covariance of the residual columns with 1/T_r normalization,
/// optionally centered by column means.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& residuals,
                                         bool center = true) {
  const auto T_r = residuals.rows();
  if (T_r < 2) throw input_error("sample_covariance needs at least 2 rows");
  if (!residuals.allFinite())
    throw input_error("residual matrix contains non-finite entries");
  Eigen::MatrixXd E = residuals;
  if (center) E.rowwise() -= residuals.colwise().mean();
  Eigen::MatrixXd W = (E.transpose() * E) / static_cast<double>(T_r);
  return (W + W.transpose()) / 2.0;  // exact symmetry
}

/// Schafer-Strimmer shrinkage intensity toward the diagonal target:
/// lambda = sum_{i<j} Var(r_ij) / sum_{i<j} r_ij^2 clamped to [0,1], with
/// r_ij the sample correlations and Var(r_ij) = T/(T-1)^3 sum_t (w_tij - wbar)^2
/// where w_tij are products of standardized residuals. A zero denominator
/// (no evidence of correlation) yields full shrinkage, lambda = 1.
inline double estimate_shrinkage_intensity(const Eigen::MatrixXd& residuals) {
  const auto T_r = residuals.rows();
  const auto n = residuals.cols();
  if (T_r < 3) throw input_error("shrinkage estimation needs at least 3 rows");

  Eigen::MatrixXd Z = residuals;
  Z.rowwise() -= residuals.colwise().mean();
  for (Eigen::Index j = 0; j < n; ++j) {
    double sd = std::sqrt(Z.col(j).squaredNorm() / (T_r - 1));
    if (sd == 0.0)
      throw input_error("zero-variance residual column " + std::to_string(j) +
                        " (apply the variance floor first)");
    Z.col(j) /= sd;
  }

  const double Td = static_cast<double>(T_r);
  const double var_scale = Td / ((Td - 1.0) * (Td - 1.0) * (Td - 1.0));
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double wbar = 0.0;
      for (Eigen::Index t = 0; t < T_r; ++t) wbar += Z(t, i) * Z(t, j);
      wbar /= Td;
      double ss = 0.0;
      for (Eigen::Index t = 0; t < T_r; ++t) {
        double d = Z(t, i) * Z(t, j) - wbar;
        ss += d * d;
      }
      double r = Td / (Td - 1.0) * wbar;
      num += var_scale * ss;
      den += r * r;
    }
  }
  if (den <= 0.0) return 1.0;
  return std::clamp(num / den, 0.0, 1.0);
}

namespace detail {

inline Eigen::VectorXd floor_diagonal(Eigen::VectorXd d, double rel_floor) {
  double top = d.maxCoeff();
  if (top <= 0.0) top = 1.0;  // all-zero residuals; floor against unit scale
  const double floor_val = rel_floor * top;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) < floor_val) d(i) = floor_val;
  return d;
}

}  // namespace detail

/// Builds the reconciliation weight matrix.
///   ols:      identity (the scale drops out of the projection).
///   wls:      floored diagonal of the one-step residual covariance.
///   mint_shr: lambda * W_D + (1 - lambda) * W_1, floor applied to the
///             diagonal first, lambda estimated unless overridden.
inline CovarianceEstimate make_weight_matrix(const Eigen::MatrixXd& residuals,
                                             const CovarianceSpec& spec,
                                             int n_if_ols = 0) {
  CovarianceEstimate est;
  est.method = spec.method;

  if (spec.method == WeightMethod::ols) {
    const int n = n_if_ols > 0 ? n_if_ols : static_cast<int>(residuals.cols());
    if (n < 1) throw input_error("ols weight matrix needs the system size");
    est.W = Eigen::MatrixXd::Identity(n, n);
    est.diag_W1 = Eigen::VectorXd::Ones(n);
    return est;
  }

  if (spec.method == WeightMethod::mint_shr &&
      residuals.rows() < residuals.cols() / 2)
    std::cerr << "warning: only " << residuals.rows()
              << " residual rows for " << residuals.cols()
              << " series; shrinkage estimate may be unstable\n";

  Eigen::MatrixXd W1 = sample_covariance(residuals, spec.center);
  Eigen::VectorXd d = detail::floor_diagonal(W1.diagonal(), spec.variance_floor);
  W1.diagonal() = d;
  est.diag_W1 = d;

  if (spec.method == WeightMethod::wls) {
    est.W = d.asDiagonal();
    return est;
  }

  // mint_shr
  double lambda;
  if (spec.lambda_override) {
    lambda = *spec.lambda_override;
    if (lambda < 0.0 || lambda > 1.0)
      throw input_error("lambda override must be in [0,1]");
  } else {
    // Constant columns correlate with nothing; estimate lambda on the
    // positive-variance columns only, which contributes the same sums.
    Eigen::VectorXd means = residuals.colwise().mean();
    std::vector<Eigen::Index> live;
    for (Eigen::Index j = 0; j < residuals.cols(); ++j)
      if ((residuals.col(j).array() - means(j)).square().sum() > 0.0)
        live.push_back(j);
    if (live.size() < 2) {
      lambda = 1.0;
    } else {
      Eigen::MatrixXd sub(residuals.rows(), live.size());
      for (std::size_t k = 0; k < live.size(); ++k)
        sub.col(k) = residuals.col(live[k]);
      lambda = estimate_shrinkage_intensity(sub);
    }
  }
  est.lambda = lambda;

  est.W = (1.0 - lambda) * W1;
  est.W.diagonal() = d;  // lambda*d + (1-lambda)*d == d, kept exact

  Eigen::LLT<Eigen::MatrixXd> llt(est.W);
  if (llt.info() != Eigen::Success)
    throw numeric_error("shrinkage weight matrix is not positive definite");
  return est;
}

}  // namespace coherent
