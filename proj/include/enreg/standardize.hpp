#pragma once

// Column standardization to mean 0 and squared norm N. Under this convention
// the coordinate-descent statistic x_j'r/N + beta_j is an exact coordinate
// minimizer, which is what the solvers rely on.

#include <cmath>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/types.hpp"

namespace enreg {

struct StandardizationRecord {
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_scales;  // strictly positive; 1 for degenerate columns
  std::vector<bool> degenerate;   // constant columns, mapped to all-zero

  Index n_features() const noexcept { return column_means.size(); }

  std::size_t degenerate_count() const {
    std::size_t c = 0;
    for (bool d : degenerate) c += d;
    return c;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    if (X.cols() != n_features())
      throw DimensionError("standardization fitted on " + std::to_string(n_features()) +
                           " columns, got " + std::to_string(X.cols()));
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
      if (degenerate[static_cast<std::size_t>(j)])
        out.col(j).setZero();
      else
        out.col(j) = (X.col(j).array() - column_means(j)) / column_scales(j);
    }
    return out;
  }

  FeatureMatrix apply(const FeatureMatrix& X) const { return FeatureMatrix(apply(X.values())); }
};

struct Standardized {
  FeatureMatrix matrix;
  StandardizationRecord record;
};

/// A column is constant when its spread is below this fraction of its magnitude.
inline constexpr double kDegenerateRelTol = 1e-12;

inline Standardized standardize_columns(const FeatureMatrix& X) {
  const Index n = X.n_samples();
  const Index m = X.n_features();
  if (n < 2) throw InsufficientDataError("standardization needs at least 2 samples, got " + std::to_string(n));
  StandardizationRecord rec;
  rec.column_means = X.values().colwise().mean().transpose();
  rec.column_scales = Eigen::VectorXd::Ones(m);
  rec.degenerate.assign(static_cast<std::size_t>(m), false);
  for (Index j = 0; j < m; ++j) {
    const auto centered = (X.values().col(j).array() - rec.column_means(j)).eval();
    const double scale = std::sqrt(centered.square().sum() / static_cast<double>(n));
    const double magnitude = std::max(1.0, X.values().col(j).cwiseAbs().maxCoeff());
    if (!(scale > kDegenerateRelTol * magnitude))
      rec.degenerate[static_cast<std::size_t>(j)] = true;
    else
      rec.column_scales(j) = scale;
  }
  return {FeatureMatrix(rec.apply(X.values())), std::move(rec)};
}

/// True if every non-zero column has squared norm N within rel_tol.
inline bool is_standardized(const Eigen::MatrixXd& X, double rel_tol = 1e-6) {
  const double n = static_cast<double>(X.rows());
  for (Index j = 0; j < X.cols(); ++j) {
    const double sq = X.col(j).squaredNorm();
    if (sq == 0.0) continue;
    if (std::abs(sq - n) > rel_tol * n) return false;
  }
  return true;
}

}  // namespace enreg
