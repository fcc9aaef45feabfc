#pragma once

// Principal component analysis through a thin SVD of the centered data.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/SVD>

#include "enreg/errors.hpp"
#include "enreg/io.hpp"
#include "enreg/types.hpp"

namespace enreg {

struct ComponentCount {
  Index k;
};

struct VarianceFraction {
  double fraction;  // in (0, 1]
};

using PcaRetain = std::variant<ComponentCount, VarianceFraction>;

inline constexpr double kDefaultPcaVarianceFraction = 0.95;

struct PcaModel {
  Eigen::VectorXd mean;                // M
  Eigen::MatrixXd components;          // K x M, orthonormal rows
  Eigen::VectorXd explained_variance;  // K, non-increasing
  std::vector<std::string> warnings;

  Index k() const noexcept { return components.rows(); }
  Index n_features() const noexcept { return mean.size(); }
};

namespace detail {

// Flip each axis so its largest-magnitude entry is positive (first one on ties).
inline void canonical_signs(Eigen::MatrixXd& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    Index arg = 0;
    double best = -1.0;
    for (Index c = 0; c < rows.cols(); ++c) {
      if (std::abs(rows(r, c)) > best) {
        best = std::abs(rows(r, c));
        arg = c;
      }
    }
    if (rows(r, arg) < 0) rows.row(r) *= -1.0;
  }
}

}  // namespace detail

inline PcaModel pca_fit(const FeatureMatrix& X, const PcaRetain& retain = VarianceFraction{kDefaultPcaVarianceFraction}) {
  const Index n = X.n_samples();
  const Index m = X.n_features();
  if (n < 2) throw InsufficientDataError("PCA needs at least 2 samples, got " + std::to_string(n));

  PcaModel model;
  model.mean = X.values().colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.values().rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const Eigen::VectorXd eig = s.array().square() / static_cast<double>(n - 1);

  const Index k_max = std::min(n - 1, m);
  const double rank_tol = static_cast<double>(std::max(n, m)) * std::numeric_limits<double>::epsilon() *
                          (s.size() ? s(0) : 0.0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > rank_tol) ++rank;

  Index k = 0;
  if (const auto* count = std::get_if<ComponentCount>(&retain)) {
    if (count->k < 1) throw ConfigError("PCA component count must be >= 1");
    k = count->k;
    if (k > k_max) {
      model.warnings.push_back("requested " + std::to_string(k) + " components, clamped to " + std::to_string(k_max));
      k = k_max;
    }
  } else {
    const double f = std::get<VarianceFraction>(retain).fraction;
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("PCA variance fraction must lie in (0, 1]");
    const double total = eig.head(rank).sum();
    double cum = 0.0;
    while (k < rank && cum < f * total - 1e-12 * total) cum += eig(k++);
    k = std::min(k, k_max);
  }
  if (k == 0) {
    model.warnings.push_back("centered data has rank 0; keeping one zero-variance component");
    k = 1;
  }

  model.components = svd.matrixV().leftCols(k).transpose();
  detail::canonical_signs(model.components);
  model.explained_variance = eig.head(k);
  return model;
}

inline FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& X) {
  if (X.n_features() != model.n_features())
    throw DimensionError("PCA model expects " + std::to_string(model.n_features()) + " columns, got " +
                         std::to_string(X.n_features()));
  return FeatureMatrix((X.values().rowwise() - model.mean.transpose()) * model.components.transpose());
}

inline FeatureMatrix pca_inverse(const PcaModel& model, const Eigen::MatrixXd& Z) {
  if (Z.cols() != model.k())
    throw DimensionError("PCA model has " + std::to_string(model.k()) + " components, got " +
                         std::to_string(Z.cols()) + " columns");
  return FeatureMatrix((Z * model.components).rowwise() + model.mean.transpose());
}

inline TextBlocks pca_to_blocks(const PcaModel& model) {
  TextBlocks b;
  b.add_vector("mean", model.mean);
  b.add_matrix("components", model.components);
  b.add_vector("explained_variance", model.explained_variance);
  return b;
}

inline PcaModel pca_from_blocks(const TextBlocks& b) {
  PcaModel model;
  model.mean = b.get("mean").vector();
  model.components = b.get("components").data;
  model.explained_variance = b.get("explained_variance").vector();
  if (model.components.cols() != model.mean.size() || model.explained_variance.size() != model.components.rows())
    throw FormatError("inconsistent PCA model dimensions");
  return model;
}

}  // namespace enreg
