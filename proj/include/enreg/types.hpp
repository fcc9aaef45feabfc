#pragma once

// Domain types shared by every stage of the pipeline.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "enreg/errors.hpp"

namespace enreg {

using Index = Eigen::Index;
using IndexSet = std::vector<std::size_t>;  // ascending, no duplicates

/// N samples by M features, all entries finite.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  explicit FeatureMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw EmptyInputError("feature matrix must have at least one row and one column");
    if (!values_.allFinite()) throw DataError("feature matrix contains non-finite entries");
  }

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Index n_samples() const noexcept { return values_.rows(); }
  Index n_features() const noexcept { return values_.cols(); }
  bool empty() const noexcept { return values_.size() == 0; }
  double operator()(Index i, Index j) const { return values_(i, j); }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), values_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = values_.row(checked(rows[r], values_.rows()));
    return FeatureMatrix(std::move(out));
  }

  FeatureMatrix select_cols(std::span<const std::size_t> cols) const {
    Eigen::MatrixXd out(values_.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = values_.col(checked(cols[c], values_.cols()));
    return FeatureMatrix(std::move(out));
  }

 private:
  static Index checked(std::size_t i, Index bound) {
    if (static_cast<Index>(i) >= bound) throw BoundsError("index " + std::to_string(i) + " out of range");
    return static_cast<Index>(i);
  }

  Eigen::MatrixXd values_;
};

/// Real-valued labels; in two-class mode every entry is -1 or +1.
class LabelVector {
 public:
  LabelVector() = default;

  explicit LabelVector(Eigen::VectorXd values) : values_(std::move(values)) {
    if (!values_.allFinite()) throw DataError("label vector contains non-finite entries");
  }

  // Class indices 0..C-1 -> labels. With two classes, class 0 maps to -1 and 1 to +1.
  static LabelVector from_classes(std::span<const int> classes) {
    Eigen::VectorXd v(static_cast<Index>(classes.size()));
    int top = 0;
    for (int c : classes) top = std::max(top, c);
    for (std::size_t i = 0; i < classes.size(); ++i)
      v(static_cast<Index>(i)) = top <= 1 ? (classes[i] == 1 ? 1.0 : -1.0) : classes[i];
    return LabelVector(std::move(v));
  }

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  double operator()(Index i) const { return values_(i); }

  bool is_two_class() const {
    for (Index i = 0; i < values_.size(); ++i)
      if (values_(i) != 1.0 && values_(i) != -1.0) return false;
    return true;
  }

  // Labels -> class indices 0..C-1. {-1,+1} and {0,1} both map to {0,1};
  // otherwise labels must be non-negative integers.
  std::vector<int> class_indices() const {
    std::vector<int> out(static_cast<std::size_t>(values_.size()));
    const bool pm = is_two_class();
    for (Index i = 0; i < values_.size(); ++i) {
      const double v = values_(i);
      if (pm) {
        out[static_cast<std::size_t>(i)] = v > 0 ? 1 : 0;
        continue;
      }
      if (v < 0 || v != std::floor(v))
        throw DataError("labels must be +/-1 or non-negative integer class indices");
      out[static_cast<std::size_t>(i)] = static_cast<int>(v);
    }
    return out;
  }

  LabelVector select(std::span<const std::size_t> rows) const {
    Eigen::VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Index>(rows[r]) >= values_.size()) throw BoundsError("label index out of range");
      out(static_cast<Index>(r)) = values_(static_cast<Index>(rows[r]));
    }
    return LabelVector(std::move(out));
  }

 private:
  Eigen::VectorXd values_;
};

/// Regression weights; the support is derived, so it always equals the nonzero set.
struct Coefficients {
  Eigen::VectorXd values;

  Index size() const noexcept { return values.size(); }

  IndexSet selected_support() const {
    IndexSet s;
    for (Index j = 0; j < values.size(); ++j)
      if (values(j) != 0.0) s.push_back(static_cast<std::size_t>(j));
    return s;
  }
};

/// Scalar volume, x index fastest then y then z.
class Volume3D {
 public:
  using Dims = std::array<std::uint32_t, 3>;

  Volume3D() = default;

  Volume3D(Dims dims, std::vector<float> voxels) : dims_(dims), voxels_(std::move(voxels)) {
    if (voxel_count(dims_) != voxels_.size())
      throw DimensionError("voxel count " + std::to_string(voxels_.size()) +
                           " does not match dims " + std::to_string(voxel_count(dims_)));
    for (float v : voxels_)
      if (!std::isfinite(v)) throw DataError("volume contains non-finite intensities");
  }

  Volume3D(Dims dims, float fill) : Volume3D(dims, std::vector<float>(voxel_count(dims), fill)) {}

  static std::size_t voxel_count(const Dims& d) {
    return static_cast<std::size_t>(d[0]) * d[1] * d[2];
  }

  const Dims& dims() const noexcept { return dims_; }
  const std::vector<float>& voxels() const noexcept { return voxels_; }

  bool contains(long x, long y, long z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < static_cast<long>(dims_[0]) &&
           y < static_cast<long>(dims_[1]) && z < static_cast<long>(dims_[2]);
  }

  std::size_t offset(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_[0] * (y + static_cast<std::size_t>(dims_[1]) * z);
  }

  float at(std::size_t x, std::size_t y, std::size_t z) const { return voxels_[offset(x, y, z)]; }
  void set(std::size_t x, std::size_t y, std::size_t z, float v) { voxels_[offset(x, y, z)] = v; }

 private:
  Dims dims_{0, 0, 0};
  std::vector<float> voxels_;
};

inline void require_same_length(const FeatureMatrix& X, const LabelVector& y) {
  if (X.n_samples() != y.size())
    throw DimensionError("feature matrix has " + std::to_string(X.n_samples()) +
                         " rows but label vector has " + std::to_string(y.size()));
}

}  // namespace enreg
