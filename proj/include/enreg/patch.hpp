#pragma once

// 2.5D patches: three orthogonal square slices through one voxel, stacked as
// a 3-channel image, and whole-volume feature vectors built from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "enreg/cnn.hpp"
#include "enreg/errors.hpp"
#include "enreg/rng.hpp"
#include "enreg/types.hpp"

namespace enreg {

using Voxel = std::array<std::uint32_t, 3>;  // x, y, z

inline constexpr int kPatchSize = 32;
inline constexpr std::size_t kDefaultCenterCount = 151;

enum class Plane { transverse = 0, coronal = 1, sagittal = 2 };

struct Patch2_5D {
  Eigen::MatrixXd image;  // 3 x (size*size); channels transverse, coronal, sagittal
  Voxel center{};
  int size = kPatchSize;

  /// Plane as a size x size matrix, element (row, col).
  Eigen::MatrixXd plane(Plane p) const {
    Eigen::MatrixXd m(size, size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) m(r, c) = image(static_cast<Index>(p), r * size + c);
    return m;
  }
};

/// Transverse: fixed z, rows y, cols x. Coronal: fixed y, rows z, cols x.
/// Sagittal: fixed x, rows z, cols y. Window offsets run -size/2 .. size/2-1
/// around the center and clamp to the volume edge.
inline Patch2_5D extract_patch_2_5d(const Volume3D& vol, const Voxel& center, int size = kPatchSize) {
  if (size < 1) throw ConfigError("patch size must be positive");
  if (!vol.contains(center[0], center[1], center[2]))
    throw BoundsError("patch center (" + std::to_string(center[0]) + "," + std::to_string(center[1]) + "," +
                      std::to_string(center[2]) + ") lies outside the volume");
  const auto& d = vol.dims();
  auto clamp = [](long v, std::uint32_t extent) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(extent) - 1));
  };
  const long half = size / 2;
  const long cx = center[0], cy = center[1], cz = center[2];
  Patch2_5D p{Eigen::MatrixXd(3, static_cast<Index>(size) * size), center, size};
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const Index px = r * size + c;
      const long dr = r - half, dc = c - half;
      p.image(0, px) = vol.at(clamp(cx + dc, d[0]), clamp(cy + dr, d[1]), static_cast<std::size_t>(cz));
      p.image(1, px) = vol.at(clamp(cx + dc, d[0]), static_cast<std::size_t>(cy), clamp(cz + dr, d[2]));
      p.image(2, px) = vol.at(static_cast<std::size_t>(cx), clamp(cy + dc, d[1]), clamp(cz + dr, d[2]));
    }
  return p;
}

/// n centers spread over a g x g x g lattice (g = ceil(cbrt(n))) at cell
/// midpoints, taking lattice points floor(k * g^3 / n) in x-fastest order.
inline std::vector<Voxel> lattice_centers(const Volume3D::Dims& dims, std::size_t n = kDefaultCenterCount) {
  if (n == 0) throw ConfigError("center count must be positive");
  if (Volume3D::voxel_count(dims) == 0) throw EmptyInputError("volume has no voxels");
  std::size_t g = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n))));
  while (g * g * g < n) ++g;
  while (g > 1 && (g - 1) * (g - 1) * (g - 1) >= n) --g;
  const std::size_t cells = g * g * g;
  auto coord = [g](std::size_t i, std::uint32_t extent) {
    const auto v = static_cast<std::uint32_t>((static_cast<double>(i) + 0.5) * extent / static_cast<double>(g));
    return std::min(v, extent - 1);
  };
  std::vector<Voxel> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = k * cells / n;
    out.push_back({coord(idx % g, dims[0]), coord((idx / g) % g, dims[1]), coord(idx / (g * g), dims[2])});
  }
  return out;
}

/// Concatenated per-patch CNN features in center order. With
/// require_default_count the center list must have exactly 151 entries.
inline Eigen::VectorXd extract_image_features(const CnnNetwork& net, const Volume3D& vol,
                                              std::span<const Voxel> centers, bool require_default_count = true) {
  if (require_default_count && centers.size() != kDefaultCenterCount)
    throw CountError("expected " + std::to_string(kDefaultCenterCount) + " patch centers, got " +
                     std::to_string(centers.size()));
  if (centers.empty()) throw CountError("no patch centers given");
  if (net.arch.in_channels != 3) throw ConfigError("2.5D patches need a 3-channel network");
  const Index len = net.arch.feature_length();
  Eigen::VectorXd out(len * static_cast<Index>(centers.size()));
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const auto patch = extract_patch_2_5d(vol, centers[i], net.arch.input_size);
    auto feature = cnn_forward(net, patch.image).feature;
    if (!feature.allFinite()) throw NumericalError("CNN features overflowed at patch " + std::to_string(i));
    out.segment(static_cast<Index>(i) * len, len) = feature;
  }
  return out;
}

/// Feature matrix with one row per volume.
inline FeatureMatrix extract_feature_matrix(const CnnNetwork& net, const std::vector<Volume3D>& volumes,
                                            std::span<const Voxel> centers, bool require_default_count = true) {
  if (volumes.empty()) throw EmptyInputError("no volumes given");
  Eigen::MatrixXd X(static_cast<Index>(volumes.size()),
                    net.arch.feature_length() * static_cast<Index>(centers.size()));
  for (std::size_t i = 0; i < volumes.size(); ++i)
    X.row(static_cast<Index>(i)) = extract_image_features(net, volumes[i], centers, require_default_count).transpose();
  return FeatureMatrix(std::move(X));
}

struct BlobPatchSet {
  std::vector<Eigen::MatrixXd> images;
  std::vector<int> labels;  // 1 bright blob, 0 dark blob
};

/// Noise images with one Gaussian blob of amplitude +1 (label 1) or -1 (label 0)
/// near the center, the same blob in every channel. Classes alternate.
inline BlobPatchSet synthetic_blob_patches(std::size_t n, int size, int channels, std::uint64_t seed,
                                           double noise_std = 0.5) {
  Xoshiro256 rng(seed);
  BlobPatchSet set;
  const double sigma = size / 8.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double amp = label == 1 ? 1.0 : -1.0;
    const double mx = size / 2.0 + rng.uniform(-size / 8.0, size / 8.0);
    const double my = size / 2.0 + rng.uniform(-size / 8.0, size / 8.0);
    Eigen::MatrixXd img(channels, static_cast<Index>(size) * size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double bump = amp * std::exp(-((x - mx) * (x - mx) + (y - my) * (y - my)) / (2 * sigma * sigma));
        for (int c = 0; c < channels; ++c) img(c, y * size + x) = bump + noise_std * rng.normal();
      }
    set.images.push_back(std::move(img));
    set.labels.push_back(label);
  }
  return set;
}

/// Noise volume with Gaussian blobs at the given centers; amplitude sign set by label.
inline Volume3D synthetic_blob_volume(const Volume3D::Dims& dims, std::span<const Voxel> blob_centers, int label,
                                      std::uint64_t seed, double sigma = 4.0, double noise_std = 0.3) {
  Xoshiro256 rng(seed);
  Volume3D vol(dims, 0.0f);
  const double amp = label == 1 ? 1.0 : -1.0;
  for (std::uint32_t z = 0; z < dims[2]; ++z)
    for (std::uint32_t y = 0; y < dims[1]; ++y)
      for (std::uint32_t x = 0; x < dims[0]; ++x) {
        double v = noise_std * rng.normal();
        for (const auto& c : blob_centers) {
          const double dx = x - double(c[0]), dy = y - double(c[1]), dz = z - double(c[2]);
          v += amp * std::exp(-(dx * dx + dy * dy + dz * dz) / (2 * sigma * sigma));
        }
        vol.set(x, y, z, static_cast<float>(v));
      }
  return vol;
}

}  // namespace enreg
