#pragma once

// Correlated-groups fixture. Each informative group shares one latent factor
// f_g ~ N(0,1); member k of the group is
//
//     x = sqrt(rho) * f_g + sqrt(1 - rho) * e_k,   e_k ~ N(0,1)
//
// so the within-group population correlation is rho. With exact_duplicates the
// members are bit-identical copies of a single draw. Labels are
// sign(sum_g w_g f_g + noise_std * eps) with w_g = +1, -1, +1, ...; with no
// informative groups the label is sign(eps) and independent of the features.
//
// Draw order (fixed, part of the reproducibility contract): for each sample i,
// the group latents, then the group members, then the noise features, then eps.

#include <cmath>
#include <cstdint>

#include "enreg/errors.hpp"
#include "enreg/rng.hpp"
#include "enreg/types.hpp"

namespace enreg {

struct SyntheticSpec {
  std::size_t n_samples = 200;
  std::size_t n_informative_groups = 3;
  std::size_t group_size = 2;
  double within_group_correlation = 0.97;
  double noise_std = 0.1;
  std::size_t n_noise_features = 20;
  std::uint64_t seed = 1;
  bool exact_duplicates = false;

  std::size_t n_features() const { return n_informative_groups * group_size + n_noise_features; }

  void validate() const {
    if (group_size < 1) throw ConfigError("group_size must be >= 1");
    if (!(within_group_correlation >= 0.0 && within_group_correlation < 1.0))
      throw ConfigError("within_group_correlation must lie in [0, 1)");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (n_features() < 1) throw ConfigError("synthetic spec yields zero features");
  }
};

struct SyntheticDataset {
  FeatureMatrix features;
  LabelVector labels;
  IndexSet ground_truth_support;
};

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Xoshiro256 rng(spec.seed);
  const auto n = static_cast<Index>(spec.n_samples);
  const auto m = static_cast<Index>(spec.n_features());
  const double shared = std::sqrt(spec.within_group_correlation);
  const double own = std::sqrt(1.0 - spec.within_group_correlation);

  Eigen::MatrixXd X(n, m);
  Eigen::VectorXd y(n);
  std::vector<double> latent(spec.n_informative_groups);
  for (Index i = 0; i < n; ++i) {
    double score = 0.0;
    for (std::size_t g = 0; g < spec.n_informative_groups; ++g) {
      latent[g] = rng.normal();
      score += (g % 2 == 0 ? 1.0 : -1.0) * latent[g];
    }
    Index col = 0;
    for (std::size_t g = 0; g < spec.n_informative_groups; ++g) {
      const double first = shared * latent[g] + own * rng.normal();
      for (std::size_t k = 0; k < spec.group_size; ++k)
        X(i, col++) = (spec.exact_duplicates || k == 0) ? first : shared * latent[g] + own * rng.normal();
    }
    for (std::size_t k = 0; k < spec.n_noise_features; ++k) X(i, col++) = rng.normal();
    const double eps = rng.normal();
    score = spec.n_informative_groups == 0 ? eps : score + spec.noise_std * eps;
    y(i) = score >= 0.0 ? 1.0 : -1.0;
  }

  IndexSet truth(spec.n_informative_groups * spec.group_size);
  for (std::size_t j = 0; j < truth.size(); ++j) truth[j] = j;
  return {FeatureMatrix(std::move(X)), LabelVector(std::move(y)), std::move(truth)};
}

}  // namespace enreg
