#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "enreg/io.hpp"
#include "enreg/rng.hpp"
#include "enreg/standardize.hpp"
#include "enreg/synthetic.hpp"

using namespace enreg;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "enreg_core_data";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Xoshiro256 a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  EXPECT_NE(Xoshiro256(42)(), c());
}

TEST(Rng, UniformAndBelowStayInRange) {
  Xoshiro256 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
  }
}

TEST(Rng, NormalMomentsAreSane) {
  Xoshiro256 rng(3);
  double s = 0, ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(FeatureCsv, LabelColumnIsSplitOut) {
  std::istringstream in("1,2,3,0\n4,5,6,1\n7,8,9,0\n");
  const auto data = load_feature_csv(in, {.label_column = 3});
  EXPECT_EQ(data.features.n_samples(), 3);
  EXPECT_EQ(data.features.n_features(), 3);
  ASSERT_TRUE(data.labels.has_value());
  EXPECT_EQ(data.labels->size(), 3);
  EXPECT_EQ((*data.labels)(1), 1.0);
  EXPECT_EQ(data.features(2, 2), 9.0);
}

TEST(FeatureCsv, IdentityReadBack) {
  std::istringstream in("1,2\n3,4");
  const auto data = load_feature_csv(in);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 2, 3, 4;
  EXPECT_EQ(data.features.values(), expected);
  EXPECT_FALSE(data.labels.has_value());
}

TEST(FeatureCsv, HeaderRowSkipped) {
  std::istringstream in("a,b\n1,2\n");
  const auto data = load_feature_csv(in, {.skip_header = true});
  EXPECT_EQ(data.features.n_samples(), 1);
}

TEST(FeatureCsv, RaggedRowReportsRowNumber) {
  std::istringstream in("1,2\n3,4,5\n");
  try {
    load_feature_csv(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(FeatureCsv, NonNumericCellReportsRowAndColumn) {
  std::istringstream in("1,2\n3,x\n");
  try {
    load_feature_csv(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 2u);
  }
}

TEST(FeatureCsv, EmptyFileIsEmptyInput) {
  std::istringstream in("");
  EXPECT_THROW(load_feature_csv(in), EmptyInputError);
}

TEST(FeatureCsv, RandomMatrixRoundTrip) {
  Xoshiro256 rng(11);
  Eigen::MatrixXd X(10, 5);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal() * std::pow(10.0, rng.uniform(-5, 5));
  const auto path = temp_path("roundtrip.csv");
  write_feature_csv(path.string(), X);
  const auto back = load_feature_csv(path.string());
  EXPECT_LE((back.features.values() - X).cwiseAbs().maxCoeff(), 1e-12 * X.cwiseAbs().maxCoeff());
}

TEST(Raw3d, IndexArithmetic) {
  std::vector<float> v(8);
  for (int i = 0; i < 8; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const auto vol = decode_raw3d(encode_raw3d(Volume3D({2, 2, 2}, v)));
  EXPECT_EQ(vol.at(1, 1, 1), 7.0f);
  EXPECT_EQ(vol.at(1, 0, 0), 1.0f);
  EXPECT_EQ(vol.at(0, 1, 0), 2.0f);
  EXPECT_EQ(vol.at(0, 0, 1), 4.0f);
}

TEST(Raw3d, SingleVoxel) {
  const auto vol = decode_raw3d(encode_raw3d(Volume3D({1, 1, 1}, std::vector<float>{3.5f})));
  EXPECT_EQ(vol.voxels().size(), 1u);
  EXPECT_EQ(vol.at(0, 0, 0), 3.5f);
}

TEST(Raw3d, HeaderLayoutIsLittleEndian) {
  const auto bytes = encode_raw3d(Volume3D({2, 1, 1}, std::vector<float>{1.0f, -2.0f}));
  ASSERT_EQ(bytes.size(), 16u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), "R3D1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 2]), 0x80);
}

TEST(Raw3d, RandomVolumeBitIdenticalThroughFile) {
  Xoshiro256 rng(5);
  std::vector<float> v(512);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  const Volume3D vol({8, 8, 8}, v);
  const auto path = temp_path("vol.r3d");
  save_volume_raw3d(path.string(), vol);
  const auto back = load_volume_raw3d(path.string());
  EXPECT_EQ(back.dims(), vol.dims());
  EXPECT_EQ(std::memcmp(back.voxels().data(), vol.voxels().data(), 512 * sizeof(float)), 0);
}

TEST(Raw3d, BadMagicIsFormatError) {
  EXPECT_THROW(decode_raw3d(std::string("NOPE") + std::string(12, '\0')), FormatError);
}

TEST(Raw3d, TruncatedPayloadReportsByteCounts) {
  auto bytes = encode_raw3d(Volume3D({2, 2, 2}, 1.0f));
  bytes.resize(bytes.size() - 3);
  try {
    decode_raw3d(bytes);
    FAIL() << "expected LengthError";
  } catch (const LengthError& e) {
    EXPECT_EQ(e.expected(), 48u);
    EXPECT_EQ(e.actual(), 45u);
  }
}

TEST(Standardize, SimpleColumn) {
  Eigen::MatrixXd X(3, 1);
  X << 1, 2, 3;
  const auto s = standardize_columns(FeatureMatrix(X));
  EXPECT_NEAR(s.matrix.values().col(0).sum(), 0.0, 1e-15);
  EXPECT_NEAR(s.matrix.values().col(0).squaredNorm(), 3.0, 1e-12);
}

TEST(Standardize, ConstantColumnFlaggedAndZeroed) {
  Eigen::MatrixXd X(3, 2);
  X << 5, 1, 5, 2, 5, 4;
  const auto s = standardize_columns(FeatureMatrix(X));
  EXPECT_TRUE(s.record.degenerate[0]);
  EXPECT_FALSE(s.record.degenerate[1]);
  EXPECT_TRUE(s.matrix.values().col(0).isZero(0.0));
  EXPECT_GT(s.record.column_scales(0), 0.0);
}

TEST(Standardize, RandomMatrixAgainstDirectSummation) {
  Xoshiro256 rng(21);
  Eigen::MatrixXd X(20, 6);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = 3.0 + 2.0 * rng.normal();
  const auto s = standardize_columns(FeatureMatrix(X));
  for (Index j = 0; j < 6; ++j) {
    double sum = 0.0, sq = 0.0;
    for (Index i = 0; i < 20; ++i) {
      sum += s.matrix(i, j);
      sq += s.matrix(i, j) * s.matrix(i, j);
    }
    EXPECT_LT(std::abs(sum / 20.0), 1e-12);
    EXPECT_NEAR(sq, 20.0, 1e-9);
  }
}

TEST(Standardize, IdempotentOnStandardizedInput) {
  Xoshiro256 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = oracle::random_standardized(rng, 15, 4);
    const auto s = standardize_columns(FeatureMatrix(X));
    EXPECT_LE((s.matrix.values() - X).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Standardize, NeedsTwoSamples) {
  EXPECT_THROW(standardize_columns(FeatureMatrix(Eigen::MatrixXd::Ones(1, 3))), InsufficientDataError);
}

TEST(Standardize, ApplyUsesFittedStatistics) {
  Eigen::MatrixXd X(4, 1);
  X << 0, 2, 4, 6;
  const auto s = standardize_columns(FeatureMatrix(X));
  Eigen::MatrixXd Q(1, 1);
  Q << 3;
  EXPECT_NEAR(s.record.apply(Q)(0, 0), 0.0, 1e-15);
  EXPECT_THROW(s.record.apply(Eigen::MatrixXd::Zero(1, 2)), DimensionError);
}

TEST(Synthetic, ColumnCountAndTruth) {
  SyntheticSpec spec{.n_samples = 30, .n_informative_groups = 3, .group_size = 4, .n_noise_features = 5};
  const auto d = generate_synthetic(spec);
  EXPECT_EQ(d.features.n_features(), 17);
  EXPECT_EQ(d.ground_truth_support.size(), 12u);
  EXPECT_TRUE(d.labels.is_two_class());
}

TEST(Synthetic, HighCorrelationGroupsAreCorrelated) {
  SyntheticSpec spec{.n_samples = 500, .n_informative_groups = 2, .group_size = 2,
                     .within_group_correlation = 0.999, .n_noise_features = 3};
  const auto d = generate_synthetic(spec);
  const auto& X = d.features.values();
  EXPECT_GT(oracle::correlation(X.col(0), X.col(1)), 0.99);
  EXPECT_GT(oracle::correlation(X.col(2), X.col(3)), 0.99);
  EXPECT_LT(std::abs(oracle::correlation(X.col(0), X.col(4))), 0.2);
}

TEST(Synthetic, ExactDuplicatesAreIdentical) {
  SyntheticSpec spec{.n_samples = 50, .group_size = 3, .exact_duplicates = true};
  const auto d = generate_synthetic(spec);
  EXPECT_EQ(d.features.values().col(0), d.features.values().col(1));
  EXPECT_EQ(d.features.values().col(0), d.features.values().col(2));
}

// The Bayes rule for the default fixture is the sign of the weighted group sums;
// its accuracy has the closed form 1 - atan(sqrt(v / s)) / pi with s the
// variance of the posterior score mean and v the remaining variance.
TEST(Synthetic, DefaultFixtureBayesAccuracy) {
  SyntheticSpec spec{.n_samples = 40000};
  const auto d = generate_synthetic(spec);
  const auto& X = d.features.values();
  std::size_t hit = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    const double s = (X(i, 0) + X(i, 1)) - (X(i, 2) + X(i, 3)) + (X(i, 4) + X(i, 5));
    hit += (s >= 0 ? 1.0 : -1.0) == d.labels(i);
  }
  const double rho = spec.within_group_correlation;
  const double posterior_var = (1 - rho) / (1 + rho);
  const double v = 3 * posterior_var + spec.noise_std * spec.noise_std;
  const double analytic = 1 - std::atan(std::sqrt(v / (3 - 3 * posterior_var))) / std::acos(-1.0);
  const double empirical = double(hit) / double(X.rows());
  EXPECT_GE(analytic, 0.95);
  EXPECT_NEAR(empirical, analytic, 0.005);
}

TEST(Synthetic, NullModelLabelsAreBalancedCoinFlips) {
  SyntheticSpec spec{.n_samples = 4000, .n_informative_groups = 0, .n_noise_features = 5};
  const auto d = generate_synthetic(spec);
  const double positive = (d.labels.values().array() > 0).cast<double>().mean();
  EXPECT_NEAR(positive, 0.5, 0.03);
  // labels carry no linear signal
  for (Index j = 0; j < 5; ++j)
    EXPECT_LT(std::abs(oracle::correlation(d.features.values().col(j), d.labels.values())), 0.06);
}

TEST(Synthetic, DeterministicGivenSeed) {
  SyntheticSpec spec{.seed = 99};
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(std::memcmp(a.features.values().data(), b.features.values().data(),
                        sizeof(double) * static_cast<std::size_t>(a.features.values().size())), 0);
  EXPECT_EQ(a.labels.values(), b.labels.values());
  spec.seed = 100;
  EXPECT_NE(generate_synthetic(spec).features.values(), a.features.values());
}

TEST(Synthetic, SpecErrors) {
  EXPECT_THROW(generate_synthetic({.group_size = 0}), ConfigError);
  EXPECT_THROW(generate_synthetic({.within_group_correlation = 1.0}), ConfigError);
  EXPECT_THROW(generate_synthetic({.within_group_correlation = -0.1}), ConfigError);
}

TEST(TextBlocks, RoundTripPreservesDoublesExactly) {
  Xoshiro256 rng(2);
  TextBlocks b;
  Eigen::MatrixXd M(3, 4);
  for (Index i = 0; i < M.size(); ++i) M.data()[i] = rng.normal() * 1e-7;
  Eigen::VectorXd v = oracle::random_vector(rng, 5);
  b.add_attribute("kernel", "rbf gamma=0.5 ridge_c=100");
  b.add_matrix("weights", M);
  b.add_vector("bias", v);
  std::istringstream in(b.str());
  const auto back = TextBlocks::read(in);
  EXPECT_EQ(back.get("weights").data, M);
  EXPECT_EQ(back.get("bias").vector(), v);
  EXPECT_EQ(back.get("kernel").attribute, "rbf gamma=0.5 ridge_c=100");
}

TEST(TextBlocks, CoefficientsHaveSeventeenDigits) {
  Coefficients c{Eigen::Vector3d(0.1, -2.0, 0.0)};
  const auto text = coefficients_to_text(c);
  EXPECT_EQ(text.substr(0, 16), "coefficients: 3\n");
  EXPECT_NE(text.find("1.0000000000000001e-01"), std::string::npos);
  std::istringstream in(text);
  EXPECT_EQ(coefficients_from_text(in).values, c.values);
}
