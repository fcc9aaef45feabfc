#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <numeric>

#include "enreg/elm.hpp"
#include "enreg/rng.hpp"

using namespace enreg;

namespace {

struct Blobs {
  Eigen::MatrixXd X;
  std::vector<int> labels;
};

Blobs two_blobs(Xoshiro256& rng, Index per_class) {
  Blobs b{Eigen::MatrixXd(2 * per_class, 2), {}};
  for (Index i = 0; i < 2 * per_class; ++i) {
    const int c = static_cast<int>(i % 2);
    const double center = c == 0 ? -2.0 : 2.0;
    b.X(i, 0) = center + rng.normal();
    b.X(i, 1) = center + rng.normal();
    b.labels.push_back(c);
  }
  return b;
}

double accuracy_of(const std::vector<ClassScores>& s, const std::vector<int>& truth) {
  int hit = 0;
  for (std::size_t i = 0; i < s.size(); ++i) hit += s[i].predicted_class == truth[i];
  return static_cast<double>(hit) / static_cast<double>(s.size());
}

}  // namespace

TEST(RbfKernel, BasicValues) {
  const Eigen::Vector2d a(0.3, -1.0);
  EXPECT_EQ(rbf_kernel(a, a, 3.0), 1.0);
  EXPECT_NEAR(rbf_kernel(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 1.0), 0.36787944117144233, 1e-15);
  EXPECT_THROW(rbf_kernel(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3), 1.0), DimensionError);
}

TEST(RbfKernel, Symmetric) {
  Xoshiro256 rng(60);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a(4), b(4);
    for (Index k = 0; k < 4; ++k) a(k) = rng.normal(), b(k) = rng.normal();
    const double g = rng.uniform(0.01, 3.0);
    EXPECT_EQ(rbf_kernel(a, b, g), rbf_kernel(b, a, g));
  }
}

TEST(ElmTrain, XorTrainingAccuracy) {
  Eigen::MatrixXd X(4, 2);
  X << 0, 0, 0, 1, 1, 0, 1, 1;
  const std::vector<int> y{0, 1, 1, 0};
  const auto model = elm_train(FeatureMatrix(X), y, RbfKernel{2.0}, 1000.0);
  EXPECT_EQ(predicted_classes(elm_predict(model, FeatureMatrix(X))), y);

  // direct 4x4 solve as an independent check of the weights
  Eigen::Matrix4d A;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) A(i, j) = std::exp(-2.0 * (X.row(i) - X.row(j)).squaredNorm());
  A.diagonal().array() += 1e-3;
  Eigen::Matrix<double, 4, 2> T;
  T << 1, 0, 0, 1, 0, 1, 1, 0;
  const Eigen::MatrixXd W = A.colPivHouseholderQr().solve(T);
  EXPECT_LE((W - model.output_weights).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ElmTrain, TwoPointsNearInterpolation) {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 1, 1;
  const std::vector<int> y{0, 1};
  const auto model = elm_train(FeatureMatrix(X), y, RbfKernel{1.0}, 1e6);
  const auto s = elm_predict(model, FeatureMatrix(X));
  EXPECT_EQ(predicted_classes(s), y);
  EXPECT_GT(s[0].scores(0), s[0].scores(1));
  EXPECT_GT(s[1].scores(1), s[1].scores(0));
  EXPECT_NEAR(s[0].scores(0), 1.0, 1e-5);
}

TEST(ElmTrain, SingleClassPredictsThatClass) {
  Xoshiro256 rng(61);
  Eigen::MatrixXd X(8, 3);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  const std::vector<int> y(8, 0);
  const auto model = elm_train(FeatureMatrix(X), y, RbfKernel{0.5});
  EXPECT_EQ(model.n_classes(), 1);
  Eigen::MatrixXd Q(5, 3);
  for (Index i = 0; i < Q.size(); ++i) Q.data()[i] = 3.0 * rng.normal();
  for (const auto& s : elm_predict(model, FeatureMatrix(Q))) EXPECT_EQ(s.predicted_class, 0);
}

TEST(ElmTrain, ConflictingDuplicatesAllowed) {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 0.0, 1.0;
  EXPECT_NO_THROW(elm_train(FeatureMatrix(X), std::vector<int>{0, 1, 1}, RbfKernel{1.0}));
}

TEST(ElmTrain, InvalidArguments) {
  const FeatureMatrix X(Eigen::MatrixXd::Identity(2, 2));
  const std::vector<int> y{0, 1};
  EXPECT_THROW(elm_train(X, y, RbfKernel{0.0}), ConfigError);
  EXPECT_THROW(elm_train(X, y, RbfKernel{1.0}, -1.0), ConfigError);
  EXPECT_THROW(elm_train(X, std::vector<int>{0}, RbfKernel{1.0}), DimensionError);
  EXPECT_THROW(elm_train(X, std::vector<int>{0, -1}, RbfKernel{1.0}), DataError);
}

TEST(ElmPredict, TwoBlobsGeneralize) {
  Xoshiro256 rng(62);
  const auto train = two_blobs(rng, 50);
  const auto test = two_blobs(rng, 50);
  const double gamma = median_heuristic_gamma(train.X);
  const auto model = elm_train(FeatureMatrix(train.X), train.labels, RbfKernel{gamma});
  EXPECT_GE(accuracy_of(elm_predict(model, FeatureMatrix(test.X)), test.labels), 0.95);
}

TEST(ElmPredict, TrainingPermutationInvariance) {
  Xoshiro256 rng(63);
  const auto train = two_blobs(rng, 30);
  const auto test = two_blobs(rng, 20);
  const auto model = elm_train(FeatureMatrix(train.X), train.labels, RbfKernel{0.3});
  const auto perm = rng.permutation(60);
  Eigen::MatrixXd Xp(60, 2);
  std::vector<int> yp(60);
  for (Index i = 0; i < 60; ++i) {
    Xp.row(i) = train.X.row(static_cast<Index>(perm[i]));
    yp[i] = train.labels[perm[i]];
  }
  const auto permuted = elm_train(FeatureMatrix(Xp), yp, RbfKernel{0.3});
  for (Index i = 0; i < 60; ++i)
    EXPECT_LE((permuted.output_weights.row(i) - model.output_weights.row(static_cast<Index>(perm[i])))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
  const auto a = elm_predict(model, FeatureMatrix(test.X));
  const auto b = elm_predict(permuted, FeatureMatrix(test.X));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE((a[i].scores - b[i].scores).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(a[i].predicted_class, b[i].predicted_class);
  }
}

TEST(ElmPredict, WidthMismatch) {
  const auto model = elm_train(FeatureMatrix(Eigen::MatrixXd::Identity(2, 2)), std::vector<int>{0, 1}, RbfKernel{1.0});
  EXPECT_THROW(elm_predict(model, FeatureMatrix(Eigen::MatrixXd::Ones(1, 3))), DimensionError);
}

TEST(ElmPredict, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax_lowest(Eigen::Vector3d(0.5, 0.5, 0.1)), 0);
  EXPECT_EQ(argmax_lowest(Eigen::Vector3d(0.1, 0.7, 0.7)), 1);
}

TEST(ElmProperties, RegularizedGramPositiveDefinite) {
  Xoshiro256 rng(64);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd X(15, 3);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    if (trial % 3 == 0) X.row(1) = X.row(0);
    const double c = std::exp(rng.uniform(0.0, 10.0));
    Eigen::MatrixXd A = rbf_gram(X, X, rng.uniform(0.1, 2.0));
    EXPECT_EQ(A, A.transpose());
    A.diagonal().array() += 1.0 / c;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(ElmProperties, LargeRidgeFitsDistinctPoints) {
  Xoshiro256 rng(65);
  Eigen::MatrixXd X(30, 2);
  std::vector<int> y(30);
  for (Index i = 0; i < 30; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    y[i] = static_cast<int>(rng.below(3));
  }
  double previous = 0.0;
  for (double c : {1.0, 1e2, 1e4, 1e8}) {
    const auto m = elm_train(FeatureMatrix(X), y, RbfKernel{1.0}, c);
    const double acc = accuracy_of(elm_predict(m, FeatureMatrix(X)), y);
    EXPECT_GE(acc, previous - 1.0 / 30);
    previous = acc;
  }
  EXPECT_EQ(previous, 1.0);
}

TEST(MedianHeuristic, Values) {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 3;  // squared distances 1, 9, 4 -> median 4
  EXPECT_DOUBLE_EQ(median_heuristic_gamma(X), 0.25);
  Eigen::MatrixXd Y(4, 1);
  Y << 0, 1, 2, 4;  // 1,4,16,1,9,4 -> median (4+4)/2
  EXPECT_DOUBLE_EQ(median_heuristic_gamma(Y), 0.25);
  EXPECT_EQ(median_heuristic_gamma(Eigen::MatrixXd::Ones(4, 2)), 1.0);
}

TEST(ElmPersistence, TextRoundTrip) {
  Xoshiro256 rng(66);
  const auto train = two_blobs(rng, 5);
  const auto model = elm_train(FeatureMatrix(train.X), train.labels, RbfKernel{0.7}, 50.0);
  const std::string text = elm_to_blocks(model).str();
  EXPECT_NE(text.find("kernel: rbf gamma="), std::string::npos);
  EXPECT_NE(text.find("training_inputs: 10 2\n"), std::string::npos);
  std::istringstream in(text);
  const auto back = elm_from_blocks(TextBlocks::read(in));
  EXPECT_EQ(back.kernel.gamma, 0.7);
  EXPECT_EQ(back.ridge_c, 50.0);
  EXPECT_EQ(back.output_weights, model.output_weights);
  EXPECT_EQ(back.training_inputs, model.training_inputs);
}
