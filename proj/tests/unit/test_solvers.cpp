#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "enreg/solvers.hpp"

using namespace enreg;

namespace {

struct Instance {
  FeatureMatrix X;
  LabelVector y;
};

Instance random_instance(Xoshiro256& rng, Index n, Index m) {
  return {FeatureMatrix(oracle::random_standardized(rng, n, m)), LabelVector(oracle::random_vector(rng, n))};
}

// N = 4, one column scaled to squared norm 4, y = 2.
Instance one_column() {
  return {FeatureMatrix(Eigen::MatrixXd::Ones(4, 1)), LabelVector(Eigen::VectorXd::Constant(4, 2.0))};
}

Instance duplicated_pair(Xoshiro256& rng, Index n, Index extra) {
  Eigen::MatrixXd base = oracle::random_standardized(rng, n, 1 + extra);
  Eigen::MatrixXd X(n, 2 + extra);
  X.col(0) = base.col(0);
  X.col(1) = base.col(0);
  X.rightCols(extra) = base.rightCols(extra);
  Eigen::VectorXd y = 1.5 * base.col(0) + 0.3 * oracle::random_vector(rng, n);
  return {FeatureMatrix(X), LabelVector(y)};
}

}  // namespace

TEST(SoftThreshold, FormulaValues) {
  EXPECT_EQ(soft_threshold(2.0, 1.0), 1.0);
  EXPECT_EQ(soft_threshold(-0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(soft_threshold(1.0, 1.0), 0.0);
}

TEST(SoftThreshold, IdentityAtZeroThreshold) {
  Xoshiro256 rng(1);
  for (int i = 0; i < 100; ++i) {
    const double z = rng.normal() * 10.0;
    EXPECT_EQ(soft_threshold(z, 0.0), z);
  }
}

TEST(LassoFit, OneDimensionalClosedForm) {
  const auto inst = one_column();
  const auto res = lasso_fit(inst.X, inst.y, {.lambda1 = 1.0});
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.coefficients.values(0), soft_threshold(2.0, 1.0), 1e-12);
}

TEST(LassoFit, ZeroResponseGivesZero) {
  Xoshiro256 rng(2);
  const FeatureMatrix X(oracle::random_standardized(rng, 8, 3));
  const auto res = lasso_fit(X, LabelVector(Eigen::VectorXd::Zero(8)), {.lambda1 = 0.1});
  EXPECT_TRUE(res.coefficients.values.isZero(0.0));
  EXPECT_EQ(res.objective_value, 0.0);
  EXPECT_TRUE(res.converged);
}

// Scan lambda on a dense grid: beta is zero exactly from max|x'y|/N upward.
TEST(LassoFit, ZeroThresholdMatchesDenseLambdaGrid) {
  Xoshiro256 rng(3);
  const auto inst = random_instance(rng, 10, 3);
  const double lmax = lambda1_max(inst.X, inst.y);
  double first_zero = -1.0;
  for (int k = 0; k <= 2000; ++k) {
    const double lam = 2.0 * lmax * k / 2000.0;
    const auto res = lasso_fit(inst.X, inst.y, {.lambda1 = lam, .stop_thr = 1e-12});
    if (res.coefficients.values.isZero(0.0)) {
      first_zero = lam;
      break;
    }
  }
  ASSERT_GT(first_zero, 0.0);
  EXPECT_NEAR(first_zero, lmax, 2.0 * lmax / 2000.0);
  EXPECT_TRUE(lasso_fit(inst.X, inst.y, {.lambda1 = lmax}).coefficients.values.isZero(0.0));
}

TEST(LassoFit, MatchesBruteForceGrid) {
  Xoshiro256 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(9));
    const Index m = 1 + static_cast<Index>(rng.below(3));
    auto inst = random_instance(rng, n, m);
    const double lam = std::max(rng.uniform(0.1, 0.9) * lambda1_max(inst.X, inst.y),
                                inst.y.values().squaredNorm() / (5.9 * static_cast<double>(n)));
    const auto res = lasso_fit(inst.X, inst.y, {.lambda1 = lam, .stop_thr = 1e-12});
    const auto grid = oracle::brute_force_minimum(inst.X.values(), inst.y.values(), lam, 0.0);
    EXPECT_NEAR(res.objective_value, grid.value, 1e-6) << "trial " << trial;
  }
}

TEST(LassoFit, RejectsUnstandardizedDesign) {
  Eigen::MatrixXd X(4, 2);
  X << 1, 2, 3, 4, 5, 6, 7, 8;
  EXPECT_THROW(lasso_fit(FeatureMatrix(X), LabelVector(Eigen::VectorXd::Ones(4)), {.lambda1 = 0.1}),
               ContractError);
}

TEST(LassoFit, DegenerateZeroColumnIsAccepted) {
  Xoshiro256 rng(5);
  Eigen::MatrixXd X = oracle::random_standardized(rng, 10, 3);
  X.col(1).setZero();
  const auto res = lasso_fit(FeatureMatrix(X), LabelVector(oracle::random_vector(rng, 10)), {.lambda1 = 0.05});
  EXPECT_EQ(res.coefficients.values(1), 0.0);
}

TEST(LassoFit, RejectsNonzeroLambda2) {
  const auto inst = one_column();
  EXPECT_THROW(lasso_fit(inst.X, inst.y, {.lambda1 = 1.0, .lambda2 = 0.1}), ConfigError);
}

TEST(LassoFit, SweepCapGivesFlaggedResult) {
  Xoshiro256 rng(6);
  const auto inst = random_instance(rng, 20, 8);
  const auto res = lasso_fit(inst.X, inst.y, {.lambda1 = 0.01, .stop_thr = 1e-14, .max_sweeps = 1});
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.sweeps_used, 1u);
}

TEST(LassoFit, BadConfigRejected) {
  const auto inst = one_column();
  EXPECT_THROW(lasso_fit(inst.X, inst.y, {.lambda1 = -1.0}), ConfigError);
  EXPECT_THROW(lasso_fit(inst.X, inst.y, {.lambda1 = 1.0, .stop_thr = 0.0}), ConfigError);
  EXPECT_THROW(lasso_fit(inst.X, LabelVector(Eigen::VectorXd::Ones(3)), {.lambda1 = 1.0}), DimensionError);
}

TEST(ElasticNetCd, DegeneratesToLasso) {
  Xoshiro256 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(rng, 15, 6);
    const double lam = 0.2 * lambda1_max(inst.X, inst.y);
    const auto a = lasso_fit(inst.X, inst.y, {.lambda1 = lam});
    const auto b = elastic_net_fit_cd(inst.X, inst.y, {.lambda1 = lam, .lambda2 = 0.0});
    EXPECT_LE((a.coefficients.values - b.coefficients.values).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ElasticNetCd, OneDimensionalClosedForm) {
  const auto inst = one_column();
  const auto res = elastic_net_fit_cd(inst.X, inst.y, {.lambda1 = 1.0, .lambda2 = 0.5});
  EXPECT_NEAR(res.coefficients.values(0), 0.5, 1e-12);
}

TEST(ElasticNetCd, IdenticalColumnsShareWeight) {
  Xoshiro256 rng(8);
  const auto inst = duplicated_pair(rng, 20, 0);
  const double lam = 0.1 * lambda1_max(inst.X, inst.y);
  const auto res = elastic_net_fit_cd(inst.X, inst.y, {.lambda1 = lam, .lambda2 = 0.5, .stop_thr = 1e-12});
  EXPECT_NEAR(res.coefficients.values(0), res.coefficients.values(1), 1e-8);
  // brute-force 2-D grid agrees on the optimum
  const auto grid = oracle::brute_force_minimum(inst.X.values(), inst.y.values(), lam, 0.5);
  EXPECT_NEAR(res.objective_value, grid.value, 1e-9);
  EXPECT_NEAR(grid.beta(0), grid.beta(1), 1e-4);
}

TEST(ElasticNetCd, ObjectiveNeverIncreasesAcrossSweeps) {
  Xoshiro256 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = random_instance(rng, 25, 10);
    const double lam = rng.uniform(0.01, 0.5) * lambda1_max(inst.X, inst.y);
    const auto res = elastic_net_fit_cd(inst.X, inst.y, {.lambda1 = lam, .lambda2 = rng.uniform(0.0, 1.0)});
    const double first = oracle::objective(inst.X.values(), inst.y.values(), lam, 0, Eigen::VectorXd::Zero(10));
    EXPECT_LE(res.objective_history.front(), first + 1e-12);
    for (std::size_t s = 1; s < res.objective_history.size(); ++s)
      EXPECT_LE(res.objective_history[s], res.objective_history[s - 1] + 1e-13);
  }
}

TEST(ElasticNetCd, SparsityShrinksAsLambdaGrows) {
  Xoshiro256 rng(10);
  const auto inst = random_instance(rng, 30, 12);
  const double lmax = lambda1_max(inst.X, inst.y);
  std::size_t previous = 13;
  for (int k = 0; k < 20; ++k) {
    const double lam = lmax * std::pow(10.0, -2.0 + 2.0 * k / 19.0);
    const auto res = lasso_fit(inst.X, inst.y, {.lambda1 = lam, .stop_thr = 1e-10});
    const auto size = select_support(res, 0.0).size();
    EXPECT_LE(size, previous);
    previous = size;
  }
}

TEST(ElasticNetCd, GramAndResidualPathsAgree) {
  Xoshiro256 rng(11);
  const auto inst = random_instance(rng, 30, 15);
  const PenaltyConfig cfg{.lambda1 = 0.05, .lambda2 = 0.1, .stop_thr = 1e-12};
  const auto gram = detail::run_coordinate_descent(inst.X, inst.y, cfg,
                                                   detail::GramState(inst.X.values(), inst.y.values()));
  const auto resid = detail::run_coordinate_descent(inst.X, inst.y, cfg,
                                                    detail::ResidualState(inst.X.values(), inst.y.values()));
  EXPECT_LE((gram.coefficients.values - resid.coefficients.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GroupingEffect, LassoConcentratesOnLowerIndexDeterministically) {
  Xoshiro256 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = duplicated_pair(rng, 20, 3);
    const double lam = 0.1 * lambda1_max(inst.X, inst.y);
    const auto a = lasso_fit(inst.X, inst.y, {.lambda1 = lam});
    const auto b = lasso_fit(inst.X, inst.y, {.lambda1 = lam});
    EXPECT_NE(a.coefficients.values(0), 0.0);
    EXPECT_EQ(a.coefficients.values(1), 0.0);
    EXPECT_EQ(a.coefficients.values, b.coefficients.values);
    const auto en = elastic_net_fit_cd(inst.X, inst.y, {.lambda1 = lam, .lambda2 = 0.2, .stop_thr = 1e-12});
    EXPECT_LE(std::abs(en.coefficients.values(0) - en.coefficients.values(1)), 1e-8);
    EXPECT_NE(en.coefficients.values(1), 0.0);
  }
}

TEST(Kkt, ConvergedSolveIsCertified) {
  Xoshiro256 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = random_instance(rng, 20, 8);
    const PenaltyConfig cfg{.lambda1 = rng.uniform(0.01, 0.6) * lambda1_max(inst.X, inst.y),
                            .lambda2 = rng.uniform(0.0, 1.0), .stop_thr = 1e-10};
    const auto res = elastic_net_fit_cd(inst.X, inst.y, cfg);
    ASSERT_TRUE(res.converged);
    EXPECT_LT(res.kkt_violation, 1e-6);
    EXPECT_EQ(res.kkt_violation, kkt_violation(inst.X, inst.y, cfg, res.coefficients));
  }
}

TEST(Kkt, ZeroIsOptimalAboveLambdaMax) {
  Xoshiro256 rng(14);
  const auto inst = random_instance(rng, 12, 4);
  const PenaltyConfig cfg{.lambda1 = lambda1_max(inst.X, inst.y)};
  EXPECT_EQ(kkt_violation(inst.X, inst.y, cfg, Coefficients{Eigen::VectorXd::Zero(4)}), 0.0);
}

TEST(Kkt, PerturbationIncreasesViolation) {
  Xoshiro256 rng(15);
  const auto inst = random_instance(rng, 20, 5);
  const PenaltyConfig cfg{.lambda1 = 0.05, .lambda2 = 0.1, .stop_thr = 1e-10};
  const auto res = elastic_net_fit_cd(inst.X, inst.y, cfg);
  auto perturbed = res.coefficients;
  Index j = 0;
  while (perturbed.values(j) == 0.0) ++j;
  perturbed.values(j) += 0.1;
  EXPECT_GT(kkt_violation(inst.X, inst.y, cfg, perturbed), res.kkt_violation);
}

TEST(SelectSupport, Thresholds) {
  SolverResult r;
  r.coefficients.values = Eigen::Vector3d(0.0, 0.5, -0.2);
  EXPECT_EQ(select_support(r, 0.0), (IndexSet{1, 2}));
  EXPECT_EQ(select_support(r, 0.3), (IndexSet{1}));
  r.coefficients.values.setZero();
  EXPECT_TRUE(select_support(r, 0.0).empty());
}

TEST(SelectSupport, MatchesNonzeroSet) {
  Xoshiro256 rng(16);
  const auto inst = random_instance(rng, 20, 10);
  const auto res = lasso_fit(inst.X, inst.y, {.lambda1 = 0.1});
  EXPECT_EQ(select_support(res, 0.0), res.coefficients.selected_support());
}
