#pragma once

// Sparse regression by cyclic coordinate descent.
//
// Objective (for standardized X with ||x_j||^2 = N):
//
//     F(beta) = 1/(2N) ||y - X beta||^2 + lambda1 ||beta||_1 + lambda2 ||beta||_2^2
//
// lasso_fit is the lambda2 = 0 case and follows the inner-product formulation:
// ipy = X'y, gc = X'X beta maintained incrementally, and per coordinate
//
//     z = (ipy[j] - gc[j]) / N + beta[j]
//     beta[j] <- soft_threshold(z, lambda1) / (1 + 2 lambda2)
//
// sweeping j = 0..M-1 in ascending order until the largest change in a sweep
// drops below stop_thr.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/standardize.hpp"
#include "enreg/types.hpp"

namespace enreg {

struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double stop_thr = 1e-7;
  std::size_t max_sweeps = 100000;

  void validate() const {
    if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ConfigError("lambda1 must be finite and >= 0");
    if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("lambda2 must be finite and >= 0");
    if (!(stop_thr > 0.0)) throw ConfigError("stop_thr must be > 0");
    if (max_sweeps < 1) throw ConfigError("max_sweeps must be >= 1");
  }
};

struct SolverResult {
  Coefficients coefficients;
  double objective_value = 0.0;
  std::size_t sweeps_used = 0;
  bool converged = false;
  double kkt_violation = 0.0;
  // Set by the SVM reduction when the augmented problem cannot be scaled back
  // (sum of multipliers is zero or the L1 budget is zero); beta is then 0.
  bool degenerate = false;
  std::vector<double> objective_history;  // objective after each sweep
};

inline double soft_threshold(double z, double t) {
  return std::max(0.0, z - t) - std::max(0.0, -z - t);
}

inline double elastic_net_objective(const FeatureMatrix& X, const LabelVector& y,
                                    const PenaltyConfig& cfg, const Eigen::VectorXd& beta) {
  const double n = static_cast<double>(X.n_samples());
  const double rss = (y.values() - X.values() * beta).squaredNorm();
  return rss / (2.0 * n) + cfg.lambda1 * beta.lpNorm<1>() + cfg.lambda2 * beta.squaredNorm();
}

/// Largest breach of the elastic-net subgradient conditions at beta.
inline double kkt_violation(const FeatureMatrix& X, const LabelVector& y, const PenaltyConfig& cfg,
                            const Coefficients& beta) {
  require_same_length(X, y);
  if (beta.size() != X.n_features()) throw DimensionError("coefficient length does not match feature count");
  const double n = static_cast<double>(X.n_samples());
  const Eigen::VectorXd residual = y.values() - X.values() * beta.values;
  const Eigen::VectorXd g = -(X.values().transpose() * residual) / n + 2.0 * cfg.lambda2 * beta.values;
  double worst = 0.0;
  for (Index j = 0; j < g.size(); ++j) {
    const double b = beta.values(j);
    const double v = b == 0.0 ? std::max(0.0, std::abs(g(j)) - cfg.lambda1)
                              : std::abs(g(j) + cfg.lambda1 * (b > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

/// Smallest lambda1 at which beta = 0 is optimal: max_j |x_j'y| / N.
inline double lambda1_max(const FeatureMatrix& X, const LabelVector& y) {
  require_same_length(X, y);
  return (X.values().transpose() * y.values()).cwiseAbs().maxCoeff() / static_cast<double>(X.n_samples());
}

namespace detail {

// Gradient bookkeeping with a cached Gram matrix: ipx = X'X, gc = ipx * beta.
class GramState {
 public:
  GramState(const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : ipy_(X.transpose() * y), ipx_(X.transpose() * X), gc_(Eigen::VectorXd::Zero(X.cols())) {}

  double correlation(Index j) const { return ipy_(j) - gc_(j); }
  void update(Index j, double delta) { gc_.noalias() += ipx_.col(j) * delta; }

 private:
  Eigen::VectorXd ipy_;
  Eigen::MatrixXd ipx_;
  Eigen::VectorXd gc_;
};

// Same quantities through the residual r = y - X beta, so ipy[j] - gc[j] = x_j'r.
// Used when M is too large for an M x M Gram matrix.
class ResidualState {
 public:
  ResidualState(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) : X_(X), r_(y) {}

  double correlation(Index j) const { return X_.col(j).dot(r_); }
  void update(Index j, double delta) { r_.noalias() -= X_.col(j) * delta; }

 private:
  const Eigen::MatrixXd& X_;
  Eigen::VectorXd r_;
};

inline constexpr Index kGramFeatureLimit = 2048;
inline constexpr double kDeadZoneSlack = 1e-12;

template <class State>
SolverResult run_coordinate_descent(const FeatureMatrix& X, const LabelVector& y,
                                    const PenaltyConfig& cfg, State state) {
  const Index m = X.n_features();
  const double n = static_cast<double>(X.n_samples());
  const double shrink = 1.0 + 2.0 * cfg.lambda2;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);

  SolverResult res;
  double max_change = 0.0;
  do {
    max_change = 0.0;
    for (Index j = 0; j < m; ++j) {
      const double z = state.correlation(j) / n + beta(j);
      double updated = soft_threshold(z, cfg.lambda1) / shrink;
      // |z| sitting on lambda1 up to rounding is the dead-zone boundary, not a
      // new active coordinate (duplicated columns land exactly here).
      if (std::abs(updated) <= kDeadZoneSlack * std::abs(z)) updated = 0.0;
      const double delta = updated - beta(j);
      if (delta != 0.0) {
        beta(j) = updated;
        state.update(j, delta);
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    ++res.sweeps_used;
    res.objective_history.push_back(elastic_net_objective(X, y, cfg, beta));
  } while (max_change >= cfg.stop_thr && res.sweeps_used < cfg.max_sweeps);

  res.converged = max_change < cfg.stop_thr;
  res.coefficients.values = std::move(beta);
  res.objective_value = res.objective_history.back();
  res.kkt_violation = kkt_violation(X, y, cfg, res.coefficients);
  return res;
}

inline void check_solver_inputs(const FeatureMatrix& X, const LabelVector& y, const PenaltyConfig& cfg) {
  cfg.validate();
  require_same_length(X, y);
  if (!is_standardized(X.values(), 1e-6))
    throw ContractError("design matrix is not standardized (each column needs squared norm N)");
}

}  // namespace detail

/// Cyclic coordinate descent for the elastic net; lambda2 = 0 gives the lasso.
inline SolverResult elastic_net_fit_cd(const FeatureMatrix& X, const LabelVector& y,
                                       const PenaltyConfig& cfg) {
  detail::check_solver_inputs(X, y, cfg);
  if (X.n_features() <= detail::kGramFeatureLimit)
    return detail::run_coordinate_descent(X, y, cfg, detail::GramState(X.values(), y.values()));
  return detail::run_coordinate_descent(X, y, cfg, detail::ResidualState(X.values(), y.values()));
}

inline SolverResult lasso_fit(const FeatureMatrix& X, const LabelVector& y, const PenaltyConfig& cfg) {
  if (cfg.lambda2 != 0.0) throw ConfigError("lasso_fit requires lambda2 = 0; use elastic_net_fit_cd");
  return elastic_net_fit_cd(X, y, cfg);
}

inline IndexSet select_support(const SolverResult& result, double min_magnitude) {
  if (!(min_magnitude >= 0.0)) throw ConfigError("min_magnitude must be >= 0");
  IndexSet s;
  const auto& b = result.coefficients.values;
  for (Index j = 0; j < b.size(); ++j)
    if (std::abs(b(j)) > min_magnitude) s.push_back(static_cast<std::size_t>(j));
  return s;
}

}  // namespace enreg
