#pragma once

// Elastic net through a squared-hinge SVM without bias.
//
// The L1-constrained elastic net
//
//     min ||X beta - y||^2 + lam ||beta||^2   s.t. ||beta||_1 <= t
//
// is equivalent to an SVM on 2p points in R^n: x_j - y/t with label +1 and
// x_j + y/t with label -1 (j = 1..p), trained with C = 1/(2 lam). The SVM
// multipliers alpha map back through
//
//     beta = t * (alpha[0:p] - alpha[p:2p]) / sum(alpha).
//
// The margin problem is solved in the primal (finite Newton, exact line
// search) when 2p > n and in the dual (active-set NNLS) otherwise.
//
// elastic_net_fit_svm_reduction targets the penalized objective of
// elastic_net_fit_cd. Multiplying that objective by 2N gives lam = 2N lambda2;
// the budget t is found by bisection on the constraint multiplier
// mu(t) = max_j |x_j'(y - X beta(t))/N - 2 lambda2 beta_j(t)|, which decreases
// monotonically from lambda1_max at t = 0 to 0 at the ridge solution.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/solvers.hpp"
#include "enreg/types.hpp"

namespace enreg {

namespace svm {

struct MarginSolution {
  Eigen::VectorXd alpha;  // length 2p, nonnegative
  bool converged = false;
  std::size_t iterations = 0;
};

/// Dual: min_{alpha >= 0} 1/2 alpha'(Z'Z + I/(2C)) alpha - 1'alpha.
/// Z holds the label-signed points as columns. Lawson-Hanson style active set;
/// terminates finitely because the Hessian is positive definite.
inline MarginSolution solve_dual(const Eigen::MatrixXd& Z, double C) {
  const Index k = Z.cols();
  Eigen::MatrixXd Q = Z.transpose() * Z;
  Q.diagonal().array() += 1.0 / (2.0 * C);
  const double tol = 1e-13 * std::max(1.0, Q.diagonal().maxCoeff());

  MarginSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(k);
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  const std::size_t max_outer = 10 * static_cast<std::size_t>(k) + 50;

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Index> idx;
    for (Index i = 0; i < k; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    const auto np = static_cast<Index>(idx.size());
    Eigen::MatrixXd Qpp(np, np);
    for (Index a = 0; a < np; ++a)
      for (Index b = 0; b < np; ++b) Qpp(a, b) = Q(idx[a], idx[b]);
    const Eigen::VectorXd sp = Qpp.llt().solve(Eigen::VectorXd::Ones(np));
    s.setZero(k);
    for (Index a = 0; a < np; ++a) s(idx[a]) = sp(a);
  };

  Eigen::VectorXd s(k);
  for (; sol.iterations < max_outer; ++sol.iterations) {
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(k) - Q * sol.alpha;
    Index enter = -1;
    double best = tol;
    for (Index i = 0; i < k; ++i)
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best) best = w(i), enter = i;
    if (enter < 0) {
      sol.converged = true;
      break;
    }
    passive[static_cast<std::size_t>(enter)] = true;
    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(k); ++inner) {
      solve_passive(s);
      double theta = 1.0;
      bool feasible = true;
      for (Index i = 0; i < k; ++i) {
        if (passive[static_cast<std::size_t>(i)] && s(i) <= 0.0) {
          feasible = false;
          theta = std::min(theta, sol.alpha(i) / (sol.alpha(i) - s(i)));
        }
      }
      if (feasible) {
        sol.alpha = s;
        break;
      }
      sol.alpha += theta * (s - sol.alpha);
      for (Index i = 0; i < k; ++i) {
        if (passive[static_cast<std::size_t>(i)] && sol.alpha(i) <= 1e-15 * (1.0 + sol.alpha.maxCoeff())) {
          passive[static_cast<std::size_t>(i)] = false;
          sol.alpha(i) = 0.0;
        }
      }
    }
  }
  return sol;
}

/// Primal: min_w 1/2 ||w||^2 + C sum_i max(0, 1 - z_i'w)^2, then
/// alpha_i = C max(0, 1 - z_i'w). Finite Newton with exact line search.
inline MarginSolution solve_primal(const Eigen::MatrixXd& Z, double C) {
  const Index n = Z.rows();
  const Index k = Z.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  MarginSolution sol;
  const std::size_t max_iter = 200;

  for (; sol.iterations < max_iter; ++sol.iterations) {
    const Eigen::VectorXd slack = Eigen::VectorXd::Ones(k) - Z.transpose() * w;
    Eigen::VectorXd grad = w;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    for (Index i = 0; i < k; ++i) {
      if (slack(i) > 0.0) {
        grad.noalias() -= 2.0 * C * slack(i) * Z.col(i);
        H.noalias() += 2.0 * C * Z.col(i) * Z.col(i).transpose();
      }
    }
    const double scale = 1.0 + 2.0 * C * Z.colwise().norm().maxCoeff();
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) {
      sol.converged = true;
      break;
    }
    const Eigen::VectorXd d = -H.llt().solve(grad);

    // phi'(tau) = w'd + tau d'd - 2C sum_i max(0, a_i - tau b_i) b_i is increasing
    // and piecewise linear; walk its breakpoints and solve on the bracketing piece.
    const Eigen::VectorXd a = slack;
    const Eigen::VectorXd b = Z.transpose() * d;
    std::vector<double> knots{0.0};
    for (Index i = 0; i < k; ++i)
      if (b(i) != 0.0 && a(i) / b(i) > 0.0) knots.push_back(a(i) / b(i));
    std::sort(knots.begin(), knots.end());
    knots.push_back(std::numeric_limits<double>::infinity());
    const double wd = w.dot(d);
    const double dd = d.squaredNorm();
    double tau = 0.0;
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
      const double lo = knots[s];
      const double hi = knots[s + 1];
      const double probe = std::isfinite(hi) ? 0.5 * (lo + hi) : lo + 1.0;
      double A = wd, B = dd;
      for (Index i = 0; i < k; ++i) {
        if (a(i) - probe * b(i) > 0.0) {
          A -= 2.0 * C * a(i) * b(i);
          B += 2.0 * C * b(i) * b(i);
        }
      }
      const double root = -A / B;
      if (root <= hi) {
        tau = std::max(root, lo);
        break;
      }
    }
    const Eigen::VectorXd step = tau * d;
    w += step;
    if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + w.lpNorm<Eigen::Infinity>())) {
      sol.converged = true;
      break;
    }
  }
  const Eigen::VectorXd slack = Eigen::VectorXd::Ones(k) - Z.transpose() * w;
  sol.alpha = C * slack.cwiseMax(0.0);
  return sol;
}

}  // namespace svm

struct ReductionOutcome {
  Eigen::VectorXd beta;
  bool degenerate = false;
  bool converged = true;
  bool used_primal = false;
};

/// One solve of the L1-constrained problem min ||X b - y||^2 + lam ||b||^2,
/// ||b||_1 <= budget, via the augmented SVM.
inline ReductionOutcome elastic_net_constrained_svm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                    double budget, double lam) {
  const Index n = X.rows();
  const Index p = X.cols();
  ReductionOutcome out;
  out.beta = Eigen::VectorXd::Zero(p);
  if (!(budget > 0.0)) {
    out.degenerate = true;
    return out;
  }
  if (!(lam > 0.0)) throw ConfigError("the SVM reduction needs a positive quadratic penalty");
  const double C = 1.0 / (2.0 * lam);

  // signed points z_i = Y2_i * X2_i as columns
  Eigen::MatrixXd Z(n, 2 * p);
  const Eigen::VectorXd shift = y / budget;
  for (Index j = 0; j < p; ++j) {
    Z.col(j) = X.col(j) - shift;
    Z.col(p + j) = -(X.col(j) + shift);
  }

  out.used_primal = 2 * p > n;
  const svm::MarginSolution sol = out.used_primal ? svm::solve_primal(Z, C) : svm::solve_dual(Z, C);
  out.converged = sol.converged;
  const double total = sol.alpha.sum();
  if (!(total > 0.0)) {
    out.degenerate = true;
    return out;
  }
  out.beta = budget * (sol.alpha.head(p) - sol.alpha.tail(p)) / total;
  return out;
}

/// Penalized elastic net through the SVM reduction; agrees with
/// elastic_net_fit_cd on the same objective. Requires lambda2 > 0.
inline SolverResult elastic_net_fit_svm_reduction(const FeatureMatrix& X, const LabelVector& y,
                                                  const PenaltyConfig& cfg) {
  detail::check_solver_inputs(X, y, cfg);
  if (cfg.lambda2 <= 0.0)
    throw ConfigError("SVM reduction needs lambda2 > 0 (C = 1/(2 lambda2)); use elastic_net_fit_cd for lambda2 = 0");

  const Eigen::MatrixXd& A = X.values();
  const Eigen::VectorXd& b = y.values();
  const double n = static_cast<double>(X.n_samples());
  const double lam = 2.0 * n * cfg.lambda2;
  const Index p = X.n_features();

  SolverResult res;
  auto finish = [&](Eigen::VectorXd beta) {
    res.coefficients.values = std::move(beta);
    res.objective_value = elastic_net_objective(X, y, cfg, res.coefficients.values);
    res.objective_history.push_back(res.objective_value);
    res.kkt_violation = kkt_violation(X, y, cfg, res.coefficients);
    return res;
  };

  const double lmax = lambda1_max(X, y);
  if (cfg.lambda1 >= lmax) {
    // zero budget: beta = 0 is optimal and the augmented points are undefined
    res.degenerate = true;
    res.converged = true;
    return finish(Eigen::VectorXd::Zero(p));
  }

  // unconstrained optimum (ridge): (X'X/N + 2 lambda2 I) beta = X'y/N
  Eigen::MatrixXd G = A.transpose() * A / n;
  G.diagonal().array() += 2.0 * cfg.lambda2;
  const Eigen::VectorXd ridge = G.llt().solve(A.transpose() * b / n);
  const double t_ridge = ridge.lpNorm<1>();

  auto multiplier = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd g = A.transpose() * (b - A * beta) / n - 2.0 * cfg.lambda2 * beta;
    return g.cwiseAbs().maxCoeff();
  };

  bool all_converged = true;
  auto solve_at = [&](double t) {
    const ReductionOutcome o = elastic_net_constrained_svm(A, b, t, lam);
    all_converged = all_converged && o.converged;
    res.degenerate = o.degenerate;
    return o.beta;
  };

  if (cfg.lambda1 == 0.0) {
    Eigen::VectorXd beta = solve_at(t_ridge);
    res.sweeps_used = 1;
    res.converged = all_converged;
    return finish(std::move(beta));
  }

  double lo = 0.0;
  double hi = t_ridge;
  const std::size_t max_bisect = std::min<std::size_t>(cfg.max_sweeps, 200);
  while (res.sweeps_used < max_bisect && hi - lo > 1e-14 * t_ridge) {
    const double mid = 0.5 * (lo + hi);
    const Eigen::VectorXd beta = solve_at(mid);
    ++res.sweeps_used;
    if (multiplier(beta) > cfg.lambda1)
      lo = mid;
    else
      hi = mid;
  }
  Eigen::VectorXd beta = solve_at(0.5 * (lo + hi));
  res.converged = all_converged && hi - lo <= 1e-14 * t_ridge;
  return finish(std::move(beta));
}

}  // namespace enreg
