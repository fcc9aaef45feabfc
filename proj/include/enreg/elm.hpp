#pragma once

// Kernel extreme learning machine. The hidden layer is replaced by an RBF
// Gram matrix over the training inputs, so there are no random input weights:
//
//     output_weights = (Omega + I / ridge_c)^-1 T,   Omega_ij = k(x_i, x_j)
//
// with T the one-hot target matrix. Scores for a query q are k(q, X_train) W.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/io.hpp"
#include "enreg/types.hpp"

namespace enreg {

struct RbfKernel {
  double gamma = 1.0;
};

inline constexpr double kDefaultRidgeC = 100.0;

struct ElmModel {
  Eigen::MatrixXd training_inputs;  // N x K
  Eigen::MatrixXd output_weights;   // N x C
  RbfKernel kernel;
  double ridge_c = kDefaultRidgeC;

  Index n_classes() const noexcept { return output_weights.cols(); }
  Index n_features() const noexcept { return training_inputs.cols(); }
};

struct ClassScores {
  Eigen::VectorXd scores;
  int predicted_class = 0;
};

template <class A, class B>
double rbf_kernel(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, double gamma) {
  if (a.size() != b.size()) throw DimensionError("rbf_kernel: vectors of different length");
  return std::exp(-gamma * (a - b).squaredNorm());
}

/// Kernel matrix between the rows of A and the rows of B.
inline Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < B.rows(); ++j) K(i, j) = rbf_kernel(A.row(i), B.row(j), gamma);
  return K;
}

/// gamma = 1 / (K * median pairwise squared distance); 1 if that median is 0.
inline double median_heuristic_gamma(const Eigen::MatrixXd& X) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(X.rows() * (X.rows() - 1) / 2));
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = i + 1; j < X.rows(); ++j) d.push_back((X.row(i) - X.row(j)).squaredNorm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double median = *mid;
  if (d.size() % 2 == 0) median = 0.5 * (median + *std::max_element(d.begin(), mid));
  if (!(median > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(X.cols()) * median);
}

inline ElmModel elm_train(const FeatureMatrix& X, std::span<const int> labels, RbfKernel kernel,
                          double ridge_c = kDefaultRidgeC, int n_classes = 0) {
  const Index n = X.n_samples();
  if (static_cast<Index>(labels.size()) != n)
    throw DimensionError("ELM: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " samples");
  if (!(kernel.gamma > 0.0) || !std::isfinite(kernel.gamma)) throw ConfigError("ELM kernel gamma must be > 0");
  if (!(ridge_c > 0.0) || !std::isfinite(ridge_c)) throw ConfigError("ELM ridge_c must be > 0");
  int top = 0;
  for (int c : labels) {
    if (c < 0) throw DataError("ELM class labels must be non-negative indices");
    top = std::max(top, c);
  }
  const Index classes = std::max<Index>(n_classes, top + 1);

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, classes);
  for (Index i = 0; i < n; ++i) T(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  Eigen::MatrixXd A = rbf_gram(X.values(), X.values(), kernel.gamma);
  A.diagonal().array() += 1.0 / ridge_c;

  ElmModel model{X.values(), {}, kernel, ridge_c};
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) {
    model.output_weights = llt.solve(T);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("ELM system (Omega + I/C) is not positive definite");
    model.output_weights = ldlt.solve(T);
  }
  if (!model.output_weights.allFinite()) throw NumericalError("ELM output weights are not finite");
  return model;
}

inline int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Index c = 1; c < v.size(); ++c)
    if (v(c) > v(best)) best = static_cast<int>(c);
  return best;
}

inline std::vector<ClassScores> elm_predict(const ElmModel& model, const FeatureMatrix& X) {
  if (X.n_features() != model.n_features())
    throw DimensionError("ELM expects " + std::to_string(model.n_features()) + " features, got " +
                         std::to_string(X.n_features()));
  const Eigen::MatrixXd scores = rbf_gram(X.values(), model.training_inputs, model.kernel.gamma) * model.output_weights;
  std::vector<ClassScores> out(static_cast<std::size_t>(X.n_samples()));
  for (Index i = 0; i < X.n_samples(); ++i) {
    auto& o = out[static_cast<std::size_t>(i)];
    o.scores = scores.row(i).transpose();
    o.predicted_class = argmax_lowest(o.scores);
  }
  return out;
}

inline std::vector<int> predicted_classes(const std::vector<ClassScores>& scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(s.predicted_class);
  return out;
}

inline TextBlocks elm_to_blocks(const ElmModel& model) {
  TextBlocks b;
  b.add_attribute("kernel", "rbf gamma=" + detail::format_sci17(model.kernel.gamma) +
                                " ridge_c=" + detail::format_sci17(model.ridge_c));
  b.add_matrix("training_inputs", model.training_inputs);
  b.add_matrix("output_weights", model.output_weights);
  return b;
}

inline ElmModel elm_from_blocks(const TextBlocks& b) {
  ElmModel model;
  std::istringstream desc(b.get("kernel").attribute);
  std::string type, gamma, ridge;
  desc >> type >> gamma >> ridge;
  if (type != "rbf" || gamma.rfind("gamma=", 0) != 0 || ridge.rfind("ridge_c=", 0) != 0)
    throw FormatError("bad kernel descriptor '" + b.get("kernel").attribute + "'");
  const auto g = detail::parse_double(gamma.substr(6));
  const auto c = detail::parse_double(ridge.substr(8));
  if (!g || !c) throw FormatError("bad kernel parameters");
  model.kernel.gamma = *g;
  model.ridge_c = *c;
  model.training_inputs = b.get("training_inputs").data;
  model.output_weights = b.get("output_weights").data;
  if (model.training_inputs.rows() != model.output_weights.rows())
    throw FormatError("ELM output_weights rows must match training_inputs rows");
  return model;
}

}  // namespace enreg
