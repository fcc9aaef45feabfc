#pragma once

// k-fold evaluation of standardize -> PCA -> sparse selector -> kernel ELM,
// plus the paired lasso / elastic net comparison.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "enreg/elm.hpp"
#include "enreg/errors.hpp"
#include "enreg/pca.hpp"
#include "enreg/rng.hpp"
#include "enreg/solvers.hpp"
#include "enreg/standardize.hpp"
#include "enreg/svm_reduction.hpp"
#include "enreg/types.hpp"

namespace enreg {

enum class SelectorKind { lasso, elastic_net_cd, elastic_net_svm, none };

inline std::string to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::lasso: return "lasso";
    case SelectorKind::elastic_net_cd: return "elastic_net_cd";
    case SelectorKind::elastic_net_svm: return "elastic_net_svm";
    case SelectorKind::none: return "none";
  }
  return "?";
}

inline SelectorKind parse_selector(const std::string& s) {
  for (auto k : {SelectorKind::lasso, SelectorKind::elastic_net_cd, SelectorKind::elastic_net_svm, SelectorKind::none})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown selector '" + s + "' (lasso, elastic_net_cd, elastic_net_svm, none)");
}

/// Fractions of lambda1_max tried by the internal validation search.
inline constexpr std::array<double, 5> kLambdaGrid{0.5, 0.25, 0.125, 0.0625, 0.03125};
inline constexpr double kDefaultLambda2Ratio = 0.5;
inline constexpr double kInnerValidationFraction = 0.2;
inline constexpr double kSupportThreshold = 0.0;

struct PipelineConfig {
  SelectorKind selector = SelectorKind::elastic_net_cd;
  bool use_pca = true;
  PcaRetain pca_retain = VarianceFraction{kDefaultPcaVarianceFraction};
  std::optional<double> lambda1;  // unset: internal validation over kLambdaGrid
  std::optional<double> lambda2;  // unset: kDefaultLambda2Ratio * lambda1 (0 for lasso)
  double stop_thr = 1e-7;
  std::optional<double> elm_gamma;  // unset: median heuristic on the training fold
  double elm_ridge = kDefaultRidgeC;
  int k_folds = 10;
  std::uint64_t seed = 1;
  std::optional<double> holdout;  // test fraction for a single fixed split instead of k folds
  std::vector<std::string> group_names;

  void validate(std::size_t n) const {
    if (holdout) {
      if (!(*holdout > 0.0 && *holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
    } else if (k_folds < 2 || static_cast<std::size_t>(k_folds) > n) {
      throw ConfigError("k_folds must satisfy 2 <= k <= N (k=" + std::to_string(k_folds) + ", N=" + std::to_string(n) + ")");
    }
    if (lambda1 && !(*lambda1 >= 0.0)) throw ConfigError("lambda1 must be >= 0");
    if (lambda2 && !(*lambda2 >= 0.0)) throw ConfigError("lambda2 must be >= 0");
    if (selector == SelectorKind::lasso && lambda2 && *lambda2 != 0.0) throw ConfigError("lasso selector needs lambda2 = 0");
    if (selector == SelectorKind::elastic_net_svm && lambda2 && *lambda2 == 0.0)
      throw ConfigError("elastic_net_svm needs lambda2 > 0");
    if (elm_gamma && !(*elm_gamma > 0.0)) throw ConfigError("elm gamma must be > 0");
    if (!(elm_ridge > 0.0)) throw ConfigError("elm ridge must be > 0");
  }

  std::string group_name(int c) const {
    if (c >= 0 && static_cast<std::size_t>(c) < group_names.size()) return group_names[static_cast<std::size_t>(c)];
    return "class_" + std::to_string(c);
  }
};

struct Dataset {
  FeatureMatrix features;
  std::vector<int> classes;
};

// ---- folds and metrics ----------------------------------------------------

inline std::vector<IndexSet> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n)
    throw ConfigError("kfold_split needs 2 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  Xoshiro256 rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<IndexSet> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) folds[i % static_cast<std::size_t>(k)].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

inline std::vector<IndexSet> holdout_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  const auto n_test = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(test_fraction * double(n))), 1, n - 1);
  Xoshiro256 rng(seed);
  auto perm = rng.permutation(n);
  IndexSet test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(test.begin(), test.end());
  return {test};
}

inline IndexSet complement(std::size_t n, const IndexSet& rows) {
  std::vector<bool> in(n, false);
  for (auto r : rows) in[r] = true;
  IndexSet out;
  for (std::size_t i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

/// FNV-1a over the fold contents, used to show two arms saw the same partition.
inline std::uint64_t fold_hash(const std::vector<IndexSet>& folds) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto& f : folds) {
    mix(f.size());
    for (auto i : f) mix(i);
  }
  return h;
}

inline double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) throw LengthError(truth.size(), predictions.size());
  if (predictions.empty()) throw UndefinedMetricError("accuracy of an empty prediction set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predictions[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// sigma = sqrt(sum |x - mean|^2 / n).
inline double stddev_population(std::span<const double> x) {
  if (x.empty()) throw UndefinedMetricError("standard deviation of an empty sample");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw UndefinedMetricError("median of an empty sample");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// ---- selection ------------------------------------------------------------

/// Response for the selector regression: +1 for the target class, -1 otherwise.
inline LabelVector one_vs_rest(std::span<const int> classes, int target) {
  Eigen::VectorXd y(static_cast<Index>(classes.size()));
  for (std::size_t i = 0; i < classes.size(); ++i) y(static_cast<Index>(i)) = classes[i] == target ? 1.0 : -1.0;
  return LabelVector(std::move(y));
}

inline SolverResult fit_selector(SelectorKind kind, const FeatureMatrix& X, const LabelVector& y,
                                 const PenaltyConfig& cfg) {
  switch (kind) {
    case SelectorKind::lasso: return lasso_fit(X, y, cfg);
    case SelectorKind::elastic_net_cd: return elastic_net_fit_cd(X, y, cfg);
    case SelectorKind::elastic_net_svm: return elastic_net_fit_svm_reduction(X, y, cfg);
    case SelectorKind::none: break;
  }
  throw ConfigError("selector 'none' has no regression fit");
}

struct PenaltyChoice {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double grid_fraction = 0.0;  // lambda1 / lambda1_max, 0 when given explicitly
};

namespace detail {

inline double lambda2_for(const PipelineConfig& cfg, double lambda1) {
  if (cfg.selector == SelectorKind::lasso) return 0.0;
  if (cfg.lambda2) return *cfg.lambda2;
  return kDefaultLambda2Ratio * lambda1;
}

/// Pick lambda1 / lambda1_max from kLambdaGrid by validation MSE on a seeded
/// 80/20 split of the (already standardized) training rows. Ties keep the
/// larger penalty.
inline double select_grid_fraction(const PipelineConfig& cfg, const FeatureMatrix& X, const LabelVector& y,
                                   std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.n_samples());
  if (n < 5) return kLambdaGrid.front();
  Xoshiro256 rng(seed);
  const auto perm = rng.permutation(n);
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kInnerValidationFraction * double(n))));
  IndexSet val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  IndexSet fit(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());

  const auto inner = standardize_columns(X.select_rows(fit));
  const LabelVector y_fit = y.select(fit);
  const Eigen::MatrixXd X_val = inner.record.apply(X.select_rows(val).values());
  const Eigen::VectorXd y_val = y.select(val).values();
  const double intercept = y_fit.values().mean();
  const double lmax = lambda1_max(inner.matrix, y_fit);

  double best_fraction = kLambdaGrid.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (double f : kLambdaGrid) {
    const double l1 = f * lmax;
    PenaltyConfig pc{.lambda1 = l1, .lambda2 = lambda2_for(cfg, l1), .stop_thr = cfg.stop_thr};
    if (cfg.selector == SelectorKind::elastic_net_svm && pc.lambda2 == 0.0) continue;
    const auto res = fit_selector(cfg.selector, inner.matrix, y_fit, pc);
    const double mse = ((y_val.array() - intercept) - (X_val * res.coefficients.values).array()).square().mean();
    if (mse < best_mse) {
      best_mse = mse;
      best_fraction = f;
    }
  }
  return best_fraction;
}

}  // namespace detail

// ---- per-fold model -------------------------------------------------------

struct FoldModel {
  StandardizationRecord standardization;
  std::optional<PcaModel> pca;
  std::optional<StandardizationRecord> score_standardization;  // PCA scores rescaled for the solver
  IndexSet support;                                            // columns of the selector input
  std::vector<PenaltyChoice> penalties;                        // one per one-vs-rest fit
  ElmModel elm;
  std::vector<std::string> warnings;
  Index n_selector_inputs = 0;

  /// Training-fit transform from raw features to ELM inputs.
  FeatureMatrix transform(const FeatureMatrix& X) const {
    FeatureMatrix Z = standardization.apply(X);
    if (pca) Z = score_standardization->apply(pca_transform(*pca, Z));
    return Z.select_cols(support);
  }
};

/// Fit every stage on the given training rows of X only.
inline FoldModel fit_fold_model(const PipelineConfig& cfg, const FeatureMatrix& X, std::span<const int> classes,
                                std::span<const std::size_t> train_rows, std::uint64_t fold_seed) {
  if (train_rows.size() < 2) throw InsufficientDataError("a training fold needs at least 2 samples");
  FoldModel model;
  const FeatureMatrix X_train = X.select_rows(train_rows);
  std::vector<int> y_train;
  y_train.reserve(train_rows.size());
  for (auto r : train_rows) y_train.push_back(classes[r]);

  auto standardized = standardize_columns(X_train);
  model.standardization = standardized.record;
  FeatureMatrix Z = std::move(standardized.matrix);
  if (cfg.use_pca) {
    model.pca = pca_fit(Z, cfg.pca_retain);
    for (const auto& w : model.pca->warnings) model.warnings.push_back("pca: " + w);
    auto scores = standardize_columns(pca_transform(*model.pca, Z));
    model.score_standardization = scores.record;
    Z = std::move(scores.matrix);
  }
  model.n_selector_inputs = Z.n_features();

  const int n_classes = *std::max_element(y_train.begin(), y_train.end()) + 1;
  if (cfg.selector == SelectorKind::none) {
    model.support.resize(static_cast<std::size_t>(Z.n_features()));
    std::iota(model.support.begin(), model.support.end(), std::size_t{0});
  } else {
    // binary: one regression on the class-1 indicator; otherwise one per class
    std::vector<int> targets;
    if (n_classes <= 2) targets.push_back(1);
    else
      for (int c = 0; c < n_classes; ++c) targets.push_back(c);
    std::vector<bool> keep(static_cast<std::size_t>(Z.n_features()), false);
    for (int t : targets) {
      const LabelVector y = one_vs_rest(y_train, t);
      PenaltyChoice choice;
      if (cfg.lambda1) {
        choice.lambda1 = *cfg.lambda1;
      } else {
        choice.grid_fraction = detail::select_grid_fraction(cfg, Z, y, fold_seed + 7919u * static_cast<unsigned>(t));
        choice.lambda1 = choice.grid_fraction * lambda1_max(Z, y);
      }
      choice.lambda2 = detail::lambda2_for(cfg, choice.lambda1);
      const auto res = fit_selector(cfg.selector, Z, y,
                                    {.lambda1 = choice.lambda1, .lambda2 = choice.lambda2, .stop_thr = cfg.stop_thr});
      if (!res.converged) model.warnings.push_back("selector did not converge for target class " + std::to_string(t));
      for (auto j : select_support(res, kSupportThreshold)) keep[j] = true;
      model.penalties.push_back(choice);
    }
    for (std::size_t j = 0; j < keep.size(); ++j)
      if (keep[j]) model.support.push_back(j);
    if (model.support.empty()) {
      model.warnings.push_back("selector returned an empty support; using all " + std::to_string(Z.n_features()) +
                               " features");
      model.support.resize(static_cast<std::size_t>(Z.n_features()));
      std::iota(model.support.begin(), model.support.end(), std::size_t{0});
    }
  }

  const FeatureMatrix S = Z.select_cols(model.support);
  const double gamma = cfg.elm_gamma ? *cfg.elm_gamma : median_heuristic_gamma(S.values());
  model.elm = elm_train(S, y_train, RbfKernel{gamma}, cfg.elm_ridge, n_classes);
  return model;
}

// ---- reports --------------------------------------------------------------

struct FoldRecord {
  int fold = 0;
  std::size_t n_train = 0, n_test = 0;
  bool failed = false;
  std::string failure;
  ErrorKind failure_kind = ErrorKind::data;
  double accuracy = 0.0;
  double time_ms = 0.0;  // median per-sample elm_predict latency
  std::size_t selected = 0;
  IndexSet support;
  std::vector<PenaltyChoice> penalties;
  std::vector<std::string> warnings;
  std::vector<std::size_t> test_rows;
  std::vector<int> predictions;
};

struct GroupRecord {
  std::string group;  // class name or "overall"
  std::size_t folds = 0;
  double accuracy = 0.0;      // mean over folds
  double accuracy_std = 0.0;  // population sigma over folds
  double time_ms = 0.0;       // mean of fold median latencies
  double selected = 0.0;      // mean selected-feature count
};

struct ArmReport {
  std::string selector;
  std::uint64_t fold_hash = 0;
  std::vector<FoldRecord> folds;
  std::vector<GroupRecord> groups;  // per class, then "overall"

  const GroupRecord& overall() const { return groups.back(); }
  std::size_t failed_folds() const {
    return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const auto& f) { return f.failed; }));
  }
};

struct FoldDelta {
  int fold = 0;
  double accuracy_delta = 0.0;  // proposed - baseline
  double time_delta_ms = 0.0;
};

struct ComparisonBlock {
  std::string baseline, proposed;
  bool identical_folds = false;
  std::vector<FoldDelta> deltas;
  double mean_accuracy_delta = 0.0;
  double mean_time_delta_ms = 0.0;
};

struct EvaluationReport {
  std::vector<ArmReport> arms;
  std::optional<ComparisonBlock> comparison;
};

namespace detail {

inline std::vector<GroupRecord> aggregate(const PipelineConfig& cfg, const std::vector<FoldRecord>& folds,
                                          std::span<const int> classes) {
  const int n_classes = classes.empty() ? 0 : *std::max_element(classes.begin(), classes.end()) + 1;
  std::vector<GroupRecord> out;
  auto summarize = [&](const std::string& name, int cls) {
    GroupRecord g{name};
    std::vector<double> acc;
    double time = 0.0, sel = 0.0;
    for (const auto& f : folds) {
      if (f.failed) continue;
      std::size_t hit = 0, total = 0;
      for (std::size_t i = 0; i < f.test_rows.size(); ++i) {
        const int truth = classes[f.test_rows[i]];
        if (cls >= 0 && truth != cls) continue;
        ++total;
        hit += f.predictions[i] == truth;
      }
      if (total == 0) continue;
      acc.push_back(static_cast<double>(hit) / static_cast<double>(total));
      time += f.time_ms;
      sel += static_cast<double>(f.selected);
    }
    g.folds = acc.size();
    if (!acc.empty()) {
      g.accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / double(acc.size());
      g.accuracy_std = stddev_population(acc);
      g.time_ms = time / double(acc.size());
      g.selected = sel / double(acc.size());
    }
    out.push_back(g);
  };
  for (int c = 0; c < n_classes; ++c) summarize(cfg.group_name(c), c);
  summarize("overall", -1);
  return out;
}

inline std::vector<IndexSet> partition(const PipelineConfig& cfg, std::size_t n) {
  return cfg.holdout ? holdout_split(n, *cfg.holdout, cfg.seed) : kfold_split(n, cfg.k_folds, cfg.seed);
}

}  // namespace detail

inline FoldRecord evaluate_fold(const PipelineConfig& cfg, const Dataset& data, const IndexSet& test_rows, int fold) {
  const auto n = static_cast<std::size_t>(data.features.n_samples());
  FoldRecord rec;
  rec.fold = fold;
  rec.test_rows = test_rows;
  const IndexSet train_rows = complement(n, test_rows);
  rec.n_train = train_rows.size();
  rec.n_test = test_rows.size();
  try {
    const FoldModel model =
        fit_fold_model(cfg, data.features, data.classes, train_rows, cfg.seed + 104729u * static_cast<unsigned>(fold + 1));
    rec.support = model.support;
    rec.selected = model.support.size();
    rec.penalties = model.penalties;
    rec.warnings = model.warnings;
    const FeatureMatrix Q = model.transform(data.features.select_rows(test_rows));
    std::vector<double> latency;
    for (Index i = 0; i < Q.n_samples(); ++i) {
      const FeatureMatrix row(Q.values().row(i));
      const auto t0 = std::chrono::steady_clock::now();
      const auto scores = elm_predict(model.elm, row);
      const auto t1 = std::chrono::steady_clock::now();
      latency.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      rec.predictions.push_back(scores.front().predicted_class);
    }
    std::vector<int> truth;
    for (auto r : test_rows) truth.push_back(data.classes[r]);
    rec.accuracy = accuracy(rec.predictions, truth);
    rec.time_ms = median(latency);
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure = e.what();
    rec.failure_kind = e.kind();
    rec.predictions.clear();
  }
  return rec;
}

inline ArmReport run_arm(const PipelineConfig& cfg, const Dataset& data, const std::vector<IndexSet>& folds) {
  ArmReport arm;
  arm.selector = to_string(cfg.selector);
  arm.fold_hash = fold_hash(folds);
  for (std::size_t f = 0; f < folds.size(); ++f) arm.folds.push_back(evaluate_fold(cfg, data, folds[f], static_cast<int>(f)));
  arm.groups = detail::aggregate(cfg, arm.folds, data.classes);
  return arm;
}

inline void check_dataset(const Dataset& data) {
  if (static_cast<Index>(data.classes.size()) != data.features.n_samples())
    throw DimensionError("dataset has " + std::to_string(data.features.n_samples()) + " rows but " +
                         std::to_string(data.classes.size()) + " labels");
  for (int c : data.classes)
    if (c < 0) throw DataError("class labels must be non-negative indices");
}

inline EvaluationReport run_pipeline(const PipelineConfig& cfg, const Dataset& data) {
  check_dataset(data);
  cfg.validate(data.classes.size());
  EvaluationReport report;
  report.arms.push_back(run_arm(cfg, data, detail::partition(cfg, data.classes.size())));
  return report;
}

inline EvaluationReport compare_selectors(const PipelineConfig& cfg, const Dataset& data,
                                          SelectorKind baseline = SelectorKind::lasso,
                                          SelectorKind proposed = SelectorKind::elastic_net_cd) {
  check_dataset(data);
  const auto folds = detail::partition(cfg, data.classes.size());
  EvaluationReport report;
  for (auto kind : {baseline, proposed}) {
    PipelineConfig arm_cfg = cfg;
    arm_cfg.selector = kind;
    if (kind == SelectorKind::lasso) arm_cfg.lambda2 = 0.0;
    arm_cfg.validate(data.classes.size());
    report.arms.push_back(run_arm(arm_cfg, data, folds));
  }
  const auto& a = report.arms[0];
  const auto& b = report.arms[1];
  ComparisonBlock cmp{a.selector, b.selector, a.fold_hash == b.fold_hash};
  std::size_t counted = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (a.folds[f].failed || b.folds[f].failed) continue;
    FoldDelta d{static_cast<int>(f), b.folds[f].accuracy - a.folds[f].accuracy, b.folds[f].time_ms - a.folds[f].time_ms};
    cmp.mean_accuracy_delta += d.accuracy_delta;
    cmp.mean_time_delta_ms += d.time_delta_ms;
    cmp.deltas.push_back(d);
    ++counted;
  }
  if (counted) {
    cmp.mean_accuracy_delta /= double(counted);
    cmp.mean_time_delta_ms /= double(counted);
  }
  report.comparison = cmp;
  return report;
}

}  // namespace enreg
