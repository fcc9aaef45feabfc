// enreg: batch front end for the feature-selection and classification pipeline.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enreg/cnn.hpp"
#include "enreg/io.hpp"
#include "enreg/patch.hpp"
#include "enreg/pipeline.hpp"
#include "enreg/report.hpp"
#include "enreg/report_json.hpp"
#include "enreg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace enreg;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 1;
  int k_folds = 10;
  std::string selector = "elastic_net_cd";
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  bool no_pca = false;
  std::optional<double> pca_retain;  // < 1 fraction of variance, >= 1 component count
  std::optional<double> elm_gamma;
  double elm_ridge = kDefaultRidgeC;
  std::optional<double> holdout;
  bool header = false;
  std::string out_dir = ".";
};

struct InputOptions {
  std::string input;            // feature CSV, labels in label_column
  int label_column = -1;        // -1: last column
  std::string volumes_dir;      // alternative: volumes + labels.txt
  std::string net;              // network for volume input
  std::size_t centers = kDefaultCenterCount;
  std::string morph;            // optional extra columns, same row order
  std::vector<std::string> group_names;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 2;
}

std::string out_path(const GlobalOptions& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

PipelineConfig pipeline_config(const GlobalOptions& g, const InputOptions& in) {
  PipelineConfig cfg;
  cfg.selector = parse_selector(g.selector);
  cfg.use_pca = !g.no_pca;
  if (g.pca_retain) {
    const double r = *g.pca_retain;
    if (!(r > 0.0)) throw ConfigError("pca-retain must be > 0");
    if (r < 1.0) {
      cfg.pca_retain = VarianceFraction{r};
    } else {
      if (r != std::floor(r)) throw ConfigError("pca-retain >= 1 must be a whole component count");
      cfg.pca_retain = ComponentCount{static_cast<Index>(r)};
    }
  }
  cfg.lambda1 = g.lambda1;
  cfg.lambda2 = g.lambda2;
  cfg.elm_gamma = g.elm_gamma;
  cfg.elm_ridge = g.elm_ridge;
  cfg.k_folds = g.k_folds;
  cfg.seed = g.seed;
  cfg.holdout = g.holdout;
  cfg.group_names = in.group_names;
  return cfg;
}

std::size_t csv_width(const std::string& path, bool header) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (header) std::getline(f, line);
  while (std::getline(f, line))
    if (!detail::trim(line).empty()) return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  throw EmptyInputError("'" + path + "' has no data rows");
}

std::vector<int> to_classes(const Eigen::VectorXd& labels) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(labels.size()));
  for (Index i = 0; i < labels.size(); ++i) {
    const double v = labels(i);
    if (v != std::floor(v) || v < 0) throw DataError("class labels must be non-negative integers, got " + detail::format_double(v));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<int> read_label_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<int> labels;
  std::string line;
  while (std::getline(f, line)) {
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto v = detail::parse_double(t);
    if (!v || *v != std::floor(*v) || *v < 0) throw FormatError("bad label '" + std::string(t) + "' in " + path);
    labels.push_back(static_cast<int>(*v));
  }
  return labels;
}

std::vector<Volume3D> read_volumes(const std::string& dir, std::size_t count) {
  std::vector<Volume3D> vols;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "vol_%04zu.r3d", i);
    vols.push_back(load_volume_raw3d((fs::path(dir) / name).string()));
  }
  return vols;
}

CnnNetwork load_net(const std::string& path) { return cnn_from_blocks(TextBlocks::read_file(path)); }

std::vector<Voxel> centers_for(const Volume3D& v, std::size_t n) { return lattice_centers(v.dims(), n); }

Dataset load_dataset(const GlobalOptions& g, const InputOptions& in) {
  Dataset data;
  if (!in.volumes_dir.empty()) {
    if (in.net.empty()) throw ConfigError("--volumes-dir needs --net");
    data.classes = read_label_file((fs::path(in.volumes_dir) / "labels.txt").string());
    if (data.classes.empty()) throw EmptyInputError("no labels in " + in.volumes_dir);
    const auto vols = read_volumes(in.volumes_dir, data.classes.size());
    const auto net = load_net(in.net);
    const auto centers = centers_for(vols.front(), in.centers);
    data.features = extract_feature_matrix(net, vols, centers, in.centers == kDefaultCenterCount);
  } else {
    if (in.input.empty()) throw ConfigError("no input: give --input or --volumes-dir");
    const std::size_t width = csv_width(in.input, g.header);
    if (width < 2) throw DataError("feature CSV needs at least one feature column and a label column");
    const std::size_t col = in.label_column < 0 ? width - 1 : static_cast<std::size_t>(in.label_column);
    if (col >= width) throw ConfigError("label column " + std::to_string(col) + " is outside the CSV");
    auto csv = load_feature_csv(in.input, CsvOptions{col, g.header});
    data.classes = to_classes(csv.labels->values());
    data.features = std::move(csv.features);
  }
  if (!in.morph.empty()) {
    auto extra = load_feature_csv(in.morph, CsvOptions{std::nullopt, g.header});
    if (extra.features.n_samples() != data.features.n_samples())
      throw DimensionError("morphological CSV has " + std::to_string(extra.features.n_samples()) + " rows, expected " +
                           std::to_string(data.features.n_samples()));
    Eigen::MatrixXd joined(data.features.n_samples(), data.features.n_features() + extra.features.n_features());
    joined << data.features.values(), extra.features.values();
    data.features = FeatureMatrix(std::move(joined));
  }
  return data;
}

void add_input_options(CLI::App* sub, InputOptions& in) {
  sub->add_option("--input,-i", in.input, "Feature CSV with class labels in one column");
  sub->add_option("--label-column", in.label_column, "0-based label column (default: last)");
  sub->add_option("--volumes-dir", in.volumes_dir, "Directory with vol_NNNN.r3d and labels.txt");
  sub->add_option("--net", in.net, "Trained network for volume input");
  sub->add_option("--centers", in.centers, "Patch centers per volume (151 enforces the standard count)");
  sub->add_option("--morph", in.morph, "Extra feature CSV (no labels) appended column-wise");
  sub->add_option("--group-names", in.group_names, "Display names for classes 0, 1, ...")->delimiter(',');
}

void write_reports(const GlobalOptions& g, const EvaluationReport& r, bool mask) {
  fs::create_directories(g.out_dir);
  for (const auto& p : emit_report_files(r, g.out_dir, EmitOptions{mask})) std::cerr << "wrote " << p << "\n";
  save_report_json(out_path(g, "report.json"), r);
  std::cout << emit_text_table(r, EmitOptions{mask});
}

// A run whose arm lost every fold has produced nothing usable.
int all_folds_failed_code(const EvaluationReport& r) {
  for (const auto& arm : r.arms)
    if (!arm.folds.empty() && arm.failed_folds() == arm.folds.size()) return exit_code(arm.folds.front().failure_kind);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse feature selection and kernel ELM classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Config file with key = value lines (flags override it)");

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--k-folds", g.k_folds, "Cross-validation folds");
  app.add_option("--selector", g.selector, "lasso | elastic_net_cd | elastic_net_svm | none");
  app.add_option("--lambda1", g.lambda1, "L1 penalty (default: internal validation)");
  app.add_option("--lambda2", g.lambda2, "L2 penalty (default: 0.5 * lambda1, 0 for lasso)");
  app.add_flag("--no-pca", g.no_pca, "Skip PCA before selection");
  app.add_option("--pca-retain", g.pca_retain, "Variance fraction (< 1) or component count (>= 1)");
  app.add_option("--elm-gamma", g.elm_gamma, "RBF gamma (default: median heuristic)");
  app.add_option("--elm-ridge", g.elm_ridge, "ELM ridge constant C");
  app.add_option("--holdout", g.holdout, "Test fraction for one fixed split instead of k folds");
  app.add_flag("--header", g.header, "Input CSV files have a header row");
  app.add_option("--out-dir", g.out_dir, "Output directory");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  SyntheticSpec spec;
  std::size_t n_volumes = 0;
  std::uint32_t volume_size = 40;
  gen->add_option("--samples", spec.n_samples);
  gen->add_option("--groups", spec.n_informative_groups, "Informative correlated groups");
  gen->add_option("--group-size", spec.group_size);
  gen->add_option("--correlation", spec.within_group_correlation, "Within-group correlation");
  gen->add_option("--noise", spec.noise_std, "Label noise standard deviation");
  gen->add_option("--noise-features", spec.n_noise_features);
  gen->add_flag("--duplicates", spec.exact_duplicates, "Make group members exact copies");
  gen->add_option("--volumes", n_volumes, "Write this many blob volumes instead of a feature table");
  gen->add_option("--volume-size", volume_size, "Edge length of generated volumes");

  // extract
  auto* ext = app.add_subcommand("extract", "Volumes + network -> feature CSV");
  InputOptions ext_in;
  ext->add_option("--volumes-dir", ext_in.volumes_dir)->required();
  ext->add_option("--net", ext_in.net)->required();
  ext->add_option("--centers", ext_in.centers, "Patch centers per volume (151 enforces the standard count)");

  // train-cnn
  auto* tcnn = app.add_subcommand("train-cnn", "Train the patch network");
  std::string tc_volumes;
  std::size_t tc_synthetic = 0;
  std::size_t tc_centers = 8;
  int tc_input = kPatchSize;
  SgdOptions sgd;
  tcnn->add_option("--volumes-dir", tc_volumes, "Train on patches from labelled volumes");
  tcnn->add_option("--synthetic", tc_synthetic, "Train on this many synthetic blob patches");
  tcnn->add_option("--centers", tc_centers, "Patch centers per volume");
  tcnn->add_option("--input-size", tc_input, "Patch edge length");
  tcnn->add_option("--epochs", sgd.epochs);
  tcnn->add_option("--learning-rate", sgd.learning_rate);
  tcnn->add_option("--batch-size", sgd.batch_size);

  // select
  auto* sel = app.add_subcommand("select", "Fit the selector on all rows and write coefficients");
  InputOptions sel_in;
  add_input_options(sel, sel_in);
  int sel_target = -1;
  sel->add_option("--target-class", sel_target, "One-vs-rest target (default: highest class)");

  // evaluate / compare
  auto* eval = app.add_subcommand("evaluate", "Cross-validated pipeline evaluation");
  InputOptions eval_in;
  add_input_options(eval, eval_in);
  bool eval_mask = false;
  eval->add_flag("--mask-timing", eval_mask, "Print timing cells as placeholders");

  auto* cmp = app.add_subcommand("compare", "Lasso vs elastic net on identical folds");
  InputOptions cmp_in;
  add_input_options(cmp, cmp_in);
  std::string baseline = "lasso", proposed = "elastic_net_cd";
  bool cmp_mask = false;
  cmp->add_option("--baseline", baseline);
  cmp->add_option("--proposed", proposed);
  cmp->add_flag("--mask-timing", cmp_mask, "Print timing cells as placeholders");

  // report
  auto* rep = app.add_subcommand("report", "Re-emit a saved report");
  std::string rep_from;
  std::string rep_format;
  bool rep_mask = false;
  rep->add_option("--from", rep_from, "report.json written by evaluate or compare")->required();
  rep->add_option("--format", rep_format, "text | csv | plot (default: write all three)");
  rep->add_flag("--mask-timing", rep_mask);

  for (auto* s : {gen, ext, tcnn, sel, eval, cmp, rep}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      spec.seed = g.seed;
      if (n_volumes > 0) {
        if (volume_size < 1) throw ConfigError("volume size must be positive");
        const Volume3D::Dims dims{volume_size, volume_size, volume_size};
        const auto blobs = lattice_centers(dims, 8);
        std::ofstream labels(out_path(g, "labels.txt"));
        if (!labels) throw IoError("cannot write labels.txt");
        for (std::size_t i = 0; i < n_volumes; ++i) {
          const int label = static_cast<int>(i % 2);
          char name[32];
          std::snprintf(name, sizeof name, "vol_%04zu.r3d", i);
          save_volume_raw3d(out_path(g, name), synthetic_blob_volume(dims, blobs, label, g.seed * 7919 + i));
          labels << label << "\n";
        }
        std::cerr << "wrote " << n_volumes << " volumes to " << g.out_dir << "\n";
        return 0;
      }
      const auto ds = generate_synthetic(spec);
      const Eigen::VectorXd y = ds.labels.values();
      Eigen::VectorXd classes(y.size());
      for (Index i = 0; i < y.size(); ++i) classes(i) = y(i) > 0 ? 1.0 : 0.0;
      write_feature_csv(out_path(g, "features.csv"), ds.features.values(), &classes);
      std::ofstream truth(out_path(g, "truth.txt"));
      for (auto j : ds.ground_truth_support) truth << j << "\n";
      std::cerr << "wrote " << ds.features.n_samples() << " x " << ds.features.n_features() << " features to "
                << out_path(g, "features.csv") << "\n";
      return 0;
    }

    if (*ext) {
      const auto classes = read_label_file((fs::path(ext_in.volumes_dir) / "labels.txt").string());
      if (classes.empty()) throw EmptyInputError("no labels in " + ext_in.volumes_dir);
      const auto vols = read_volumes(ext_in.volumes_dir, classes.size());
      const auto net = load_net(ext_in.net);
      const auto centers = centers_for(vols.front(), ext_in.centers);
      const auto X = extract_feature_matrix(net, vols, centers, ext_in.centers == kDefaultCenterCount);
      Eigen::VectorXd labels(static_cast<Index>(classes.size()));
      for (std::size_t i = 0; i < classes.size(); ++i) labels(static_cast<Index>(i)) = classes[i];
      write_feature_csv(out_path(g, "features.csv"), X.values(), &labels);
      std::cerr << "wrote " << X.n_samples() << " x " << X.n_features() << " features\n";
      return 0;
    }

    if (*tcnn) {
      CnnArchitecture arch;
      arch.input_size = tc_input;
      std::vector<Eigen::MatrixXd> images;
      std::vector<int> labels;
      if (!tc_volumes.empty()) {
        const auto classes = read_label_file((fs::path(tc_volumes) / "labels.txt").string());
        if (classes.empty()) throw EmptyInputError("no labels in " + tc_volumes);
        const auto vols = read_volumes(tc_volumes, classes.size());
        for (std::size_t i = 0; i < vols.size(); ++i)
          for (const auto& c : centers_for(vols[i], tc_centers)) {
            images.push_back(extract_patch_2_5d(vols[i], c, tc_input).image);
            labels.push_back(classes[i]);
          }
      } else if (tc_synthetic > 0) {
        auto set = synthetic_blob_patches(tc_synthetic, tc_input, 3, g.seed);
        images = std::move(set.images);
        labels = std::move(set.labels);
      } else {
        throw ConfigError("train-cnn needs --volumes-dir or --synthetic");
      }
      int n_classes = 0;
      for (int l : labels) n_classes = std::max(n_classes, l + 1);
      arch.n_classes = std::max(2, n_classes);
      sgd.seed = g.seed;
      auto result = cnn_train_sgd(CnnNetwork::initialize(arch, g.seed), images, labels, sgd);
      if (result.diverged) std::cerr << "warning: training diverged; keeping the last finite parameters\n";
      cnn_to_blocks(result.net).write_file(out_path(g, "net.txt"));
      const auto pred = cnn_predict(result.net, images);
      std::cerr << "final loss " << result.final_loss << ", training accuracy " << accuracy(pred, labels) << "\n";
      return 0;
    }

    if (*sel) {
      const auto cfg = pipeline_config(g, sel_in);
      const auto data = load_dataset(g, sel_in);
      check_dataset(data);
      int max_class = 0;
      for (int c : data.classes) max_class = std::max(max_class, c);
      const int target = sel_target < 0 ? max_class : sel_target;
      FeatureMatrix Xs = standardize_columns(data.features).matrix;
      if (cfg.use_pca) {
        const auto pca = pca_fit(Xs, cfg.pca_retain);
        Xs = standardize_columns(pca_transform(pca, Xs)).matrix;
        std::cerr << "coefficients refer to " << pca.components.rows() << " principal components (use --no-pca for original columns)\n";
      }
      const LabelVector y = one_vs_rest(data.classes, target);
      PenaltyConfig pc;
      pc.stop_thr = cfg.stop_thr;
      if (cfg.lambda1) {
        pc.lambda1 = *cfg.lambda1;
      } else {
        const auto frac = detail::select_grid_fraction(cfg, Xs, y, g.seed);
        pc.lambda1 = frac * lambda1_max(Xs, y);
      }
      pc.lambda2 = detail::lambda2_for(cfg, pc.lambda1);
      const auto fit = fit_selector(cfg.selector, Xs, y, pc);
      std::ofstream out(out_path(g, "coefficients.txt"));
      if (!out) throw IoError("cannot write coefficients.txt");
      out << coefficients_to_text(fit.coefficients);
      const auto support = select_support(fit, kSupportThreshold);
      std::cout << "selector " << to_string(cfg.selector) << " lambda1 " << pc.lambda1 << " lambda2 " << pc.lambda2
                << " selected " << support.size() << " of " << Xs.n_features() << "\n";
      return 0;
    }

    if (*eval) {
      const auto cfg = pipeline_config(g, eval_in);
      const auto r = run_pipeline(cfg, load_dataset(g, eval_in));
      write_reports(g, r, eval_mask);
      return all_folds_failed_code(r);
    }

    if (*cmp) {
      const auto cfg = pipeline_config(g, cmp_in);
      const auto r = compare_selectors(cfg, load_dataset(g, cmp_in), parse_selector(baseline), parse_selector(proposed));
      write_reports(g, r, cmp_mask);
      return all_folds_failed_code(r);
    }

    if (*rep) {
      const auto r = load_report_json(rep_from);
      if (rep_format.empty()) {
        write_reports(g, r, rep_mask);
      } else {
        std::cout << emit_report(r, parse_report_format(rep_format), EmitOptions{rep_mask});
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
