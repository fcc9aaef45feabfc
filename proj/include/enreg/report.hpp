#pragma once

// Report emitters: text table, comma-separated values and plot data.
// Tables give times in seconds; plot data gives them in milliseconds.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/pipeline.hpp"

namespace enreg {

enum class ReportFormat { text_table, csv, plot_data };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "text" || s == "text-table") return ReportFormat::text_table;
  if (s == "csv") return ReportFormat::csv;
  if (s == "plot" || s == "plot-data") return ReportFormat::plot_data;
  throw ConfigError("unknown report format '" + s + "' (text, csv, plot)");
}

inline std::string report_file_name(ReportFormat f) {
  switch (f) {
    case ReportFormat::text_table: return "report.txt";
    case ReportFormat::csv: return "report.csv";
    case ReportFormat::plot_data: return "plot.csv";
  }
  return "report";
}

struct EmitOptions {
  bool mask_timing = false;  // replace timing values by a placeholder (golden files)
};

inline constexpr const char* kMaskedTime = "<time>";

namespace fmt {

inline std::string num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// 0.8605 -> "86.05%"
inline std::string percent(double fraction) { return num("%.2f", 100.0 * fraction) + "%"; }

/// Seconds with three significant digits and at least three decimals: 0.323 -> "0.323s".
inline std::string seconds(double s) {
  int decimals = 3;
  if (s > 0.0) decimals = std::max(3, 2 - static_cast<int>(std::floor(std::log10(s))));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, s);
  return std::string(buf) + "s";
}

/// Milliseconds for plot data: 0.323 s -> "323".
inline std::string millis(double ms) { return num("%.6g", ms); }

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace fmt

inline constexpr const char* kReportFooter =
    "Processing time is the median per-sample classification latency (ELM prediction) over each test fold; "
    "tables show seconds, plot data shows milliseconds.";

inline std::string emit_text_table(const EvaluationReport& r, const EmitOptions& opt = {}) {
  auto time_cell = [&opt](double ms) { return opt.mask_timing ? std::string(kMaskedTime) : fmt::seconds(ms / 1000.0); };
  std::string out;
  for (const auto& arm : r.arms) {
    out += "Selector: " + arm.selector + " (" + std::to_string(arm.folds.size()) + " folds";
    if (arm.failed_folds()) out += ", " + std::to_string(arm.failed_folds()) + " failed";
    out += ")\n";
    out += fmt::pad("Group", 14) + fmt::pad("Accuracy (%)", 14) + fmt::pad("Sigma (%)", 11) +
           fmt::pad("Processing time (sec)", 23) + "Selected features\n";
    for (const auto& g : arm.groups)
      out += fmt::pad(g.group, 14) + fmt::pad(fmt::percent(g.accuracy), 14) + fmt::pad(fmt::percent(g.accuracy_std), 11) +
             fmt::pad(time_cell(g.time_ms), 23) + fmt::num("%.1f", g.selected) + "\n";
    for (const auto& f : arm.folds) {
      if (f.failed) out += "  fold " + std::to_string(f.fold) + " failed: " + f.failure + "\n";
      for (const auto& w : f.warnings) out += "  fold " + std::to_string(f.fold) + " warning: " + w + "\n";
    }
    out += "\n";
  }
  if (r.comparison && r.arms.size() == 2) {
    const auto& c = *r.comparison;
    const auto& a = r.arms[0];
    const auto& b = r.arms[1];
    out += "Comparison: " + c.baseline + " (baseline) vs " + c.proposed + " (proposed)";
    out += c.identical_folds ? ", identical folds\n" : ", FOLDS DIFFER\n";
    out += fmt::pad("Group", 14) + fmt::pad("Baseline (%)", 14) + fmt::pad("Proposed (%)", 14) +
           fmt::pad("Baseline (sec)", 16) + "Proposed (sec)\n";
    for (std::size_t i = 0; i < a.groups.size() && i < b.groups.size(); ++i)
      out += fmt::pad(a.groups[i].group, 14) + fmt::pad(fmt::percent(a.groups[i].accuracy), 14) +
             fmt::pad(fmt::percent(b.groups[i].accuracy), 14) + fmt::pad(time_cell(a.groups[i].time_ms), 16) +
             time_cell(b.groups[i].time_ms) + "\n";
    out += fmt::pad("Fold", 6) + fmt::pad("Accuracy delta (%)", 20) + "Time delta (sec)\n";
    for (const auto& d : c.deltas)
      out += fmt::pad(std::to_string(d.fold), 6) + fmt::pad(fmt::num("%+.2f", 100.0 * d.accuracy_delta), 20) +
             (opt.mask_timing ? std::string(kMaskedTime) : fmt::num("%+.3g", d.time_delta_ms / 1000.0)) + "\n";
    out += fmt::pad("mean", 6) + fmt::pad(fmt::num("%+.2f", 100.0 * c.mean_accuracy_delta), 20) +
           (opt.mask_timing ? std::string(kMaskedTime) : fmt::num("%+.3g", c.mean_time_delta_ms / 1000.0)) + "\n\n";
  }
  out += std::string(kReportFooter) + "\n";
  return out;
}

inline std::string emit_csv(const EvaluationReport& r, const EmitOptions& opt = {}) {
  auto time_cell = [&opt](double ms) { return opt.mask_timing ? std::string(kMaskedTime) : fmt::num("%.6g", ms); };
  std::string out = "selector,group,folds,accuracy,accuracy_std,time_ms,selected_features\n";
  for (const auto& arm : r.arms)
    for (const auto& g : arm.groups)
      out += arm.selector + "," + g.group + "," + std::to_string(g.folds) + "," + fmt::num("%.6f", g.accuracy) + "," +
             fmt::num("%.6f", g.accuracy_std) + "," + time_cell(g.time_ms) + "," + fmt::num("%.1f", g.selected) +
             "\n";
  if (r.comparison) {
    out += "\nfold,accuracy_delta,time_delta_ms\n";
    for (const auto& d : r.comparison->deltas)
      out += std::to_string(d.fold) + "," + fmt::num("%.6f", d.accuracy_delta) + "," + time_cell(d.time_delta_ms) + "\n";
    out += "mean," + fmt::num("%.6f", r.comparison->mean_accuracy_delta) + "," +
           time_cell(r.comparison->mean_time_delta_ms) + "\n";
  }
  return out;
}

/// Rows group,variant,metric,value: accuracy in percent, time in milliseconds.
inline std::string emit_plot_data(const EvaluationReport& r, const EmitOptions& opt = {}) {
  std::string out = "group,variant,metric,value\n";
  if (r.arms.empty()) return out;
  for (std::size_t g = 0; g < r.arms.front().groups.size(); ++g)
    for (const auto& arm : r.arms) {
      if (g >= arm.groups.size()) continue;
      const auto& rec = arm.groups[g];
      out += rec.group + "," + arm.selector + ",accuracy_percent," + fmt::num("%.2f", 100.0 * rec.accuracy) + "\n";
      out += rec.group + "," + arm.selector + ",time_ms," +
             (opt.mask_timing ? std::string(kMaskedTime) : fmt::millis(rec.time_ms)) + "\n";
    }
  return out;
}

inline std::string emit_report(const EvaluationReport& r, ReportFormat f, const EmitOptions& opt = {}) {
  switch (f) {
    case ReportFormat::text_table: return emit_text_table(r, opt);
    case ReportFormat::csv: return emit_csv(r, opt);
    case ReportFormat::plot_data: return emit_plot_data(r, opt);
  }
  return {};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Writes all three formats into dir; returns the written paths.
inline std::vector<std::string> emit_report_files(const EvaluationReport& r, const std::string& dir,
                                                  const EmitOptions& opt = {}) {
  std::vector<std::string> paths;
  for (auto f : {ReportFormat::text_table, ReportFormat::csv, ReportFormat::plot_data}) {
    const std::string path = dir + "/" + report_file_name(f);
    write_text_file(path, emit_report(r, f, opt));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace enreg
