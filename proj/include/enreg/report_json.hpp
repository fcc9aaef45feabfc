#pragma once

// JSON round trip for EvaluationReport, used to re-emit saved reports.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "enreg/errors.hpp"
#include "enreg/pipeline.hpp"

namespace enreg {

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  using nlohmann::json;
  json arms = json::array();
  for (const auto& arm : r.arms) {
    json folds = json::array();
    for (const auto& f : arm.folds) {
      json penalties = json::array();
      for (const auto& p : f.penalties)
        penalties.push_back({{"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"grid_fraction", p.grid_fraction}});
      folds.push_back({{"fold", f.fold},
                       {"n_train", f.n_train},
                       {"n_test", f.n_test},
                       {"failed", f.failed},
                       {"failure", f.failure},
                       {"accuracy", f.accuracy},
                       {"time_ms", f.time_ms},
                       {"selected", f.selected},
                       {"support", f.support},
                       {"penalties", penalties},
                       {"warnings", f.warnings},
                       {"test_rows", f.test_rows},
                       {"predictions", f.predictions}});
    }
    json groups = json::array();
    for (const auto& g : arm.groups)
      groups.push_back({{"group", g.group},
                        {"folds", g.folds},
                        {"accuracy", g.accuracy},
                        {"accuracy_std", g.accuracy_std},
                        {"time_ms", g.time_ms},
                        {"selected", g.selected}});
    arms.push_back({{"selector", arm.selector}, {"fold_hash", arm.fold_hash}, {"folds", folds}, {"groups", groups}});
  }
  json out{{"arms", arms}};
  if (r.comparison) {
    const auto& c = *r.comparison;
    json deltas = json::array();
    for (const auto& d : c.deltas)
      deltas.push_back({{"fold", d.fold}, {"accuracy_delta", d.accuracy_delta}, {"time_delta_ms", d.time_delta_ms}});
    out["comparison"] = {{"baseline", c.baseline},
                         {"proposed", c.proposed},
                         {"identical_folds", c.identical_folds},
                         {"deltas", deltas},
                         {"mean_accuracy_delta", c.mean_accuracy_delta},
                         {"mean_time_delta_ms", c.mean_time_delta_ms}};
  }
  return out;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    for (const auto& a : j.at("arms")) {
      ArmReport arm;
      arm.selector = a.at("selector").get<std::string>();
      arm.fold_hash = a.at("fold_hash").get<std::uint64_t>();
      for (const auto& f : a.at("folds")) {
        FoldRecord rec;
        rec.fold = f.at("fold").get<int>();
        rec.n_train = f.at("n_train").get<std::size_t>();
        rec.n_test = f.at("n_test").get<std::size_t>();
        rec.failed = f.at("failed").get<bool>();
        rec.failure = f.at("failure").get<std::string>();
        rec.accuracy = f.at("accuracy").get<double>();
        rec.time_ms = f.at("time_ms").get<double>();
        rec.selected = f.at("selected").get<std::size_t>();
        rec.support = f.at("support").get<IndexSet>();
        for (const auto& p : f.at("penalties"))
          rec.penalties.push_back(
              {p.at("lambda1").get<double>(), p.at("lambda2").get<double>(), p.at("grid_fraction").get<double>()});
        rec.warnings = f.at("warnings").get<std::vector<std::string>>();
        rec.test_rows = f.at("test_rows").get<std::vector<std::size_t>>();
        rec.predictions = f.at("predictions").get<std::vector<int>>();
        arm.folds.push_back(std::move(rec));
      }
      for (const auto& g : a.at("groups"))
        arm.groups.push_back({g.at("group").get<std::string>(), g.at("folds").get<std::size_t>(),
                              g.at("accuracy").get<double>(), g.at("accuracy_std").get<double>(),
                              g.at("time_ms").get<double>(), g.at("selected").get<double>()});
      r.arms.push_back(std::move(arm));
    }
    if (j.contains("comparison")) {
      const auto& c = j.at("comparison");
      ComparisonBlock cmp{c.at("baseline").get<std::string>(), c.at("proposed").get<std::string>(),
                          c.at("identical_folds").get<bool>()};
      for (const auto& d : c.at("deltas"))
        cmp.deltas.push_back(
            {d.at("fold").get<int>(), d.at("accuracy_delta").get<double>(), d.at("time_delta_ms").get<double>()});
      cmp.mean_accuracy_delta = c.at("mean_accuracy_delta").get<double>();
      cmp.mean_time_delta_ms = c.at("mean_time_delta_ms").get<double>();
      r.comparison = std::move(cmp);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report JSON: ") + e.what());
  }
}

inline void save_report_json(const std::string& path, const EvaluationReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << report_to_json(r).dump(2) << "\n";
}

inline EvaluationReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

}  // namespace enreg
