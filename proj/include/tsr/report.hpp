#pragma once

// JSON form of ExperimentReport. Keys are sorted; non-finite reals are
// written as null and read back as NaN (or +inf for bounds).

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tsr/error.hpp"
#include "tsr/experiment.hpp"
#include "tsr/version.hpp"

namespace tsr {

using Json = nlohmann::json;

namespace detail {

inline Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double real_or(const Json& j, const char* key, double missing) {
  if (!j.contains(key) || j.at(key).is_null()) return missing;
  return j.at(key).get<double>();
}

inline Json summary_json(const Summary& s) {
  return Json{{"count", s.count}, {"mean", real(s.mean)}, {"std", real(s.std)}};
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  Json radius = Json::array();
  for (double r : c.radius_grid) radius.push_back(r);
  return Json{{"algorithm", to_string(c.algorithm)},
              {"auto_grid_points", c.auto_grid_points},
              {"c", c.c},
              {"c_l", c.c_l},
              {"c_prime", c.c_prime},
              {"c_u", c.c_u},
              {"center_labels", c.center_labels},
              {"data_path", c.data_path},
              {"delta", c.delta},
              {"fallback", c.fallback == Fallback::Error ? "error" : "zero"},
              {"graph_path", c.graph_path},
              {"m_fraction", c.m_fraction},
              {"mu", c.mu},
              {"partitions", c.partitions},
              {"radius_grid", radius},
              {"seed", c.seed},
              {"sigma", c.sigma ? Json(*c.sigma) : Json("cv")},
              {"target_scale", c.target_scale},
              {"weighting", c.weighting == Weighting::Gaussian ? "gaussian" : "inverse-distance"}};
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  c.auto_grid_points = j.value("auto_grid_points", c.auto_grid_points);
  c.c = j.at("c").get<double>();
  c.c_l = j.at("c_l").get<double>();
  c.c_prime = j.at("c_prime").get<double>();
  c.c_u = j.at("c_u").get<double>();
  c.center_labels = j.value("center_labels", true);
  c.data_path = j.value("data_path", std::string());
  c.delta = j.at("delta").get<double>();
  c.fallback = j.value("fallback", std::string("error")) == "zero" ? Fallback::Zero : Fallback::Error;
  c.graph_path = j.value("graph_path", std::string());
  c.m_fraction = j.at("m_fraction").get<double>();
  c.mu = j.at("mu").get<double>();
  c.partitions = j.at("partitions").get<Index>();
  c.radius_grid = j.value("radius_grid", std::vector<double>{});
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("sigma").is_number()) c.sigma = j.at("sigma").get<double>();
  c.target_scale = j.value("target_scale", 1.0);
  c.weighting = j.value("weighting", std::string("gaussian")) == "gaussian" ? Weighting::Gaussian
                                                                            : Weighting::InverseDistance;
  return c;
}

inline Json to_json(const RadiusEvaluation& e) {
  return Json{{"beta", detail::real(e.beta)},           {"beta_loc", detail::real(e.beta_loc)},
              {"m_r", e.m_r},                           {"note", e.note},
              {"objective", detail::real(e.objective)}, {"r", e.r},
              {"slack", detail::real(e.slack)},         {"solved", e.solved},
              {"test_mse", detail::real(e.test_mse)},   {"train_mse", detail::real(e.train_mse)}};
}

inline RadiusEvaluation radius_from_json(const Json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  RadiusEvaluation e;
  e.beta = detail::real_or(j, "beta", inf);
  e.beta_loc = detail::real_or(j, "beta_loc", inf);
  e.m_r = j.at("m_r").get<Index>();
  e.note = j.value("note", std::string());
  e.objective = detail::real_or(j, "objective", inf);
  e.r = j.at("r").get<double>();
  e.slack = detail::real_or(j, "slack", inf);
  e.solved = j.at("solved").get<bool>();
  e.test_mse = detail::real_or(j, "test_mse", nan);
  e.train_mse = detail::real_or(j, "train_mse", nan);
  return e;
}

inline Json to_json(const PartitionRecord& r) {
  Json sweep = Json::array();
  for (const auto& e : r.sweep) sweep.push_back(to_json(e));
  return Json{{"beta_used", detail::real(r.beta_used)},
              {"bound_value", detail::real(r.bound_value)},
              {"error", r.error.empty() ? Json(nullptr) : Json(r.error)},
              {"index", r.index},
              {"r_star", r.r_star ? Json(*r.r_star) : Json(nullptr)},
              {"residual_bound", detail::real(r.residual_bound)},
              {"seed", r.seed},
              {"sigma", detail::real(r.sigma)},
              {"sweep", sweep},
              {"test_mse", detail::real(r.test_mse)},
              {"train_mse", detail::real(r.train_mse)}};
}

inline PartitionRecord record_from_json(const Json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  PartitionRecord r;
  r.beta_used = detail::real_or(j, "beta_used", inf);
  r.bound_value = detail::real_or(j, "bound_value", inf);
  if (j.contains("error") && !j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  r.index = j.at("index").get<Index>();
  if (j.contains("r_star") && !j.at("r_star").is_null()) r.r_star = j.at("r_star").get<double>();
  r.residual_bound = detail::real_or(j, "residual_bound", nan);
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sigma = detail::real_or(j, "sigma", nan);
  for (const auto& e : j.value("sweep", Json::array())) r.sweep.push_back(radius_from_json(e));
  r.test_mse = detail::real_or(j, "test_mse", nan);
  r.train_mse = detail::real_or(j, "train_mse", nan);
  return r;
}

inline Json to_json(const ExperimentReport& rep) {
  Json records = Json::array();
  for (const auto& r : rep.records) records.push_back(to_json(r));
  Json aggregates{{"beta_used", detail::summary_json(rep.aggregate(&PartitionRecord::beta_used))},
                  {"bound_value", detail::summary_json(rep.aggregate(&PartitionRecord::bound_value))},
                  {"r_star", detail::summary_json(rep.aggregate_r_star())},
                  {"test_mse", detail::summary_json(rep.aggregate(&PartitionRecord::test_mse))},
                  {"train_mse", detail::summary_json(rep.aggregate(&PartitionRecord::train_mse))}};
  Index failed = 0;
  for (const auto& r : rep.records) failed += r.ok() ? 0 : 1;
  return Json{{"aggregates", aggregates},
              {"failed_partitions", failed},
              {"label_bound", rep.label_bound},
              {"m", rep.m},
              {"provenance", Json{{"config", to_json(rep.config)}, {"tool", "tsr"}, {"tool_version", kVersion}}},
              {"records", records},
              {"sample_size", rep.sample_size},
              {"u", rep.u},
              {"warnings", rep.warnings}};
}

inline ExperimentReport report_from_json(const Json& j) {
  ExperimentReport rep;
  try {
    rep.config = config_from_json(j.at("provenance").at("config"));
    rep.label_bound = j.at("label_bound").get<double>();
    rep.m = j.at("m").get<Index>();
    rep.u = j.at("u").get<Index>();
    rep.sample_size = j.at("sample_size").get<Index>();
    rep.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& r : j.at("records")) rep.records.push_back(record_from_json(r));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed report: ") + e.what());
  }
  return rep;
}

inline std::string dump_report(const ExperimentReport& rep) { return to_json(rep).dump(2) + "\n"; }

inline ExperimentReport read_report(const std::string& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::IoError, "cannot open report " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return report_from_json(j);
}

/// One CSV line per partition record.
inline std::string records_csv(const ExperimentReport& rep) {
  std::ostringstream out;
  out << "index,seed,train_mse,test_mse,bound_value,beta_used,r_star,error\n";
  for (const auto& r : rep.records)
    out << r.index << ',' << r.seed << ',' << format_double(r.train_mse) << ','
        << format_double(r.test_mse) << ',' << format_double(r.bound_value) << ','
        << format_double(r.beta_used) << ',' << (r.r_star ? format_double(*r.r_star) : "") << ','
        << (r.error.empty() ? "" : "\"" + r.error + "\"") << '\n';
  return out.str();
}

}  // namespace tsr
