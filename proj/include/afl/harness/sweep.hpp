#pragma once

#include <string>
#include <utility>
#include <vector>

#include "afl/harness/config.hpp"
#include "afl/harness/experiment.hpp"

namespace afl::harness {

struct SweepAxis {
  std::string field;          // dotted path into the config document
  std::vector<json> values;
};

// Parses "partition.alpha=0.1,1,10". Each value is read as JSON when it parses
// and kept as a string otherwise.
inline SweepAxis parse_vary(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("--vary expects <field>=<v1,v2,...>, got '" + spec + "'");
  }
  SweepAxis axis{spec.substr(0, eq), {}};
  std::string rest = spec.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const auto token = rest.substr(start, comma == std::string::npos ? std::string::npos
                                                                     : comma - start);
    if (token.empty()) throw ConfigError("--vary: empty value in '" + spec + "'");
    json v = json::parse(token, nullptr, false);
    axis.values.push_back(v.is_discarded() ? json(token) : std::move(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return axis;
}

struct SweepPoint {
  json value;
  RunReport report;
};

// One run per value of the axis. Per-run output and weight paths are dropped
// so runs do not overwrite each other.
inline std::vector<SweepPoint> run_sweep(const json& base, const SweepAxis& axis,
                                         const ParallelRunner& run = ParallelRunner{}) {
  std::vector<SweepPoint> out;
  for (const auto& value : axis.values) {
    json doc = base;
    set_path(doc, axis.field, value);
    auto cfg = parse_config(doc);
    cfg.output_path.clear();
    cfg.weights_path.clear();
    out.push_back({value, run_experiment(cfg, run)});
  }
  return out;
}

inline json to_json(const SweepAxis& axis, const std::vector<SweepPoint>& points) {
  json runs = json::array();
  for (const auto& p : points) {
    json r = to_json(p.report);
    r["value"] = p.value;
    runs.push_back(std::move(r));
  }
  return {{"schema_version", kReportSchemaVersion}, {"field", axis.field}, {"runs", runs}};
}

}  // namespace afl::harness
