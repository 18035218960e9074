#pragma once

// Experiment configuration and its JSON form. Unknown keys are rejected at
// every nesting level.
//
// {
//   "seed": 7,
//   "dataset": {"kind": "dummy", "n": 10000, "d": 512, "c": 10, "spread": 1.0}
//            | {"kind": "file", "path": "train.afle"},
//   "holdout_fraction": 0.2,
//   "partition": {"strategy": "iid" | "dirichlet" | "sharding", "clients": 100,
//                 "alpha": 0.1,              (dirichlet only)
//                 "shards_per_client": 2},   (sharding only)
//   "gamma": 1.0,
//   "ri": true,
//   "order": {"kind": "sequential" | "shuffled" | "tree", "seed": 3},
//   "baseline": null | {"rounds": 50, "local_epochs": 1, "batch_size": 64,
//                       "learning_rate": 0.05, "seed": 11},
//   "output_path": "report.json",
//   "weights_path": "weights.aflu"
// }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "afl/baseline.hpp"
#include "afl/data.hpp"
#include "afl/error.hpp"

namespace afl::harness {

using json = nlohmann::json;

struct DummySource {
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::uint32_t c = 0;
  double spread = 1.0;
};

struct FileSource {
  std::string path;
};

using DatasetSource = std::variant<DummySource, FileSource>;

struct Sequential {};
struct Shuffled {
  std::uint64_t seed = 0;
};
struct Tree {};
using AggregationOrder = std::variant<Sequential, Shuffled, Tree>;

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSource dataset = DummySource{};
  double holdout_fraction = 0.2;
  data::Strategy strategy = data::Iid{};
  std::size_t clients = 1;
  double gamma = 1.0;
  bool ri = true;
  AggregationOrder order = Sequential{};
  std::optional<baseline::FedAvgConfig> baseline;
  std::string output_path;
  std::string weights_path;

  data::PartitionSpec partition_spec() const {
    return {strategy, clients, derive_seed(seed, stream::kPartition)};
  }
};

namespace detail {

// Reads fields from a JSON object and remembers which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    return convert<T>(key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(where_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key) {
    seen_.insert(key);
    const json& v = j_.at(key);
    const std::string path = where_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned() &&
          !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(path + ": expected a non-negative integer");
      }
    } else {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    }
    return v.get<T>();
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline baseline::FedAvgConfig parse_fedavg(const json& j, std::uint64_t master_seed) {
  detail::ObjectReader r(j, "baseline");
  baseline::FedAvgConfig f;
  f.rounds = r.get_or<std::size_t>("rounds", f.rounds);
  f.local_epochs = r.get_or<std::size_t>("local_epochs", f.local_epochs);
  f.batch_size = r.get_or<std::size_t>("batch_size", f.batch_size);
  f.learning_rate = r.get_or<double>("learning_rate", f.learning_rate);
  f.seed = r.get_or<std::uint64_t>("seed", derive_seed(master_seed, stream::kBaseline));
  r.finish();
  try {
    f.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return f;
}

inline ExperimentConfig parse_config(const json& j) {
  detail::ObjectReader r(j, "config");
  ExperimentConfig cfg;
  cfg.seed = r.get_or<std::uint64_t>("seed", 0);

  {
    detail::ObjectReader ds(r.raw("dataset"), "dataset");
    const auto kind = ds.get<std::string>("kind");
    if (kind == "dummy") {
      DummySource s;
      s.n = ds.get<std::int64_t>("n");
      s.d = ds.get<std::int64_t>("d");
      s.c = ds.get<std::uint32_t>("c");
      s.spread = ds.get_or<double>("spread", 1.0);
      if (s.n < 1 || s.d < 1 || s.c < 1) {
        throw ConfigError("dataset: n, d and c must be >= 1");
      }
      if (s.n % s.c != 0) throw ConfigError("dataset: c must divide n");
      if (!(s.spread >= 0.0)) throw ConfigError("dataset.spread must be >= 0");
      cfg.dataset = s;
    } else if (kind == "file") {
      cfg.dataset = FileSource{ds.get<std::string>("path")};
    } else {
      throw ConfigError("dataset.kind must be 'dummy' or 'file', got '" + kind + "'");
    }
    ds.finish();
  }

  cfg.holdout_fraction = r.get_or<double>("holdout_fraction", cfg.holdout_fraction);
  if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in [0, 1)");
  }

  {
    detail::ObjectReader p(r.raw("partition"), "partition");
    const auto strategy = p.get<std::string>("strategy");
    cfg.clients = p.get<std::size_t>("clients");
    if (cfg.clients < 1) throw ConfigError("partition.clients must be >= 1");
    if (strategy == "iid") {
      cfg.strategy = data::Iid{};
    } else if (strategy == "dirichlet") {
      const double alpha = p.get<double>("alpha");
      if (!(alpha > 0.0)) throw ConfigError("partition.alpha must be > 0");
      cfg.strategy = data::Dirichlet{alpha};
    } else if (strategy == "sharding") {
      const auto s = p.get<std::size_t>("shards_per_client");
      if (s < 1) throw ConfigError("partition.shards_per_client must be >= 1");
      cfg.strategy = data::Sharding{s};
    } else {
      throw ConfigError("partition.strategy must be iid, dirichlet or sharding");
    }
    p.finish();
  }

  cfg.gamma = r.get_or<double>("gamma", cfg.gamma);
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) {
    throw ConfigError("gamma must be finite and >= 0");
  }
  cfg.ri = r.get_or<bool>("ri", cfg.ri);

  if (r.has("order")) {
    detail::ObjectReader o(r.raw("order"), "order");
    const auto kind = o.get<std::string>("kind");
    if (kind == "sequential") {
      cfg.order = Sequential{};
    } else if (kind == "shuffled") {
      cfg.order = Shuffled{o.get<std::uint64_t>("seed")};
    } else if (kind == "tree") {
      cfg.order = Tree{};
    } else {
      throw ConfigError("order.kind must be sequential, shuffled or tree");
    }
    o.finish();
  }

  if (r.has("baseline") && !r.raw("baseline").is_null()) {
    cfg.baseline = parse_fedavg(r.raw("baseline"), cfg.seed);
  }
  cfg.output_path = r.get_or<std::string>("output_path", "");
  cfg.weights_path = r.get_or<std::string>("weights_path", "");
  r.finish();
  return cfg;
}

inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  if (const auto* d = std::get_if<DummySource>(&cfg.dataset)) {
    j["dataset"] = {{"kind", "dummy"}, {"n", d->n}, {"d", d->d}, {"c", d->c},
                    {"spread", d->spread}};
  } else {
    j["dataset"] = {{"kind", "file"},
                    {"path", std::get<FileSource>(cfg.dataset).path}};
  }
  j["holdout_fraction"] = cfg.holdout_fraction;
  json p = {{"clients", cfg.clients}};
  if (std::holds_alternative<data::Iid>(cfg.strategy)) {
    p["strategy"] = "iid";
  } else if (const auto* dir = std::get_if<data::Dirichlet>(&cfg.strategy)) {
    p["strategy"] = "dirichlet";
    p["alpha"] = dir->alpha;
  } else {
    p["strategy"] = "sharding";
    p["shards_per_client"] = std::get<data::Sharding>(cfg.strategy).shards_per_client;
  }
  j["partition"] = p;
  j["gamma"] = cfg.gamma;
  j["ri"] = cfg.ri;
  if (std::holds_alternative<Sequential>(cfg.order)) {
    j["order"] = {{"kind", "sequential"}};
  } else if (const auto* s = std::get_if<Shuffled>(&cfg.order)) {
    j["order"] = {{"kind", "shuffled"}, {"seed", s->seed}};
  } else {
    j["order"] = {{"kind", "tree"}};
  }
  if (cfg.baseline) {
    j["baseline"] = {{"rounds", cfg.baseline->rounds},
                     {"local_epochs", cfg.baseline->local_epochs},
                     {"batch_size", cfg.baseline->batch_size},
                     {"learning_rate", cfg.baseline->learning_rate},
                     {"seed", cfg.baseline->seed}};
  } else {
    j["baseline"] = nullptr;
  }
  j["output_path"] = cfg.output_path;
  j["weights_path"] = cfg.weights_path;
  return j;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path));
}

// Sets a dotted path ("partition.alpha") inside a config document. Missing
// intermediate objects are an error; the leaf may be new.
inline void set_path(json& doc, const std::string& dotted, json value) {
  json* node = &doc;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty field path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw ConfigError("field path '" + dotted + "': no object '" + parts[i] + "'");
    }
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) throw ConfigError("field path '" + dotted + "' is not inside an object");
  (*node)[parts.back()] = std::move(value);
}

}  // namespace afl::harness
