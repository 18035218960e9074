#pragma once

// End-to-end run: dataset -> holdout split -> partition -> local training per
// client -> aggregation in the configured order -> optional restoration ->
// comparison with the centralized solution -> optional FedAvg contrast.

#include <chrono>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "afl/analytic.hpp"
#include "afl/baseline.hpp"
#include "afl/data.hpp"
#include "afl/embedding_file.hpp"
#include "afl/harness/config.hpp"
#include "afl/harness/metrics.hpp"
#include "afl/harness/parallel.hpp"
#include "afl/update_file.hpp"

namespace afl::harness {

inline constexpr int kReportSchemaVersion = 1;

struct RunReport {
  json config;
  std::size_t train_samples = 0;
  std::size_t holdout_samples = 0;
  std::vector<std::size_t> client_sizes;
  double delta_w = 0.0;
  // "joint_pinv" (gamma = 0 least squares) or "joint_ridge" (same gamma).
  std::string reference;
  std::optional<double> accuracy_afl;
  std::optional<double> accuracy_joint;
  std::optional<double> accuracy_fedavg;
  std::vector<std::string> warnings;
  std::uint64_t checksum = 0;
  std::map<std::string, double> timings;  // seconds per stage
  Matrix weights;                         // final AFL weight, not serialized
  std::vector<data::Label> holdout_predictions;
};

inline json to_json(const RunReport& r, bool with_timings = true) {
  auto opt = [](const std::optional<double>& v) -> json {
    return v ? json(*v) : json(nullptr);
  };
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = r.config;
  j["train_samples"] = r.train_samples;
  j["holdout_samples"] = r.holdout_samples;
  j["client_sizes"] = r.client_sizes;
  j["delta_w"] = r.delta_w;
  j["reference"] = r.reference;
  j["accuracy_afl"] = opt(r.accuracy_afl);
  j["accuracy_joint"] = opt(r.accuracy_joint);
  j["accuracy_fedavg"] = opt(r.accuracy_fedavg);
  j["warnings"] = r.warnings;
  j["weights_checksum"] = hex64(r.checksum);
  if (with_timings) j["timings"] = r.timings;
  return j;
}

struct HoldoutSplit {
  data::EmbeddingDataset train;
  data::EmbeddingDataset holdout;
};

// The first floor(f * N) rows of a seeded permutation form the holdout; both
// sides keep the original row order.
inline HoldoutSplit split_holdout(const data::EmbeddingDataset& ds, double fraction,
                                  std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(ds.size());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(cut), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data::subset(ds, train), data::subset(ds, test)};
}

inline data::EmbeddingDataset load_dataset(const ExperimentConfig& cfg) {
  if (const auto* d = std::get_if<DummySource>(&cfg.dataset)) {
    return data::gen_dummy(d->n, d->d, d->c, derive_seed(cfg.seed, stream::kDataset),
                           d->spread);
  }
  return data::read_embeddings(std::get<FileSource>(cfg.dataset).path);
}

inline std::vector<std::size_t> aggregation_order(const AggregationOrder& order,
                                                  std::size_t k) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (const auto* s = std::get_if<Shuffled>(&order)) {
    Rng rng(derive_seed(s->seed, stream::kOrder));
    rng.shuffle(idx);
  }
  return idx;
}

// Local stage for every client of a partition.
inline std::vector<ClientUpdate> train_clients(const data::EmbeddingDataset& train,
                                               const data::Partition& part,
                                               double gamma,
                                               const ParallelRunner& run) {
  std::vector<ClientUpdate> updates(part.num_clients());
  run(part.num_clients(), [&](std::size_t k) {
    updates[k] = local_train(data::subset(train, part.clients[k]), gamma);
  });
  return updates;
}

inline AggregateState aggregate(std::span<const ClientUpdate> updates,
                                const AggregationOrder& order,
                                const ParallelRunner& run,
                                RankPolicy policy = RankPolicy::kStrict) {
  if (std::holds_alternative<Tree>(order)) {
    return aggregate_tree(updates, run, policy);
  }
  const auto idx = aggregation_order(order, updates.size());
  return aggregate_sequential(updates, idx, policy);
}

inline std::vector<std::string> config_warnings(const ExperimentConfig& cfg,
                                                Index train_rows, Index dim) {
  std::vector<std::string> out;
  if (cfg.gamma == 0.0 && static_cast<double>(train_rows) / static_cast<double>(cfg.clients) <
                              static_cast<double>(dim)) {
    out.push_back(
        "gamma = 0 with expected client size below d: clients are likely rank "
        "deficient; use gamma > 0");
  }
  return out;
}

namespace detail {

// Tags exceptions with the stage that raised them, keeping their type.
template <typename Fn>
auto stage(const char* name, std::map<std::string, double>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                  start).count();
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto out = fn();
      finish();
      return out;
    }
  } catch (const FormatError& e) {
    throw FormatError(std::string("[") + name + "] " + e.what(), e.offset());
  } catch (const RankError& e) {
    throw RankError(std::string("[") + name + "] " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("[") + name + "] " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[") + name + "] " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(std::string("[") + name + "] " + e.what());
  }
}

}  // namespace detail

inline RunReport run_experiment(const ExperimentConfig& cfg,
                                const ParallelRunner& run = ParallelRunner{}) {
  RunReport report;
  report.config = to_json(cfg);
  auto& t = report.timings;

  const auto full = detail::stage("dataset", t, [&] { return load_dataset(cfg); });
  const auto split = detail::stage("holdout", t, [&] {
    return split_holdout(full, cfg.holdout_fraction,
                         derive_seed(cfg.seed, stream::kHoldout));
  });
  const auto& train = split.train;
  const auto& test = split.holdout;
  report.train_samples = static_cast<std::size_t>(train.size());
  report.holdout_samples = static_cast<std::size_t>(test.size());
  if (train.size() == 0) throw ConfigError("training split is empty");

  const auto part = detail::stage("partition", t,
                                  [&] { return data::partition(train, cfg.partition_spec()); });
  report.client_sizes = part.sizes();

  report.warnings = config_warnings(cfg, train.size(), train.dim());

  const auto updates = detail::stage("local_training", t, [&] {
    return train_clients(train, part, cfg.gamma, run);
  });
  const auto state = detail::stage("aggregation", t,
                                   [&] { return aggregate(updates, cfg.order, run); });
  report.weights = detail::stage("restore", t, [&] {
    return cfg.ri ? restore(state) : state.weights;
  });

  const Matrix joint_ls = detail::stage("joint_oracle", t,
                                        [&] { return joint_oracle(train, 0.0); });
  if (cfg.ri || cfg.gamma == 0.0) {
    report.reference = "joint_pinv";
    report.delta_w = delta_w(joint_ls, report.weights);
  } else {
    report.reference = "joint_ridge";
    const Matrix joint_ridge = detail::stage("joint_ridge", t,
                                             [&] { return joint_oracle(train, cfg.gamma); });
    report.delta_w = delta_w(joint_ridge, report.weights);
  }
  report.checksum = checksum(report.weights);

  if (test.size() > 0) {
    report.holdout_predictions = predict(report.weights, test.x);
    report.accuracy_afl = accuracy(report.weights, test);
    report.accuracy_joint = accuracy(joint_ls, test);
  }

  if (cfg.baseline) {
    const Matrix w_avg = detail::stage("fedavg", t, [&] {
      std::vector<data::EmbeddingDataset> parts;
      parts.reserve(part.num_clients());
      for (const auto& c : part.clients) parts.push_back(data::subset(train, c));
      return baseline::fedavg_train(parts, *cfg.baseline, run);
    });
    if (test.size() > 0) report.accuracy_fedavg = accuracy(w_avg, test);
  }

  if (!cfg.weights_path.empty()) {
    // The dumped update is what one client holding all training rows would
    // send: restored weights pair with the plain Gram matrix (gamma 0);
    // unrestored ones carry the accumulated k * gamma.
    ClientUpdate dump;
    dump.weights = report.weights;
    dump.gram = state.gram;
    dump.samples = state.samples;
    const double accumulated = static_cast<double>(state.clients) * state.gamma;
    if (cfg.ri) {
      dump.gram.diagonal().array() -= accumulated;
      dump.gamma = 0.0;
    } else {
      dump.gamma = accumulated;
    }
    write_update(dump, cfg.weights_path);
  }
  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path);
    if (!out) throw Error("cannot write report to '" + cfg.output_path + "'");
    out << to_json(report).dump(2) << "\n";
  }
  return report;
}

}  // namespace afl::harness
