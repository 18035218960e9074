#pragma once

// Deviation table on dummy data: mean ΔW between the aggregated weight and the
// centralized least-squares weight, for several client counts, with and
// without the regularization intermediary.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "afl/analytic.hpp"
#include "afl/data.hpp"
#include "afl/harness/config.hpp"
#include "afl/harness/metrics.hpp"
#include "afl/harness/parallel.hpp"

namespace afl::harness {

struct TableA1Options {
  std::size_t seeds = 3;
  std::uint64_t base_seed = 0;
  Index n = 10000;
  Index d = 512;
  std::uint32_t c = 10;
  double gamma = 1.0;
  std::vector<std::size_t> client_counts{2, 10, 20, 50, 100, 200};
  // Without RI, substitute pseudoinverses for singular local and aggregate
  // Gram matrices instead of reporting a rank error. Slow at large K.
  bool pinv_fallback = false;
};

struct TableA1Cell {
  std::size_t clients = 0;
  bool ri = false;
  std::vector<double> deltas;  // one per seed that completed
  std::size_t rank_errors = 0;

  std::optional<double> mean() const {
    if (deltas.empty()) return std::nullopt;
    double s = 0.0;
    for (double v : deltas) s += v;
    return s / static_cast<double>(deltas.size());
  }
};

struct TableA1 {
  TableA1Options options;
  std::vector<TableA1Cell> with_ri;
  std::vector<TableA1Cell> without_ri;
  double mean_joint_l1 = 0.0;  // mean ||W_joint||_1 over seeds
};

namespace detail {

inline ClientUpdate exact_update(const data::EmbeddingDataset& ds) {
  ClientUpdate u;
  const Matrix y = data::one_hot(ds);
  u.weights = local_train_exact(ds.x, y);
  u.gram = linalg::gram(ds.x);
  u.gamma = 0.0;
  u.samples = static_cast<std::uint64_t>(ds.size());
  return u;
}

}  // namespace detail

inline TableA1 run_table_a1(const TableA1Options& opt,
                            const ParallelRunner& run = ParallelRunner{}) {
  if (opt.seeds < 1) throw ConfigError("table-a1: seeds must be >= 1");
  if (!(opt.gamma > 0.0)) throw ConfigError("table-a1: gamma must be > 0");
  TableA1 table;
  table.options = opt;
  for (std::size_t k : opt.client_counts) {
    table.with_ri.push_back({k, true, {}, 0});
    table.without_ri.push_back({k, false, {}, 0});
  }

  for (std::size_t s = 0; s < opt.seeds; ++s) {
    const std::uint64_t seed = derive_seed(opt.base_seed, s);
    const auto ds = data::gen_dummy(opt.n, opt.d, opt.c,
                                    derive_seed(seed, stream::kDataset));
    const Matrix joint = joint_oracle(ds, 0.0);
    table.mean_joint_l1 += l1_norm(joint) / static_cast<double>(opt.seeds);

    for (std::size_t i = 0; i < opt.client_counts.size(); ++i) {
      const std::size_t k = opt.client_counts[i];
      const auto part = data::partition(
          ds, {data::Iid{}, k, derive_seed(seed, stream::kPartition)});
      std::vector<data::EmbeddingDataset> parts;
      parts.reserve(k);
      for (const auto& idx : part.clients) parts.push_back(data::subset(ds, idx));

      {
        std::vector<ClientUpdate> updates(k);
        run(k, [&](std::size_t j) { updates[j] = local_train(parts[j], opt.gamma); });
        std::vector<std::size_t> order(k);
        for (std::size_t j = 0; j < k; ++j) order[j] = j;
        const auto seq = aggregate_sequential(updates, order);
        table.with_ri[i].deltas.push_back(delta_w(joint, restore(seq)));
      }

      try {
        std::vector<ClientUpdate> updates(k);
        if (opt.pinv_fallback) {
          run(k, [&](std::size_t j) { updates[j] = detail::exact_update(parts[j]); });
        } else {
          run(k, [&](std::size_t j) { updates[j] = local_train(parts[j], 0.0); });
        }
        std::vector<std::size_t> order(k);
        for (std::size_t j = 0; j < k; ++j) order[j] = j;
        const auto policy =
            opt.pinv_fallback ? RankPolicy::kPseudoinverse : RankPolicy::kStrict;
        const auto seq = aggregate_sequential(updates, order, policy);
        table.without_ri[i].deltas.push_back(delta_w(joint, seq.weights));
      } catch (const RankError&) {
        ++table.without_ri[i].rank_errors;
      }
    }
  }
  return table;
}

inline json to_json(const TableA1& t) {
  auto row = [](const std::vector<TableA1Cell>& cells) {
    json out = json::array();
    for (const auto& c : cells) {
      const auto m = c.mean();
      out.push_back({{"clients", c.clients},
                     {"mean_delta_w", m ? json(*m) : json(nullptr)},
                     {"runs", c.deltas.size()},
                     {"rank_errors", c.rank_errors}});
    }
    return out;
  };
  return {{"seeds", t.options.seeds},
          {"n", t.options.n},
          {"d", t.options.d},
          {"c", t.options.c},
          {"gamma_with_ri", t.options.gamma},
          {"gamma_without_ri", 0.0},
          {"pinv_fallback", t.options.pinv_fallback},
          {"mean_joint_l1", t.mean_joint_l1},
          {"with_ri", row(t.with_ri)},
          {"without_ri", row(t.without_ri)}};
}

}  // namespace afl::harness
