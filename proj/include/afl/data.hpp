#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "afl/error.hpp"
#include "afl/linalg.hpp"
#include "afl/rng.hpp"

namespace afl::data {

using linalg::Index;
using linalg::Matrix;
using Label = std::uint32_t;

// N x d embeddings with N labels in [0, num_classes). The class count is
// global: a subset keeps it even when some classes are locally absent.
struct EmbeddingDataset {
  Matrix x;
  std::vector<Label> labels;
  std::uint32_t num_classes = 0;

  EmbeddingDataset() = default;

  EmbeddingDataset(Matrix embeddings, std::vector<Label> labels_in,
                   std::uint32_t classes)
      : x(std::move(embeddings)), labels(std::move(labels_in)),
        num_classes(classes) {
    validate();
  }

  Index size() const noexcept { return x.rows(); }
  Index dim() const noexcept { return x.cols(); }

  void validate() const {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) {
      throw ContractError("dataset: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(x.rows()) + " rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= num_classes) {
        throw ContractError("dataset: label " + std::to_string(labels[i]) +
                            " at row " + std::to_string(i) +
                            " is not below class count " +
                            std::to_string(num_classes));
      }
    }
  }

  // Bitwise equality (NaN-free by construction).
  friend bool operator==(const EmbeddingDataset& a, const EmbeddingDataset& b) {
    return a.num_classes == b.num_classes && a.labels == b.labels &&
           a.x.rows() == b.x.rows() && a.x.cols() == b.x.cols() &&
           a.x == b.x;
  }
};

inline Matrix one_hot(std::span<const Label> labels, std::uint32_t num_classes) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw ContractError("one_hot: label " + std::to_string(labels[i]) +
                          " out of range for " + std::to_string(num_classes) +
                          " classes");
    }
    y(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return y;
}

inline Matrix one_hot(const EmbeddingDataset& ds) {
  return one_hot(ds.labels, ds.num_classes);
}

// Class centres of the dummy generator: every coordinate ~ N(0, spread^2),
// drawn class by class.
inline Matrix dummy_class_means(Index d, std::uint32_t num_classes,
                                std::uint64_t seed, double spread = 1.0) {
  Rng rng(derive_seed(seed, 1));
  Matrix means(num_classes, d);
  for (Index c = 0; c < means.rows(); ++c) {
    for (Index j = 0; j < d; ++j) means(c, j) = spread * rng.normal();
  }
  return means;
}

// Balanced Gaussian clusters: sample i has label i mod C and embedding
// mean[label] + N(0, I).
inline EmbeddingDataset gen_dummy(Index n, Index d, std::uint32_t num_classes,
                                  std::uint64_t seed, double spread = 1.0) {
  if (num_classes == 0 || n < 0 || d < 0) {
    throw ContractError("gen_dummy: need C >= 1 and non-negative N, d");
  }
  if (n % num_classes != 0) {
    throw ContractError("gen_dummy: class count " +
                        std::to_string(num_classes) + " does not divide N = " +
                        std::to_string(n));
  }
  const Matrix means = dummy_class_means(d, num_classes, seed, spread);
  Rng rng(derive_seed(seed, 2));
  Matrix x(n, d);
  std::vector<Label> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<Label>(i % num_classes);
    labels[static_cast<std::size_t>(i)] = c;
    for (Index j = 0; j < d; ++j) x(i, j) = means(c, j) + rng.normal();
  }
  return EmbeddingDataset(std::move(x), std::move(labels), num_classes);
}

inline EmbeddingDataset subset(const EmbeddingDataset& ds,
                               std::span<const std::size_t> indices) {
  const auto n = static_cast<std::size_t>(ds.size());
  std::vector<bool> seen(n, false);
  Matrix x(static_cast<Index>(indices.size()), ds.dim());
  std::vector<Label> labels(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= n) {
      throw ContractError("subset: index " + std::to_string(i) +
                          " out of range for " + std::to_string(n) + " rows");
    }
    if (seen[i]) {
      throw ContractError("subset: duplicate index " + std::to_string(i));
    }
    seen[i] = true;
    x.row(static_cast<Index>(r)) = ds.x.row(static_cast<Index>(i));
    labels[r] = ds.labels[i];
  }
  EmbeddingDataset out;
  out.x = std::move(x);
  out.labels = std::move(labels);
  out.num_classes = ds.num_classes;
  return out;
}

// Partition strategies.
struct Iid {};
struct Dirichlet {
  double alpha = 1.0;
};
struct Sharding {
  std::size_t shards_per_client = 1;
};
using Strategy = std::variant<Iid, Dirichlet, Sharding>;

struct PartitionSpec {
  Strategy strategy = Iid{};
  std::size_t clients = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (clients < 1) throw ContractError("partition: need at least one client");
    if (const auto* d = std::get_if<Dirichlet>(&strategy); d && !(d->alpha > 0.0)) {
      throw ContractError("partition: Dirichlet alpha must be > 0");
    }
    if (const auto* s = std::get_if<Sharding>(&strategy);
        s && s->shards_per_client < 1) {
      throw ContractError("partition: shards per client must be >= 1");
    }
  }
};

inline std::string describe(const Strategy& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Iid>) {
          return "iid";
        } else if constexpr (std::is_same_v<T, Dirichlet>) {
          return "dirichlet(alpha=" + std::to_string(v.alpha) + ")";
        } else {
          return "sharding(s=" + std::to_string(v.shards_per_client) + ")";
        }
      },
      s);
}

// For each client, the ascending list of sample indices it owns.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;

  std::size_t num_clients() const noexcept { return clients.size(); }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    out.reserve(clients.size());
    for (const auto& c : clients) out.push_back(c.size());
    return out;
  }

  friend bool operator==(const Partition&, const Partition&) = default;
};

namespace detail {

inline Partition partition_iid(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  Partition p;
  p.clients.resize(k);
  for (std::size_t i = 0; i < n; ++i) p.clients[i % k].push_back(perm[i]);
  return p;
}

// Per class: shuffle the class's samples, draw client proportions from
// Dirichlet(alpha, ..., alpha) and send each sample to a client drawn from
// them. Classes with no samples consume no randomness.
inline Partition partition_dirichlet(std::span<const Label> labels,
                                     std::uint32_t num_classes, double alpha,
                                     std::size_t k, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Partition p;
  p.clients.resize(k);
  for (auto& members : by_class) {
    if (members.empty()) continue;
    rng.shuffle(members);
    const std::vector<double> props = rng.dirichlet(alpha, k);
    for (std::size_t i : members) p.clients[rng.categorical(props)].push_back(i);
  }
  return p;
}

// Label-sorted indices cut into shards_per_client * k shards of floor(N / S)
// samples, the remainder going to the last shard; shards are dealt to
// clients through a shuffled shard order.
inline Partition partition_sharding(std::span<const Label> labels,
                                    std::size_t shards_per_client,
                                    std::size_t k, Rng& rng) {
  const std::size_t n = labels.size();
  const std::size_t num_shards = shards_per_client * k;
  if (num_shards > n) {
    throw ContractError("partition: sharding needs s*K <= N (s*K = " +
                        std::to_string(num_shards) + ", N = " +
                        std::to_string(n) + ")");
  }
  std::vector<std::size_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  std::vector<std::size_t> shard_order(num_shards);
  std::iota(shard_order.begin(), shard_order.end(), std::size_t{0});
  rng.shuffle(shard_order);

  const std::size_t shard_size = n / num_shards;
  Partition p;
  p.clients.resize(k);
  for (std::size_t slot = 0; slot < num_shards; ++slot) {
    const std::size_t shard = shard_order[slot];
    const std::size_t begin = shard * shard_size;
    const std::size_t end = shard + 1 == num_shards ? n : begin + shard_size;
    auto& dst = p.clients[slot / shards_per_client];
    dst.insert(dst.end(), sorted.begin() + static_cast<std::ptrdiff_t>(begin),
               sorted.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return p;
}

}  // namespace detail

inline Partition partition(std::span<const Label> labels,
                           std::uint32_t num_classes, const PartitionSpec& spec) {
  spec.validate();
  for (Label l : labels) {
    if (l >= num_classes) throw ContractError("partition: label out of range");
  }
  Rng rng(spec.seed);
  Partition p = std::visit(
      [&](const auto& s) -> Partition {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Iid>) {
          return detail::partition_iid(labels.size(), spec.clients, rng);
        } else if constexpr (std::is_same_v<T, Dirichlet>) {
          return detail::partition_dirichlet(labels, num_classes, s.alpha,
                                             spec.clients, rng);
        } else {
          return detail::partition_sharding(labels, s.shards_per_client,
                                            spec.clients, rng);
        }
      },
      spec.strategy);
  for (auto& c : p.clients) std::sort(c.begin(), c.end());
  return p;
}

inline Partition partition(const EmbeddingDataset& ds, const PartitionSpec& spec) {
  return partition(ds.labels, ds.num_classes, spec);
}

// Per-client label histogram entropy (nats); empty clients are skipped.
inline std::vector<double> label_entropies(std::span<const Label> labels,
                                           std::uint32_t num_classes,
                                           const Partition& p) {
  std::vector<double> out;
  for (const auto& client : p.clients) {
    if (client.empty()) continue;
    std::vector<double> hist(num_classes, 0.0);
    for (std::size_t i : client) hist[labels[i]] += 1.0;
    double h = 0.0;
    for (double c : hist) {
      if (c > 0.0) {
        const double q = c / static_cast<double>(client.size());
        h -= q * std::log(q);
      }
    }
    out.push_back(h);
  }
  return out;
}

}  // namespace afl::data
