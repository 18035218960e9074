#pragma once

// FedAvg on the same frozen-embedding linear head, trained with softmax
// cross-entropy. Used only as a contrast to the analytic aggregation.

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "afl/data.hpp"
#include "afl/error.hpp"
#include "afl/rng.hpp"

namespace afl::baseline {

using linalg::Index;
using linalg::Matrix;

struct FedAvgConfig {
  std::size_t rounds = 50;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (rounds < 1) throw ContractError("fedavg: rounds must be >= 1");
    if (local_epochs < 1) throw ContractError("fedavg: local_epochs must be >= 1");
    if (batch_size < 1) throw ContractError("fedavg: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) {
      throw ContractError("fedavg: learning_rate must be > 0");
    }
  }
};

// Seed of client `client` in round `round`.
inline std::uint64_t client_seed(std::uint64_t seed, std::size_t round,
                                 std::size_t client) {
  return derive_seed(derive_seed(seed, round), client);
}

// Mini-batch SGD on mean softmax cross-entropy, updating w in place. Each
// epoch visits the rows in a fresh shuffled order.
inline void sgd_epochs(Matrix& w, const data::EmbeddingDataset& ds,
                       std::size_t epochs, std::size_t batch_size, double lr,
                       Rng& rng) {
  const auto n = static_cast<std::size_t>(ds.size());
  if (n == 0) return;
  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t len = std::min(batch_size, n - start);
      Matrix xb(static_cast<Index>(len), ds.dim());
      for (std::size_t r = 0; r < len; ++r) {
        xb.row(static_cast<Index>(r)) = ds.x.row(static_cast<Index>(order[start + r]));
      }
      Matrix p = xb * w;
      for (Index r = 0; r < p.rows(); ++r) {
        p.row(r).array() -= p.row(r).maxCoeff();
        p.row(r) = p.row(r).array().exp().matrix();
        p.row(r) /= p.row(r).sum();
        p(r, ds.labels[order[start + static_cast<std::size_t>(r)]]) -= 1.0;
      }
      w.noalias() -= (lr / static_cast<double>(len)) * (xb.transpose() * p);
    }
  }
}

// Server step: sum_k (n_k / n) W_k, accumulated in client order.
inline Matrix weighted_average(std::span<const Matrix> weights,
                               std::span<const std::uint64_t> counts) {
  if (weights.empty() || weights.size() != counts.size()) {
    throw ContractError("weighted_average: need one count per weight matrix");
  }
  std::uint64_t total = 0;
  for (auto n : counts) total += n;
  if (total == 0) throw ContractError("weighted_average: counts sum to 0");
  Matrix out = Matrix::Zero(weights.front().rows(), weights.front().cols());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows() != out.rows() || weights[i].cols() != out.cols()) {
      throw ContractError("weighted_average: shapes differ");
    }
    const double share = static_cast<double>(counts[i]) / static_cast<double>(total);
    out.noalias() += share * weights[i];
  }
  return out;
}

// Runs `cfg.rounds` of FedAvg over the client datasets. Every non-empty
// client starts each round from the global weight; the server averages the
// results weighted by sample count. `run(count, job)` may execute the jobs
// concurrently.
template <typename Runner>
Matrix fedavg_train(std::span<const data::EmbeddingDataset> parts,
                    const FedAvgConfig& cfg, Runner&& run) {
  cfg.validate();
  if (parts.empty()) throw ContractError("fedavg: no clients");
  const Index d = parts.front().dim();
  const auto c = parts.front().num_classes;
  std::uint64_t total = 0;
  for (const auto& p : parts) {
    if (p.dim() != d || p.num_classes != c) {
      throw ContractError("fedavg: clients disagree on d or C");
    }
    total += static_cast<std::uint64_t>(p.size());
  }
  if (total == 0) throw ContractError("fedavg: every client is empty");

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].size() > 0) active.push_back(k);
  }

  std::vector<std::uint64_t> counts;
  for (std::size_t k : active) counts.push_back(static_cast<std::uint64_t>(parts[k].size()));

  Matrix global = Matrix::Zero(d, c);
  std::vector<Matrix> local(active.size());
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    run(active.size(), [&](std::size_t i) {
      const std::size_t k = active[i];
      Rng rng(client_seed(cfg.seed, round, k));
      local[i] = global;
      sgd_epochs(local[i], parts[k], cfg.local_epochs, cfg.batch_size,
                 cfg.learning_rate, rng);
    });
    global = weighted_average(local, counts);
  }
  return global;
}

inline Matrix fedavg_train(std::span<const data::EmbeddingDataset> parts,
                           const FedAvgConfig& cfg) {
  return fedavg_train(parts, cfg, [](std::size_t n, const auto& job) {
    for (std::size_t i = 0; i < n; ++i) job(i);
  });
}

// Plain SGD on one dataset with the same seeding as client 0 of FedAvg.
inline Matrix centralized_sgd(const data::EmbeddingDataset& ds,
                              const FedAvgConfig& cfg) {
  cfg.validate();
  Matrix w = Matrix::Zero(ds.dim(), ds.num_classes);
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    Rng rng(client_seed(cfg.seed, round, 0));
    sgd_epochs(w, ds, cfg.local_epochs, cfg.batch_size, cfg.learning_rate, rng);
  }
  return w;
}

}  // namespace afl::baseline
