#pragma once

// Analytic federated learning: closed-form local training, exact pairwise
// aggregation of (weight, Gram) pairs, and removal of the accumulated ridge
// term after aggregation.
//
// A client holding (X, Y) shares
//     W = (X^T X + g I)^-1 X^T Y,   C = X^T X + g I.
// Two such pairs (Wa, Ca), (Wb, Cb) with Cn = Ca + Cb combine as
//     W = Wa_w Wa + Wb_w Wb
//     Wa_w = I - Ca^-1 Cb (I - Cn^-1 Cb)
//     Wb_w = I - Cb^-1 Ca (I - Cn^-1 Ca)
// which equals Cn^-1 (Ca Wa + Cb Wb), the ridge solution on the pooled rows
// with penalty k g after k clients. restore() maps it back to
//     (Cn - k g I)^-1 Cn W,
// the unregularized least-squares weight of the pooled data.

#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afl/data.hpp"
#include "afl/error.hpp"
#include "afl/linalg.hpp"

namespace afl {

using linalg::Index;
using linalg::Matrix;

// What the aggregator does when a Gram matrix it must invert is singular.
enum class RankPolicy {
  kStrict,         // throw RankError
  kPseudoinverse,  // substitute the pseudoinverse and count the event
};

// The payload one client sends to the server.
struct ClientUpdate {
  Matrix weights;  // d x C
  Matrix gram;     // d x d, X^T X + gamma I
  double gamma = 0.0;
  std::uint64_t samples = 0;

  Index dim() const noexcept { return weights.rows(); }
  Index classes() const noexcept { return weights.cols(); }
};

struct AggregateState {
  Matrix weights;  // d x C
  Matrix gram;     // d x d, sum of client Gram matrices
  std::uint64_t clients = 0;
  double gamma = 0.0;
  std::uint64_t samples = 0;
  // Singular Gram matrices replaced by pseudoinverses under kPseudoinverse.
  std::uint64_t pinv_fallbacks = 0;

  static AggregateState empty(Index d, Index c, double gamma) {
    AggregateState s;
    s.weights = Matrix::Zero(d, c);
    s.gram = Matrix::Zero(d, d);
    s.gamma = gamma;
    return s;
  }

  static AggregateState lift(const ClientUpdate& u) {
    AggregateState s;
    s.weights = u.weights;
    s.gram = u.gram;
    s.clients = 1;
    s.gamma = u.gamma;
    s.samples = u.samples;
    return s;
  }

  Index dim() const noexcept { return weights.rows(); }
  Index classes() const noexcept { return weights.cols(); }

  // Factorization of `gram`, kept from the merge that produced this state so
  // a sequential fold factors each accumulated Gram matrix once.
  std::shared_ptr<const linalg::SpdFactor> factor;
};

namespace detail {

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ContractError("gamma must be finite and >= 0, got " +
                        std::to_string(gamma));
  }
}

inline std::shared_ptr<const linalg::SpdFactor> factor_or_throw(
    const Matrix& c, RankPolicy policy, std::uint64_t& fallbacks,
    const char* what) {
  auto f = std::make_shared<const linalg::SpdFactor>(c);
  if (!f->positive_definite()) {
    if (policy == RankPolicy::kStrict) {
      throw RankError(std::string(what) +
                      " Gram matrix is singular; train clients with gamma > 0");
    }
    ++fallbacks;
  }
  return f;
}

}  // namespace detail

// Ridge solution of one client. gamma = 0 requires X to have full column rank.
inline ClientUpdate local_train(const Matrix& x, const Matrix& y, double gamma) {
  detail::check_gamma(gamma);
  if (x.rows() != y.rows()) {
    throw ContractError("local_train: X has " + std::to_string(x.rows()) +
                        " rows, Y has " + std::to_string(y.rows()));
  }
  ClientUpdate u;
  u.gamma = gamma;
  u.samples = static_cast<std::uint64_t>(x.rows());
  u.gram = linalg::gram(x, gamma);
  if (x.rows() == 0 && gamma > 0.0) {
    u.weights = Matrix::Zero(x.cols(), y.cols());
    return u;
  }
  const linalg::SpdFactor f(u.gram);
  if (!f.positive_definite()) {
    throw RankError(gamma == 0.0
                        ? "local_train: X (" + linalg::shape_str(x) +
                              ") lacks full column rank; use gamma > 0"
                        : "local_train: X^T X + gamma I is numerically "
                          "singular; gamma is too small for this data");
  }
  u.weights = f.solve(x.transpose() * y);
  return u;
}

inline ClientUpdate local_train(const data::EmbeddingDataset& ds, double gamma) {
  return local_train(ds.x, data::one_hot(ds), gamma);
}

// Minimum-norm least-squares weight X^+ Y.
inline Matrix local_train_exact(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) {
    throw ContractError("local_train_exact: X has " + std::to_string(x.rows()) +
                        " rows, Y has " + std::to_string(y.rows()));
  }
  return linalg::pinv(x) * y;
}

// Combines two aggregates (each possibly a single lifted client).
inline AggregateState merge(const AggregateState& a, const AggregateState& b,
                            RankPolicy policy = RankPolicy::kStrict) {
  if (a.gamma != b.gamma) {
    throw ContractError("aggregate: gamma mismatch (" + std::to_string(a.gamma) +
                        " vs " + std::to_string(b.gamma) + ")");
  }
  if (a.dim() != b.dim() || a.classes() != b.classes() ||
      a.gram.rows() != a.dim() || b.gram.rows() != b.dim()) {
    throw ContractError("aggregate: shape mismatch (" +
                        linalg::shape_str(a.weights) + " vs " +
                        linalg::shape_str(b.weights) + ")");
  }
  if (a.clients == 0) return b;
  if (b.clients == 0) return a;

  AggregateState out;
  out.gamma = a.gamma;
  out.clients = a.clients + b.clients;
  out.samples = a.samples + b.samples;
  out.pinv_fallbacks = a.pinv_fallbacks + b.pinv_fallbacks;
  out.gram = a.gram + b.gram;

  auto factor_of = [&](const AggregateState& s, const char* what) {
    if (!s.factor) {
      return detail::factor_or_throw(s.gram, policy, out.pinv_fallbacks, what);
    }
    if (!s.factor->positive_definite() && policy == RankPolicy::kStrict) {
      throw RankError(std::string(what) + " Gram matrix is singular");
    }
    return s.factor;
  };
  auto fa = factor_of(a, "aggregate");
  auto fb = factor_of(b, "client");
  auto fn = detail::factor_or_throw(out.gram, policy, out.pinv_fallbacks,
                                    "combined");

  // Weighting of side 1 against side 2:
  //   I - R1 C2 (I - Cn^-1 C2) = I - R1 C2 Cn^-1 C1,
  // using I - Cn^-1 C2 = Cn^-1 C1. Applying Cn^-1 to C1 W1 directly avoids
  // the cancellation in W1 - Cn^-1 C2 W1, which R1 C2 would amplify.
  auto weighted = [&fn](const Matrix& w1, const Matrix& c1,
                        const linalg::SpdFactor& r1, const Matrix& c2) {
    return Matrix(w1 - r1.solve(c2 * fn->solve(c1 * w1)));
  };
  out.weights = weighted(a.weights, a.gram, *fa, b.gram) +
                weighted(b.weights, b.gram, *fb, a.gram);
  linalg::require_finite(out.weights, "aggregate");
  out.factor = std::move(fn);
  return out;
}

inline AggregateState aggregate_pair(const AggregateState& state,
                                     const ClientUpdate& update,
                                     RankPolicy policy = RankPolicy::kStrict) {
  return merge(state, AggregateState::lift(update), policy);
}

namespace detail {

inline void check_uniform(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ContractError("aggregate: no client updates");
  const auto& first = updates.front();
  for (const auto& u : updates) {
    if (u.gamma != first.gamma) throw ContractError("aggregate: gamma mismatch");
    if (u.dim() != first.dim() || u.classes() != first.classes() ||
        u.gram.rows() != u.dim() || u.gram.cols() != u.dim()) {
      throw ContractError("aggregate: update shapes differ");
    }
  }
}

}  // namespace detail

// Folds aggregate_pair over the updates in the given order (all of them, in
// index order, when `order` is empty).
inline AggregateState aggregate_sequential(std::span<const ClientUpdate> updates,
                                           std::span<const std::size_t> order = {},
                                           RankPolicy policy = RankPolicy::kStrict) {
  detail::check_uniform(updates);
  auto state = AggregateState::empty(updates.front().dim(),
                                     updates.front().classes(),
                                     updates.front().gamma);
  if (order.empty()) {
    for (const auto& u : updates) state = aggregate_pair(state, u, policy);
  } else {
    if (order.size() != updates.size()) {
      throw ContractError("aggregate: order must list every update once");
    }
    for (std::size_t i : order) {
      if (i >= updates.size()) throw ContractError("aggregate: bad order index");
      state = aggregate_pair(state, updates[i], policy);
    }
  }
  return state;
}

// Pairwise tree reduction: level by level, neighbours (0,1), (2,3), ... are
// merged; an odd tail is carried up. `run(count, job)` executes job(0..count)
// and may do so concurrently; the tree shape does not depend on it.
template <typename Runner>
AggregateState aggregate_tree(std::span<const ClientUpdate> updates,
                              Runner&& run,
                              RankPolicy policy = RankPolicy::kStrict) {
  detail::check_uniform(updates);
  std::vector<AggregateState> level;
  level.reserve(updates.size());
  for (const auto& u : updates) level.push_back(AggregateState::lift(u));
  while (level.size() > 1) {
    std::vector<AggregateState> next((level.size() + 1) / 2);
    run(level.size() / 2, [&](std::size_t i) {
      next[i] = merge(level[2 * i], level[2 * i + 1], policy);
    });
    if (level.size() % 2 == 1) next.back() = std::move(level.back());
    level = std::move(next);
  }
  return level.front();
}

inline AggregateState aggregate_tree(std::span<const ClientUpdate> updates,
                                     RankPolicy policy = RankPolicy::kStrict) {
  return aggregate_tree(
      updates,
      [](std::size_t n, const auto& job) {
        for (std::size_t i = 0; i < n; ++i) job(i);
      },
      policy);
}

// Independent route to the same aggregate: C = sum C_i,
// W = C^-1 sum C_i W_i (C_i W_i recovers X_i^T Y_i).
inline AggregateState aggregate_sum_form(std::span<const ClientUpdate> updates) {
  detail::check_uniform(updates);
  const auto& first = updates.front();
  AggregateState s;
  s.gamma = first.gamma;
  s.gram = Matrix::Zero(first.dim(), first.dim());
  Matrix rhs = Matrix::Zero(first.dim(), first.classes());
  for (const auto& u : updates) {
    s.gram += u.gram;
    rhs.noalias() += u.gram * u.weights;
    s.samples += u.samples;
  }
  s.clients = updates.size();
  auto solved = linalg::spd_solve(s.gram, rhs);
  s.weights = std::move(solved.solution);
  s.pinv_fallbacks = solved.used_pseudoinverse ? 1 : 0;
  return s;
}

// Strips the accumulated k * gamma * I from an aggregate.
inline Matrix restore(const AggregateState& state) {
  if (state.clients == 0) throw ContractError("restore: nothing aggregated");
  if (state.gamma == 0.0) return state.weights;
  Matrix pooled = state.gram;
  pooled.diagonal().array() -= static_cast<double>(state.clients) * state.gamma;
  pooled = linalg::symmetrize(pooled);
  const linalg::SpdFactor f(pooled);
  if (!f.positive_definite()) {
    throw RankError(
        "restore: pooled Gram matrix is singular (pooled data lacks full column "
        "rank); aggregate more data or use the regularized weight unrestored");
  }
  return f.solve(state.gram * state.weights);
}

// Centralized solution on the full data: X^+ Y for gamma = 0, ridge otherwise.
inline Matrix joint_oracle(const Matrix& x, const Matrix& y, double gamma) {
  detail::check_gamma(gamma);
  if (gamma == 0.0) return local_train_exact(x, y);
  return local_train(x, y, gamma).weights;
}

inline Matrix joint_oracle(const data::EmbeddingDataset& ds, double gamma) {
  return joint_oracle(ds.x, data::one_hot(ds), gamma);
}

// Row-wise argmax of X W; ties go to the lowest class index.
inline std::vector<data::Label> predict(const Matrix& w, const Matrix& x) {
  if (x.cols() != w.rows()) {
    throw ContractError("predict: X is " + linalg::shape_str(x) + ", W is " +
                        linalg::shape_str(w));
  }
  if (w.cols() == 0) throw ContractError("predict: W has no classes");
  const Matrix scores = x * w;
  std::vector<data::Label> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<data::Label>(best);
  }
  return out;
}

}  // namespace afl
