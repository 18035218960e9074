#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>

#include "afl/analytic.hpp"
#include "afl/data.hpp"

namespace afl::harness {

// Entrywise L1 deviation sum |A_ij - B_ij|.
inline double delta_w(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError("delta_w: shapes " + linalg::shape_str(a) + " and " +
                        linalg::shape_str(b) + " differ");
  }
  return (a - b).cwiseAbs().sum();
}

inline double l1_norm(const Matrix& a) { return a.cwiseAbs().sum(); }

// ||A - B||_F / ||B||_F (absolute when B = 0).
inline double relative_frobenius(const Matrix& a, const Matrix& b) {
  const double denom = b.norm();
  const double diff = (a - b).norm();
  return denom > 0.0 ? diff / denom : diff;
}

// Top-1 accuracy of W on ds.
inline double accuracy(const Matrix& w, const data::EmbeddingDataset& ds) {
  if (ds.size() == 0) throw ContractError("accuracy: empty dataset");
  const auto predicted = predict(w, ds.x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    hits += predicted[i] == ds.labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// FNV-1a 64 over the little-endian bytes of the entries in row-major order,
// preceded by the row and column counts.
inline std::uint64_t checksum(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(m.rows()));
  feed(static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) feed(std::bit_cast<std::uint64_t>(m(i, j)));
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace afl::harness
