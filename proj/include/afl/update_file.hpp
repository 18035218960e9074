#pragma once

// AFLU client-update files, little-endian, no padding:
//
//   "AFLU" | version u16 = 1 | d u64 | C u64 | gamma f64 | n u64 |
//   W (d x C f64, row-major) | C_r (d x d f64, row-major)

#include <cmath>
#include <filesystem>

#include "afl/analytic.hpp"
#include "afl/detail/binary.hpp"

namespace afl {

inline constexpr std::uint16_t kAfluVersion = 1;

inline std::vector<char> encode_update(const ClientUpdate& u) {
  if (u.gram.rows() != u.dim() || u.gram.cols() != u.dim()) {
    throw ContractError("encode_update: Gram matrix is " +
                        linalg::shape_str(u.gram) + ", weights are " +
                        linalg::shape_str(u.weights));
  }
  ::afl::detail::ByteWriter w;
  w.bytes("AFLU");
  w.uint<std::uint16_t>(kAfluVersion);
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(u.dim()));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(u.classes()));
  w.f64(u.gamma);
  w.uint<std::uint64_t>(u.samples);
  for (Index i = 0; i < u.weights.rows(); ++i) {
    for (Index j = 0; j < u.weights.cols(); ++j) w.f64(u.weights(i, j));
  }
  for (Index i = 0; i < u.gram.rows(); ++i) {
    for (Index j = 0; j < u.gram.cols(); ++j) w.f64(u.gram(i, j));
  }
  return std::move(w).take();
}

inline ClientUpdate decode_update(std::vector<char> bytes) {
  ::afl::detail::ByteReader r(std::move(bytes));
  if (r.bytes(4, "magic") != "AFLU") throw FormatError("bad magic, expected AFLU", 0);
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kAfluVersion) {
    throw FormatError("unsupported AFLU version " + std::to_string(version), 4);
  }
  const auto d = r.uint<std::uint64_t>("d");
  const auto c = r.uint<std::uint64_t>("C");
  const std::uint64_t gamma_at = r.offset();
  ClientUpdate u;
  u.gamma = r.f64("gamma");
  if (!(u.gamma >= 0.0) || !std::isfinite(u.gamma)) {
    throw FormatError("gamma must be finite and >= 0", gamma_at);
  }
  u.samples = r.uint<std::uint64_t>("n");
  const std::uint64_t w_count = ::afl::detail::checked_mul(d, c, r.offset());
  const std::uint64_t c_count = ::afl::detail::checked_mul(d, d, r.offset());
  r.need(::afl::detail::checked_mul(w_count, 8, r.offset()), "weights");
  if (r.remaining() - w_count * 8 < ::afl::detail::checked_mul(c_count, 8, r.offset())) {
    throw FormatError("truncated Gram matrix", r.offset() + w_count * 8);
  }
  auto read_matrix = [&r](Matrix& m, std::uint64_t rows, std::uint64_t cols) {
    m.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        const std::uint64_t at = r.offset();
        const double v = r.f64("matrix entry");
        if (!std::isfinite(v)) throw FormatError("non-finite matrix entry", at);
        m(i, j) = v;
      }
    }
  };
  read_matrix(u.weights, d, c);
  read_matrix(u.gram, d, d);
  r.expect_end();
  return u;
}

inline void write_update(const ClientUpdate& u, const std::filesystem::path& path) {
  ::afl::detail::write_file(path, encode_update(u));
}

inline ClientUpdate read_update(const std::filesystem::path& path) {
  return decode_update(::afl::detail::read_file(path));
}

}  // namespace afl
