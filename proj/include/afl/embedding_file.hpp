#pragma once

// AFLE embedding files, little-endian, no padding:
//
//   "AFLE" | version u16 = 1 | dtype u8 = 0 (f64) | reserved u8 = 0 |
//   N u64 | d u64 | C u64 | N x u32 labels | N*d x f64 row-major

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>

#include "afl/data.hpp"
#include "afl/detail/binary.hpp"

namespace afl::data {

inline constexpr std::uint16_t kAfleVersion = 1;

inline std::vector<char> encode_embeddings(const EmbeddingDataset& ds) {
  afl::detail::ByteWriter w;
  w.bytes("AFLE");
  w.uint<std::uint16_t>(kAfleVersion);
  w.uint<std::uint8_t>(0);
  w.uint<std::uint8_t>(0);
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(ds.size()));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(ds.dim()));
  w.uint<std::uint64_t>(ds.num_classes);
  for (Label l : ds.labels) w.uint<std::uint32_t>(l);
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < ds.dim(); ++j) w.f64(ds.x(i, j));
  }
  return std::move(w).take();
}

inline EmbeddingDataset decode_embeddings(std::vector<char> bytes) {
  afl::detail::ByteReader r(std::move(bytes));
  if (r.bytes(4, "magic") != "AFLE") throw FormatError("bad magic, expected AFLE", 0);
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kAfleVersion) {
    throw FormatError("unsupported AFLE version " + std::to_string(version), 4);
  }
  if (r.uint<std::uint8_t>("dtype") != 0) throw FormatError("unsupported dtype", 6);
  if (r.uint<std::uint8_t>("reserved") != 0) {
    throw FormatError("reserved byte must be 0", 7);
  }
  const auto n = r.uint<std::uint64_t>("N");
  const auto d = r.uint<std::uint64_t>("d");
  const auto c = r.uint<std::uint64_t>("C");
  if (c > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("class count does not fit in u32", 24);
  }
  const std::uint64_t label_bytes = afl::detail::checked_mul(n, 4, r.offset());
  const std::uint64_t entry_bytes =
      afl::detail::checked_mul(afl::detail::checked_mul(n, d, r.offset()), 8, r.offset());
  r.need(label_bytes, "labels");
  if (r.remaining() - label_bytes < entry_bytes) {
    throw FormatError("truncated embeddings: need " + std::to_string(entry_bytes) +
                          " bytes, have " +
                          std::to_string(r.remaining() - label_bytes),
                      r.offset() + label_bytes);
  }

  EmbeddingDataset ds;
  ds.num_classes = static_cast<std::uint32_t>(c);
  ds.labels.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t at = r.offset();
    const auto l = r.uint<std::uint32_t>("label");
    if (l >= c) {
      throw FormatError("label " + std::to_string(l) + " >= C = " +
                            std::to_string(c),
                        at);
    }
    ds.labels[i] = l;
  }
  ds.x.resize(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < ds.x.rows(); ++i) {
    for (Index j = 0; j < ds.x.cols(); ++j) {
      const std::uint64_t at = r.offset();
      const double v = r.f64("embedding");
      if (!std::isfinite(v)) throw FormatError("non-finite embedding entry", at);
      ds.x(i, j) = v;
    }
  }
  r.expect_end();
  return ds;
}

inline void write_embeddings(const EmbeddingDataset& ds,
                             const std::filesystem::path& path) {
  ds.validate();
  afl::detail::write_file(path, encode_embeddings(ds));
}

inline EmbeddingDataset read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(afl::detail::read_file(path));
}

}  // namespace afl::data
