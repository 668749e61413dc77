// Copyright 2026 The dqsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "dqsim/linalg.hpp"
#include "dqsim/quantizer.hpp"
#include "dqsim/sparsifier.hpp"

namespace dqsim::codec {

inline constexpr std::uint8_t kFormatVersion = 1;

enum class MessageKind : std::uint8_t {
  kFullPrecisionVector = 0,
  kQuantizedDense = 1,
  kQuantizedSparse = 2,
  kSnapshotFlag = 3,
};

std::string_view kind_name(MessageKind kind);

/// Encoded message. `payload` starts with a one-byte format tag
/// (version << 4 | kind); quantized kinds follow it with a one-byte code
/// width. Tag, width, the sparse entry count and final-byte padding are
/// framing: `counted_bits` holds only the information bits.
///
/// Layouts after the framing bytes, all fields MSB-first:
///   full:   d x binary32
///   dense:  binary32 delta, d x b-bit two's complement codes
///   sparse: binary32 delta, u32 nnz, nnz x (ceil(log2 d)-bit index, b-bit code)
///   flag:   one bit (1)
struct WireMessage {
  MessageKind kind = MessageKind::kSnapshotFlag;
  std::vector<std::uint8_t> payload;
  std::uint64_t counted_bits = 0;
};

/// ceil(log2 d); 0 for d == 1.
int position_bits(std::size_t dim);

std::uint64_t full_bits(std::size_t dim);
std::uint64_t dense_bits(std::size_t dim, int bits);
std::uint64_t sparse_bits(std::size_t dim, std::size_t nnz, int bits);
inline constexpr std::uint64_t kFlagBits = 1;

/// delta travels as binary32; grids built with ScalePrecision::kBinary32
/// round-trip exactly, others are rounded to nearest.
WireMessage encode_dense(const quant::LowPrecisionVector& q);
quant::LowPrecisionVector decode_dense(const WireMessage& msg, std::size_t dim);

WireMessage encode_sparse(const sparse::SparseLowPrecisionVector& q);
sparse::SparseLowPrecisionVector decode_sparse(const WireMessage& msg, std::size_t dim);

WireMessage encode_full(std::span<const double> v);
Vec decode_full(const WireMessage& msg, std::size_t dim);

WireMessage encode_flag();

/// Decodes any vector-carrying kind to reals; a snapshot flag decodes to
/// `snapshot`, which must then be non-null.
Vec decode_values(const WireMessage& msg, std::size_t dim, const Vec* snapshot = nullptr);

/// Number of coordinates a message carries explicitly (d, nnz or 0).
std::size_t coordinates_sent(const WireMessage& msg, std::size_t dim);

enum class Direction : std::uint8_t { kUp, kDown };
std::string_view direction_name(Direction dir);

/// Ledger buckets: the four wire kinds plus the per-epoch full-precision
/// gradient exchange, kept apart so totals with and without it are both
/// recoverable.
enum class LedgerKind : std::uint8_t {
  kFullPrecisionVector = 0,
  kQuantizedDense = 1,
  kQuantizedSparse = 2,
  kSnapshotFlag = 3,
  kBarrierFullPrecision = 4,
};
inline constexpr std::size_t kLedgerKinds = 5;
std::string_view ledger_kind_name(LedgerKind kind);

struct LedgerRow {
  std::uint64_t step = 0;
  Direction direction = Direction::kUp;
  LedgerKind kind = LedgerKind::kFullPrecisionVector;
  std::uint64_t bits = 0;
  std::uint64_t cumulative_bits = 0;
};

struct KindTotals {
  std::uint64_t count = 0;
  std::uint64_t bits = 0;
};

/// Cumulative transmitted-bit accounting. Totals are sums over per-kind
/// counters; rows are kept for CSV export.
class BitLedger {
 public:
  explicit BitLedger(bool keep_rows = true) : keep_rows_(keep_rows) {}

  void record(const WireMessage& msg, Direction dir, std::uint64_t step);
  /// One full-precision vector of `dim` coordinates exchanged at an epoch barrier.
  void record_barrier(std::size_t dim, Direction dir, std::uint64_t step);

  std::uint64_t up_bits() const { return up_bits_; }
  std::uint64_t down_bits() const { return down_bits_; }
  std::uint64_t total_bits() const { return up_bits_ + down_bits_; }
  const KindTotals& kind_totals(LedgerKind kind) const {
    return per_kind_[static_cast<std::size_t>(kind)];
  }
  const std::vector<LedgerRow>& rows() const { return rows_; }

  /// Columns: step,direction,kind,bits,cumulative_bits
  void write_csv(std::ostream& os) const;

 private:
  void add(LedgerKind kind, std::uint64_t bits, Direction dir, std::uint64_t step);

  bool keep_rows_;
  std::uint64_t up_bits_ = 0;
  std::uint64_t down_bits_ = 0;
  std::array<KindTotals, kLedgerKinds> per_kind_{};
  std::vector<LedgerRow> rows_;
};

}  // namespace dqsim::codec
