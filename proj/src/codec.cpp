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

#include "dqsim/codec.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dqsim/bitstream.hpp"

namespace dqsim::codec {

namespace {

std::uint8_t make_tag(MessageKind kind) {
  return static_cast<std::uint8_t>((kFormatVersion << 4) | static_cast<std::uint8_t>(kind));
}

void write_f32(BitWriter& w, double x) {
  w.write(std::bit_cast<std::uint32_t>(static_cast<float>(x)), 32);
}

double read_f32(BitReader& r) {
  return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(r.read(32))));
}

std::uint64_t pack_code(std::int32_t code, int bits) {
  const std::uint64_t mask = bits == 64 ? ~0ULL : ((1ULL << bits) - 1);
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(code)) & mask;
}

std::int32_t unpack_code(std::uint64_t raw, int bits) {
  const std::uint64_t sign = 1ULL << (bits - 1);
  auto v = static_cast<std::int64_t>(raw);
  if (raw & sign) v -= static_cast<std::int64_t>(1ULL << bits);
  return static_cast<std::int32_t>(v);
}

void check_code(std::int32_t code, const quant::QuantGrid& grid) {
  if (code < grid.min_code() || code > grid.max_code()) {
    throw std::invalid_argument("codec: code outside the b-bit range");
  }
}

void check_wire_bits(int bits) {
  if (bits > quant::kMaxBits) throw std::invalid_argument("codec: code width above 32 bits");
  quant::check_bits(bits);
}

// Reads and validates the tag; returns the reader positioned after it.
BitReader open(const WireMessage& msg, MessageKind expected) {
  if (msg.kind != expected) throw std::runtime_error("codec: unexpected message kind");
  BitReader r(msg.payload);
  const auto tag = static_cast<std::uint8_t>(r.read(8));
  if ((tag >> 4) != kFormatVersion) throw std::runtime_error("codec: unsupported format version");
  if ((tag & 0x0F) != static_cast<std::uint8_t>(expected)) {
    throw std::runtime_error("codec: tag does not match message kind");
  }
  return r;
}

}  // namespace

std::string_view kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::kFullPrecisionVector: return "full";
    case MessageKind::kQuantizedDense: return "dense";
    case MessageKind::kQuantizedSparse: return "sparse";
    case MessageKind::kSnapshotFlag: return "flag";
  }
  return "unknown";
}

int position_bits(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("position_bits: zero dimension");
  int bits = 0;
  while ((std::size_t{1} << bits) < dim) ++bits;
  return bits;
}

std::uint64_t full_bits(std::size_t dim) { return 32ULL * dim; }

std::uint64_t dense_bits(std::size_t dim, int bits) {
  return 32ULL + static_cast<std::uint64_t>(bits) * dim;
}

std::uint64_t sparse_bits(std::size_t dim, std::size_t nnz, int bits) {
  return 32ULL + nnz * static_cast<std::uint64_t>(position_bits(dim) + bits);
}

WireMessage encode_dense(const quant::LowPrecisionVector& q) {
  check_wire_bits(q.grid.bits);
  q.grid.validate();
  BitWriter w;
  w.write(make_tag(MessageKind::kQuantizedDense), 8);
  w.write(static_cast<std::uint64_t>(q.grid.bits), 8);
  write_f32(w, q.grid.delta);
  for (std::int32_t code : q.codes) {
    check_code(code, q.grid);
    w.write(pack_code(code, q.grid.bits), q.grid.bits);
  }
  return {MessageKind::kQuantizedDense, std::move(w).finish(), dense_bits(q.codes.size(), q.grid.bits)};
}

quant::LowPrecisionVector decode_dense(const WireMessage& msg, std::size_t dim) {
  BitReader r = open(msg, MessageKind::kQuantizedDense);
  const int bits = static_cast<int>(r.read(8));
  check_wire_bits(bits);
  quant::LowPrecisionVector q;
  q.grid.bits = bits;
  q.grid.delta = read_f32(r);
  q.grid.validate();
  q.codes.resize(dim);
  for (auto& code : q.codes) code = unpack_code(r.read(bits), bits);
  if (r.remaining() >= 8) throw std::runtime_error("codec: trailing bytes in dense message");
  return q;
}

WireMessage encode_sparse(const sparse::SparseLowPrecisionVector& q) {
  check_wire_bits(q.grid.bits);
  q.grid.validate();
  if (q.dim == 0) throw std::invalid_argument("encode_sparse: zero dimension");
  if (q.entries.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("encode_sparse: too many entries");
  }
  const int pos_bits = position_bits(q.dim);
  BitWriter w;
  w.write(make_tag(MessageKind::kQuantizedSparse), 8);
  w.write(static_cast<std::uint64_t>(q.grid.bits), 8);
  write_f32(w, q.grid.delta);
  w.write(q.entries.size(), 32);
  std::int64_t last = -1;
  for (const auto& e : q.entries) {
    if (e.index >= q.dim) throw std::invalid_argument("encode_sparse: index >= dimension");
    if (static_cast<std::int64_t>(e.index) <= last) {
      throw std::invalid_argument("encode_sparse: indices must be strictly increasing");
    }
    last = e.index;
    check_code(e.code, q.grid);
    w.write(e.index, pos_bits);
    w.write(pack_code(e.code, q.grid.bits), q.grid.bits);
  }
  return {MessageKind::kQuantizedSparse, std::move(w).finish(),
          sparse_bits(q.dim, q.entries.size(), q.grid.bits)};
}

sparse::SparseLowPrecisionVector decode_sparse(const WireMessage& msg, std::size_t dim) {
  BitReader r = open(msg, MessageKind::kQuantizedSparse);
  const int bits = static_cast<int>(r.read(8));
  check_wire_bits(bits);
  sparse::SparseLowPrecisionVector q;
  q.grid.bits = bits;
  q.grid.delta = read_f32(r);
  q.grid.validate();
  q.dim = dim;
  const auto nnz = static_cast<std::size_t>(r.read(32));
  const int pos_bits = position_bits(dim);
  if (nnz * static_cast<std::size_t>(pos_bits + bits) > r.remaining()) {
    throw std::runtime_error("codec: sparse entry count exceeds payload");
  }
  q.entries.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    const auto index = static_cast<std::uint32_t>(r.read(pos_bits));
    if (index >= dim) throw std::runtime_error("codec: sparse index out of range");
    q.entries.push_back({index, unpack_code(r.read(bits), bits)});
  }
  return q;
}

WireMessage encode_full(std::span<const double> v) {
  if (!linalg::all_finite(v)) throw std::invalid_argument("encode_full: non-finite input");
  BitWriter w;
  w.write(make_tag(MessageKind::kFullPrecisionVector), 8);
  for (double x : v) write_f32(w, x);
  return {MessageKind::kFullPrecisionVector, std::move(w).finish(), full_bits(v.size())};
}

Vec decode_full(const WireMessage& msg, std::size_t dim) {
  BitReader r = open(msg, MessageKind::kFullPrecisionVector);
  Vec out(dim);
  for (auto& x : out) x = read_f32(r);
  if (r.remaining() != 0) throw std::runtime_error("codec: trailing bytes in full message");
  return out;
}

WireMessage encode_flag() {
  BitWriter w;
  w.write(make_tag(MessageKind::kSnapshotFlag), 8);
  w.write_bit(true);
  return {MessageKind::kSnapshotFlag, std::move(w).finish(), kFlagBits};
}

Vec decode_values(const WireMessage& msg, std::size_t dim, const Vec* snapshot) {
  switch (msg.kind) {
    case MessageKind::kFullPrecisionVector: return decode_full(msg, dim);
    case MessageKind::kQuantizedDense: return quant::dequantize(decode_dense(msg, dim));
    case MessageKind::kQuantizedSparse: return sparse::dequantize_sparse(decode_sparse(msg, dim));
    case MessageKind::kSnapshotFlag: {
      BitReader r = open(msg, MessageKind::kSnapshotFlag);
      if (!r.read_bit()) throw std::runtime_error("codec: malformed flag message");
      if (snapshot == nullptr) throw std::runtime_error("codec: flag message without a stored snapshot");
      if (snapshot->size() != dim) throw std::runtime_error("codec: snapshot dimension mismatch");
      return *snapshot;
    }
  }
  throw std::runtime_error("codec: unknown message kind");
}

std::size_t coordinates_sent(const WireMessage& msg, std::size_t dim) {
  switch (msg.kind) {
    case MessageKind::kFullPrecisionVector:
    case MessageKind::kQuantizedDense: return dim;
    case MessageKind::kQuantizedSparse: {
      BitReader r(msg.payload);
      r.read(8 + 8 + 32);
      return static_cast<std::size_t>(r.read(32));
    }
    case MessageKind::kSnapshotFlag: return 0;
  }
  return 0;
}

std::string_view direction_name(Direction dir) { return dir == Direction::kUp ? "up" : "down"; }

std::string_view ledger_kind_name(LedgerKind kind) {
  switch (kind) {
    case LedgerKind::kFullPrecisionVector: return "full";
    case LedgerKind::kQuantizedDense: return "dense";
    case LedgerKind::kQuantizedSparse: return "sparse";
    case LedgerKind::kSnapshotFlag: return "flag";
    case LedgerKind::kBarrierFullPrecision: return "barrier_full";
  }
  return "unknown";
}

void BitLedger::add(LedgerKind kind, std::uint64_t bits, Direction dir, std::uint64_t step) {
  (dir == Direction::kUp ? up_bits_ : down_bits_) += bits;
  auto& totals = per_kind_[static_cast<std::size_t>(kind)];
  ++totals.count;
  totals.bits += bits;
  if (keep_rows_) rows_.push_back({step, dir, kind, bits, total_bits()});
}

void BitLedger::record(const WireMessage& msg, Direction dir, std::uint64_t step) {
  add(static_cast<LedgerKind>(msg.kind), msg.counted_bits, dir, step);
}

void BitLedger::record_barrier(std::size_t dim, Direction dir, std::uint64_t step) {
  add(LedgerKind::kBarrierFullPrecision, full_bits(dim), dir, step);
}

void BitLedger::write_csv(std::ostream& os) const {
  os << "step,direction,kind,bits,cumulative_bits\n";
  for (const auto& row : rows_) {
    os << row.step << ',' << direction_name(row.direction) << ','
       << ledger_kind_name(row.kind) << ',' << row.bits << ',' << row.cumulative_bits << '\n';
  }
}

}  // namespace dqsim::codec
