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

#include <doctest.h>

#include <sstream>
#include <vector>

#include "dqsim/bitstream.hpp"
#include "dqsim/codec.hpp"

using namespace dqsim;
using namespace dqsim::codec;

TEST_CASE("bit count formulas") {
  CHECK(full_bits(10) == 320);
  CHECK(dense_bits(10, 8) == 112);
  CHECK(position_bits(1) == 0);
  CHECK(position_bits(2) == 1);
  CHECK(position_bits(1000) == 10);
  CHECK(position_bits(1024) == 10);
  CHECK(position_bits(1025) == 11);
  CHECK(sparse_bits(1000, 5, 8) == 32 + 5 * 18);
  CHECK(sparse_bits(1000, 0, 8) == 32);
  CHECK(kFlagBits == 1);
  CHECK_THROWS(position_bits(0));
}

TEST_CASE("bitstream writes MSB first and reads back") {
  BitWriter w;
  w.write(0b101, 3);
  w.write(0xABCD, 16);
  w.write_bit(true);
  w.write(0, 0);
  CHECK(w.bit_count() == 20);
  const auto bytes = std::move(w).finish();
  REQUIRE(bytes.size() == 3);
  CHECK(bytes[0] == 0b10110101);
  BitReader r(bytes);
  CHECK(r.read(3) == 0b101);
  CHECK(r.read(16) == 0xABCD);
  CHECK(r.read_bit());
  CHECK(r.remaining() == 4);
  CHECK_THROWS(r.read(5));

  rng::Stream s(21, rng::Purpose::kTest);
  std::vector<std::pair<std::uint64_t, int>> fields;
  BitWriter w2;
  for (int k = 0; k < 1000; ++k) {
    const int n = static_cast<int>(s.below(65));
    const std::uint64_t v = n == 64 ? s.next_u64() : (n == 0 ? 0 : s.next_u64() & ((1ULL << n) - 1));
    fields.emplace_back(v, n);
    w2.write(v, n);
  }
  const auto b2 = std::move(w2).finish();
  BitReader r2(b2);
  for (auto [v, n] : fields) REQUIRE(r2.read(n) == v);
}

TEST_CASE("dense messages round-trip exactly") {
  rng::Stream s(22, rng::Purpose::kTest);
  const quant::GridOptions wire{quant::ScaleNorm::kInf, quant::ScalePrecision::kBinary32};
  for (int b : {2, 3, 7, 8, 16, 31, 32}) {
    Vec v(37);
    for (auto& x : v) x = 5.0 * s.normal();
    const auto q = quant::quantize_vector(v, b, s, wire);
    const auto msg = encode_dense(q);
    CHECK(msg.kind == MessageKind::kQuantizedDense);
    CHECK(msg.counted_bits == dense_bits(37, b));
    CHECK(decode_dense(msg, 37) == q);
    CHECK(decode_values(msg, 37) == quant::dequantize(q));
    CHECK(coordinates_sent(msg, 37) == 37);
  }
}

TEST_CASE("sparse messages round-trip exactly") {
  rng::Stream s(23, rng::Purpose::kTest);
  const quant::GridOptions wire{quant::ScaleNorm::kInf, quant::ScalePrecision::kBinary32};
  for (int trial = 0; trial < 50; ++trial) {
    Vec a(100);
    for (auto& x : a) x = s.normal();
    const auto plan = sparse::optimal_plan(a, 10.0);
    const auto q = sparse::quantize_sparse(sparse::sparsify(a, plan, s), 8, s, wire);
    const auto msg = encode_sparse(q);
    CHECK(msg.counted_bits == sparse_bits(100, q.entries.size(), 8));
    CHECK(decode_sparse(msg, 100) == q);
    CHECK(coordinates_sent(msg, 100) == q.entries.size());
    CHECK(decode_values(msg, 100) == sparse::dequantize_sparse(q));
  }
  sparse::SparseLowPrecisionVector bad{{1.0, 4}, 8, {{3, 1}, {2, 1}}};
  CHECK_THROWS(encode_sparse(bad));
  bad.entries = {{9, 1}};
  CHECK_THROWS(encode_sparse(bad));
  bad.entries = {{1, 8}};
  CHECK_THROWS(encode_sparse(bad));
}

TEST_CASE("full messages carry binary32 values") {
  const Vec v{0.1, -2.5, 1e10};
  const auto msg = encode_full(v);
  CHECK(msg.counted_bits == 96);
  const Vec back = decode_full(msg, 3);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(v[i])));
  CHECK(coordinates_sent(msg, 3) == 3);
  CHECK_THROWS(encode_full(Vec{std::nan("")}));
  CHECK_THROWS(decode_full(msg, 4));
}

TEST_CASE("flag message resolves to the stored snapshot") {
  const auto msg = encode_flag();
  CHECK(msg.counted_bits == 1);
  const Vec snap{1.0, 2.0};
  CHECK(decode_values(msg, 2, &snap) == snap);
  CHECK_THROWS(decode_values(msg, 2));
  CHECK_THROWS(decode_values(msg, 3, &snap));
  CHECK(coordinates_sent(msg, 2) == 0);
}

TEST_CASE("decoder rejects malformed payloads") {
  auto msg = encode_dense({{0.5, 4}, {1, 2, 3}});
  auto wrong_kind = msg;
  wrong_kind.kind = MessageKind::kQuantizedSparse;
  CHECK_THROWS(decode_sparse(wrong_kind, 3));
  auto truncated = msg;
  truncated.payload.pop_back();
  CHECK_THROWS(decode_dense(truncated, 3));
  auto bad_version = msg;
  bad_version.payload[0] = static_cast<std::uint8_t>(0xF0 | 1);
  CHECK_THROWS(decode_dense(bad_version, 3));
  auto padded = msg;
  padded.payload.push_back(0);
  CHECK_THROWS(decode_dense(padded, 3));
  CHECK_THROWS(encode_dense({{0.5, 4}, {8}}));
}

TEST_CASE("ledger sums by direction and kind") {
  BitLedger ledger;
  ledger.record(encode_dense({{0.5, 4}, {1, 2, 3}}), Direction::kDown, 0);
  ledger.record(encode_flag(), Direction::kDown, 1);
  ledger.record(encode_full(Vec{1.0, 2.0, 3.0}), Direction::kUp, 1);
  ledger.record_barrier(3, Direction::kUp, 2);
  CHECK(ledger.down_bits() == 32 + 12 + 1);
  CHECK(ledger.up_bits() == 96 + 96);
  CHECK(ledger.total_bits() == 45 + 192);
  CHECK(ledger.kind_totals(LedgerKind::kBarrierFullPrecision).count == 1);
  CHECK(ledger.kind_totals(LedgerKind::kSnapshotFlag).bits == 1);
  REQUIRE(ledger.rows().size() == 4);
  CHECK(ledger.rows().back().cumulative_bits == ledger.total_bits());
  std::ostringstream os;
  ledger.write_csv(os);
  CHECK(os.str().rfind("step,direction,kind,bits,cumulative_bits\n0,down,dense,44,44\n", 0) == 0);
  CHECK(os.str().find("2,up,barrier_full,96,237") != std::string::npos);
}
