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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dqsim::codec {

/// MSB-first bit packer. Fields are concatenated without alignment; the
/// final byte is zero padded.
class BitWriter {
 public:
  void write(std::uint64_t value, int nbits);
  void write_bit(bool bit) { write(bit ? 1u : 0u, 1); }

  std::size_t bit_count() const { return bits_; }
  std::vector<std::uint8_t> finish() &&;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  /// Throws std::runtime_error when the buffer is exhausted.
  std::uint64_t read(int nbits);
  bool read_bit() { return read(1) != 0; }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace dqsim::codec
