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

#include "dqsim/bitstream.hpp"

#include <stdexcept>

namespace dqsim::codec {

void BitWriter::write(std::uint64_t value, int nbits) {
  if (nbits < 0 || nbits > 64) throw std::invalid_argument("BitWriter: field width out of range");
  for (int i = nbits - 1; i >= 0; --i) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
    ++bits_;
  }
}

std::vector<std::uint8_t> BitWriter::finish() && { return std::move(bytes_); }

std::uint64_t BitReader::read(int nbits) {
  if (nbits < 0 || nbits > 64) throw std::invalid_argument("BitReader: field width out of range");
  if (static_cast<std::size_t>(nbits) > remaining()) {
    throw std::runtime_error("BitReader: read past end of payload");
  }
  std::uint64_t value = 0;
  for (int i = 0; i < nbits; ++i) {
    const std::uint8_t byte = bytes_[pos_ / 8];
    value = (value << 1) | ((byte >> (7 - pos_ % 8)) & 1u);
    ++pos_;
  }
  return value;
}

}  // namespace dqsim::codec
