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

#include <cstdint>

namespace dqsim::rng {

/// Logical owners of random streams. Every random draw in a simulation
/// flows through a stream keyed by (seed, purpose, index), so results do
/// not depend on the order in which owners are scheduled.
enum class Purpose : std::uint64_t {
  kMasterQuant = 1,
  kMasterSelect = 2,
  kWorkerSample = 3,
  kWorkerQuant = 4,
  kWorkerLatency = 5,
  kData = 6,
  kInit = 7,
  kTest = 8,
};

/// Counter-based generator: draw k of a stream is a pure function of
/// (key, k). Copying a stream forks it at the current counter.
class Stream {
 public:
  Stream() = default;
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n must be nonzero.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one draw per call).
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace dqsim::rng
