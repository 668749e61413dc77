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
#include <span>
#include <vector>

#include "dqsim/linalg.hpp"
#include "dqsim/rng.hpp"

namespace dqsim::quant {

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 32;

/// Uniform signed grid {-2^(b-1) d, ..., -d, 0, d, ..., (2^(b-1)-1) d}.
/// delta == 0 is reserved for the all-zero vector.
struct QuantGrid {
  double delta = 0.0;
  int bits = kMinBits;

  std::int64_t min_code() const { return -(std::int64_t{1} << (bits - 1)); }
  std::int64_t max_code() const { return (std::int64_t{1} << (bits - 1)) - 1; }
  void validate() const;

  friend bool operator==(const QuantGrid&, const QuantGrid&) = default;
};

/// On-wire form of a quantized dense vector: value i is codes[i] * delta.
struct LowPrecisionVector {
  QuantGrid grid;
  std::vector<std::int32_t> codes;

  std::size_t size() const { return codes.size(); }
  friend bool operator==(const LowPrecisionVector&, const LowPrecisionVector&) = default;
};

struct QuantConfig {
  int bx = 8;
  int b = 8;
  double mu = 0.1;

  void validate() const;
};

/// Norm that sets the scale: delta = ||v|| / (2^(b-1) - 1).
enum class ScaleNorm { kInf, kL2 };

/// kBinary32 rounds delta up to the next IEEE-754 single so the scale the
/// codes were drawn against is exactly the one a receiver decodes with.
enum class ScalePrecision { kExact, kBinary32 };

struct GridOptions {
  ScaleNorm norm = ScaleNorm::kInf;
  ScalePrecision precision = ScalePrecision::kExact;
};

void check_bits(int bits);

QuantGrid grid_for(std::span<const double> v, int bits, GridOptions opts = {});

/// Stochastic rounding of one value. Inside the grid hull the result is
/// unbiased; outside it clamps to the nearest endpoint.
std::int32_t quantize_scalar(double x, const QuantGrid& grid, rng::Stream& rng);

LowPrecisionVector quantize_with(std::span<const double> v, const QuantGrid& grid,
                                 rng::Stream& rng);

/// delta from the scale rule, then independent per-coordinate rounding.
/// The all-zero vector yields delta 0 and zero codes.
LowPrecisionVector quantize_vector(std::span<const double> v, int bits, rng::Stream& rng,
                                   GridOptions opts = {});

Vec dequantize(const LowPrecisionVector& q);

/// Exact E||Q(v) - v||^2 = sum_i (v_i - z_i)(z_i + delta - v_i).
/// Throws std::domain_error if a coordinate lies outside the hull.
double expected_sq_error(std::span<const double> v, const QuantGrid& grid);

/// Smallest width in [2, b_max] whose expected model error fits
/// mu * ||x - snapshot||^2; b_max when none does. Throws when x equals
/// the snapshot (that case is sent as a flag bit).
int choose_bx(std::span<const double> x, std::span<const double> snapshot, double mu,
              int b_max, GridOptions opts = {});

/// Smallest mu for which the width-bx grid satisfies the model constraint.
double mu_required(std::span<const double> x, std::span<const double> snapshot, int bx,
                   GridOptions opts = {});

}  // namespace dqsim::quant
