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

#include "dqsim/quantizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dqsim::quant {

namespace {

// Relative slack for values whose ratio to delta lands a few ulps past the
// top code because delta itself was rounded.
constexpr double kHullSlack = 1e-9;

double max_code_d(int bits) { return std::ldexp(1.0, bits - 1) - 1.0; }

double round_up_binary32(double delta) {
  auto f = static_cast<float>(delta);
  if (static_cast<double>(f) < delta) {
    f = std::nextafter(f, std::numeric_limits<float>::infinity());
  }
  return static_cast<double>(f);
}

// Position of v/delta clamped into the grid, plus whether it was inside.
struct Ratio {
  double r;
  bool inside;
};

Ratio grid_ratio(double x, const QuantGrid& grid) {
  const double lo = static_cast<double>(grid.min_code());
  const double hi = static_cast<double>(grid.max_code());
  const double r = x / grid.delta;
  if (r > hi) return {hi, r <= hi + kHullSlack * hi};
  if (r < lo) return {lo, r >= lo - kHullSlack * -lo};
  return {r, true};
}

}  // namespace

void check_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw std::invalid_argument("bit width " + std::to_string(bits) + " outside [2, 32]");
  }
}

void QuantGrid::validate() const {
  check_bits(bits);
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("grid delta must be finite and nonnegative");
  }
}

void QuantConfig::validate() const {
  check_bits(bx);
  check_bits(b);
  if (!(mu >= 0.0)) throw std::invalid_argument("mu must be nonnegative");
}

QuantGrid grid_for(std::span<const double> v, int bits, GridOptions opts) {
  check_bits(bits);
  const double scale = opts.norm == ScaleNorm::kInf ? linalg::norm_inf(v)
                                                    : std::sqrt(linalg::norm2_sq(v));
  double delta = scale / max_code_d(bits);
  if (opts.precision == ScalePrecision::kBinary32 && delta > 0.0) {
    delta = round_up_binary32(delta);
  }
  return {delta, bits};
}

std::int32_t quantize_scalar(double x, const QuantGrid& grid, rng::Stream& rng) {
  if (!std::isfinite(x)) throw std::invalid_argument("quantize_scalar: non-finite input");
  if (!(grid.delta > 0.0)) {
    throw std::invalid_argument("quantize_scalar: delta must be positive");
  }
  const double r = grid_ratio(x, grid).r;
  const double floor_r = std::floor(r);
  const double frac = r - floor_r;
  auto code = static_cast<std::int64_t>(floor_r);
  // frac == 0 covers grid points, including both clamped endpoints.
  if (frac > 0.0 && rng.uniform() < frac) ++code;
  return static_cast<std::int32_t>(code);
}

LowPrecisionVector quantize_with(std::span<const double> v, const QuantGrid& grid,
                                 rng::Stream& rng) {
  grid.validate();
  LowPrecisionVector q{grid, std::vector<std::int32_t>(v.size(), 0)};
  if (grid.delta == 0.0) {
    for (double x : v) {
      if (x != 0.0) throw std::invalid_argument("delta 0 is only valid for the zero vector");
    }
    return q;
  }
  for (std::size_t i = 0; i < v.size(); ++i) q.codes[i] = quantize_scalar(v[i], grid, rng);
  return q;
}

LowPrecisionVector quantize_vector(std::span<const double> v, int bits, rng::Stream& rng,
                                   GridOptions opts) {
  if (v.empty()) throw std::invalid_argument("quantize_vector: empty vector");
  if (!linalg::all_finite(v)) throw std::invalid_argument("quantize_vector: non-finite input");
  return quantize_with(v, grid_for(v, bits, opts), rng);
}

Vec dequantize(const LowPrecisionVector& q) {
  Vec out(q.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.codes[i] * q.grid.delta;
  return out;
}

double expected_sq_error(std::span<const double> v, const QuantGrid& grid) {
  grid.validate();
  if (grid.delta == 0.0) {
    for (double x : v) {
      if (x != 0.0) throw std::domain_error("expected_sq_error: value outside zero grid");
    }
    return 0.0;
  }
  double total = 0.0;
  for (double x : v) {
    const Ratio ratio = grid_ratio(x, grid);
    if (!ratio.inside) throw std::domain_error("expected_sq_error: value outside grid hull");
    const double frac = ratio.r - std::floor(ratio.r);
    total += frac * (1.0 - frac);
  }
  return total * grid.delta * grid.delta;
}

double mu_required(std::span<const double> x, std::span<const double> snapshot, int bx,
                   GridOptions opts) {
  const double gap = linalg::dist_sq(x, snapshot);
  if (gap == 0.0) throw std::invalid_argument("mu_required: x equals snapshot, use flag-bit message");
  return expected_sq_error(x, grid_for(x, bx, opts)) / gap;
}

int choose_bx(std::span<const double> x, std::span<const double> snapshot, double mu,
              int b_max, GridOptions opts) {
  check_bits(b_max);
  if (!(mu >= 0.0)) throw std::invalid_argument("choose_bx: mu must be nonnegative");
  const double gap = linalg::dist_sq(x, snapshot);
  if (gap == 0.0) throw std::invalid_argument("choose_bx: x equals snapshot, use flag-bit message");
  const double budget = mu * gap;
  for (int bits = kMinBits; bits < b_max; ++bits) {
    if (expected_sq_error(x, grid_for(x, bits, opts)) <= budget) return bits;
  }
  return b_max;
}

}  // namespace dqsim::quant
