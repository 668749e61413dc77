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
#include "dqsim/quantizer.hpp"
#include "dqsim/rng.hpp"

namespace dqsim::sparse {

/// Bernoulli inclusion probabilities and their sum (the sparsity budget).
struct SparsePlan {
  Vec probs;
  double budget = 0.0;
};

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Indices strictly increasing, values nonzero.
struct SparseRealVector {
  std::size_t dim = 0;
  std::vector<SparseEntry> entries;

  Vec densify() const;
};

/// ||alpha||_1 / ||alpha||_inf, the largest budget for which the
/// magnitude-proportional plan keeps every p_i <= 1.
double budget_max(std::span<const double> alpha);

/// p_i = |alpha_i| * phi / ||alpha||_1, capped at 1 against rounding.
SparsePlan optimal_plan(std::span<const double> alpha, double phi);

/// p_i = phi / d on every coordinate; only used as a comparison plan.
SparsePlan uniform_plan(std::size_t dim, double phi);

/// Keep coordinate i with probability p_i, rescaled to alpha_i / p_i.
SparseRealVector sparsify(std::span<const double> alpha, const SparsePlan& plan,
                          rng::Stream& rng);

/// E||beta||^2 = sum over nonzero alpha_i of alpha_i^2 / p_i.
double second_moment_expected(std::span<const double> alpha, const SparsePlan& plan);

struct SparseCode {
  std::uint32_t index = 0;
  std::int32_t code = 0;
  friend bool operator==(const SparseCode&, const SparseCode&) = default;
};

/// Sparsified-then-quantized vector: (index, code) pairs on one grid.
struct SparseLowPrecisionVector {
  quant::QuantGrid grid;
  std::size_t dim = 0;
  std::vector<SparseCode> entries;

  friend bool operator==(const SparseLowPrecisionVector&,
                         const SparseLowPrecisionVector&) = default;
};

/// Quantizes retained values with delta = ||beta||_inf / (2^(b-1) - 1).
/// Entries that round to code 0 carry no information and are dropped.
SparseLowPrecisionVector quantize_sparse(const SparseRealVector& beta, int bits,
                                         rng::Stream& rng, quant::GridOptions opts = {});

Vec dequantize_sparse(const SparseLowPrecisionVector& q);

}  // namespace dqsim::sparse
