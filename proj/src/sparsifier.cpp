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

#include "dqsim/sparsifier.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dqsim::sparse {

Vec SparseRealVector::densify() const {
  Vec out(dim, 0.0);
  for (const auto& e : entries) out.at(e.index) = e.value;
  return out;
}

double budget_max(std::span<const double> alpha) {
  const double inf = linalg::norm_inf(alpha);
  if (inf == 0.0) throw std::invalid_argument("budget_max: zero vector");
  return linalg::norm1(alpha) / inf;
}

SparsePlan optimal_plan(std::span<const double> alpha, double phi) {
  const double cap = budget_max(alpha);
  if (!(phi > 0.0)) throw std::invalid_argument("optimal_plan: budget must be positive");
  if (phi > cap * (1.0 + 1e-12)) {
    throw std::invalid_argument("optimal_plan: variance-optimality precondition violated (phi > ||a||_1/||a||_inf)");
  }
  const double l1 = linalg::norm1(alpha);
  SparsePlan plan{Vec(alpha.size(), 0.0), phi};
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    plan.probs[i] = std::min(1.0, std::abs(alpha[i]) * phi / l1);
  }
  return plan;
}

SparsePlan uniform_plan(std::size_t dim, double phi) {
  if (dim == 0 || !(phi > 0.0) || phi > static_cast<double>(dim)) {
    throw std::invalid_argument("uniform_plan: need 0 < phi <= d");
  }
  return {Vec(dim, phi / static_cast<double>(dim)), phi};
}

SparseRealVector sparsify(std::span<const double> alpha, const SparsePlan& plan,
                          rng::Stream& rng) {
  linalg::require_same_size(alpha.size(), plan.probs.size(), "sparsify");
  if (alpha.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("sparsify: dimension too large");
  }
  SparseRealVector out{alpha.size(), {}};
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double p = plan.probs[i];
    if (p <= 0.0 || alpha[i] == 0.0) continue;
    if (p < 1.0 && rng.uniform() >= p) continue;
    out.entries.push_back({static_cast<std::uint32_t>(i), alpha[i] / p});
  }
  return out;
}

double second_moment_expected(std::span<const double> alpha, const SparsePlan& plan) {
  linalg::require_same_size(alpha.size(), plan.probs.size(), "second_moment_expected");
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] == 0.0) continue;
    if (!(plan.probs[i] > 0.0)) return std::numeric_limits<double>::infinity();
    total += alpha[i] * alpha[i] / plan.probs[i];
  }
  return total;
}

SparseLowPrecisionVector quantize_sparse(const SparseRealVector& beta, int bits,
                                         rng::Stream& rng, quant::GridOptions opts) {
  Vec values;
  values.reserve(beta.entries.size());
  for (const auto& e : beta.entries) values.push_back(e.value);
  SparseLowPrecisionVector out{quant::grid_for(values, bits, opts), beta.dim, {}};
  if (out.grid.delta == 0.0) return out;
  out.entries.reserve(beta.entries.size());
  for (const auto& e : beta.entries) {
    const std::int32_t code = quant::quantize_scalar(e.value, out.grid, rng);
    if (code != 0) out.entries.push_back({e.index, code});
  }
  return out;
}

Vec dequantize_sparse(const SparseLowPrecisionVector& q) {
  Vec out(q.dim, 0.0);
  for (const auto& e : q.entries) out.at(e.index) = e.code * q.grid.delta;
  return out;
}

}  // namespace dqsim::sparse
