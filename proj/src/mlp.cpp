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

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dqsim/problems.hpp"
#include "dqsim/rng.hpp"

namespace dqsim::problems {

MlpProblem::MlpProblem(Dataset data, std::size_t hidden, double lambda2,
                       double smoothness_estimate)
    : data_(std::move(data)), lambda2_(lambda2), smoothness_(smoothness_estimate) {
  data_.validate();
  if (hidden == 0) throw std::invalid_argument("mlp_problem: hidden layer must be nonempty");
  double max_label = 0.0;
  for (double y : data_.labels) {
    if (y < 0.0 || y != std::floor(y)) {
      throw std::invalid_argument("mlp_problem: labels must be nonnegative class indices");
    }
    max_label = std::max(max_label, y);
  }
  shape_ = {data_.dim, hidden, static_cast<std::size_t>(max_label) + 1};
  if (shape_.classes < 2) shape_.classes = 2;
}

void MlpProblem::forward(std::size_t i, std::span<const double> x, Forward& fw) const {
  if (x.size() != shape_.num_params()) throw std::invalid_argument("mlp: dimension mismatch");
  const std::size_t H = shape_.hidden, C = shape_.classes, D = shape_.inputs;
  const double* w1 = x.data();
  const double* b1 = w1 + H * D;
  const double* w2 = b1 + H;
  const double* b2 = w2 + C * H;
  const auto row = data_.row(i);

  fw.pre.assign(b1, b1 + H);
  for (std::size_t h = 0; h < H; ++h) {
    const double* w = w1 + h * D;
    double z = 0.0;
    for (std::size_t k = 0; k < row.index.size(); ++k) z += w[row.index[k]] * row.value[k];
    fw.pre[h] += z;
  }
  fw.logits.assign(b2, b2 + C);
  for (std::size_t c = 0; c < C; ++c) {
    const double* w = w2 + c * H;
    double z = 0.0;
    for (std::size_t h = 0; h < H; ++h) z += w[h] * std::max(0.0, fw.pre[h]);
    fw.logits[c] += z;
  }
  const double top = *std::max_element(fw.logits.begin(), fw.logits.end());
  double norm = 0.0;
  for (auto& l : fw.logits) {
    l = std::exp(l - top);
    norm += l;
  }
  for (auto& l : fw.logits) l /= norm;
}

double MlpProblem::loss_sample(std::size_t i, std::span<const double> x) const {
  Forward fw;
  forward(i, x, fw);
  const auto y = static_cast<std::size_t>(data_.labels[i]);
  return -std::log(std::max(fw.logits[y], 1e-300)) + 0.5 * lambda2_ * linalg::norm2_sq(x);
}

void MlpProblem::add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                                 std::span<double> out) const {
  Forward fw;
  forward(i, x, fw);
  const std::size_t H = shape_.hidden, C = shape_.classes, D = shape_.inputs;
  const auto y = static_cast<std::size_t>(data_.labels[i]);
  const double* w2 = x.data() + H * D + H;
  double* gw1 = out.data();
  double* gb1 = gw1 + H * D;
  double* gw2 = gb1 + H;
  double* gb2 = gw2 + C * H;
  const auto row = data_.row(i);

  // dL/dlogit = p - onehot(y)
  Vec dlogit = fw.logits;
  dlogit[y] -= 1.0;
  Vec dhidden(H, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const double g = scale * dlogit[c];
    gb2[c] += g;
    for (std::size_t h = 0; h < H; ++h) {
      gw2[c * H + h] += g * std::max(0.0, fw.pre[h]);
      dhidden[h] += dlogit[c] * w2[c * H + h];
    }
  }
  for (std::size_t h = 0; h < H; ++h) {
    if (fw.pre[h] <= 0.0) continue;
    const double g = scale * dhidden[h];
    gb1[h] += g;
    for (std::size_t k = 0; k < row.index.size(); ++k) gw1[h * D + row.index[k]] += g * row.value[k];
  }
  if (lambda2_ != 0.0) linalg::axpy(scale * lambda2_, x, out);
}

void MlpProblem::prox(double, std::span<const double> v, std::span<double> out) const {
  std::copy(v.begin(), v.end(), out.begin());
}

Vec MlpProblem::initial_point(std::uint64_t seed) const {
  rng::Stream gen(seed, rng::Purpose::kInit, 0);
  const std::size_t H = shape_.hidden, C = shape_.classes, D = shape_.inputs;
  Vec x(shape_.num_params(), 0.0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(D));
  const double s2 = std::sqrt(2.0 / static_cast<double>(H));
  for (std::size_t k = 0; k < H * D; ++k) x[k] = s1 * gen.normal();
  double* w2 = x.data() + H * D + H;
  for (std::size_t k = 0; k < C * H; ++k) w2[k] = s2 * gen.normal();
  return x;
}

double MlpProblem::accuracy(std::span<const double> x) const {
  Forward fw;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < num_samples(); ++i) {
    forward(i, x, fw);
    const auto pred = static_cast<std::size_t>(
        std::max_element(fw.logits.begin(), fw.logits.end()) - fw.logits.begin());
    correct += pred == static_cast<std::size_t>(data_.labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(num_samples());
}

std::shared_ptr<const MlpProblem> mlp_problem(Dataset data, std::size_t hidden, double lambda2) {
  return std::make_shared<const MlpProblem>(std::move(data), hidden, lambda2);
}

}  // namespace dqsim::problems
