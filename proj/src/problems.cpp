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

#include "dqsim/problems.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dqsim::problems {

Vec CompositeProblem::grad_sample(std::size_t i, std::span<const double> x) const {
  Vec g(dim(), 0.0);
  add_grad_sample(i, x, 1.0, g);
  return g;
}

void CompositeProblem::accumulate_grad(std::size_t begin, std::size_t end,
                                       std::span<const double> x, std::span<double> acc) const {
  for (std::size_t i = begin; i < end; ++i) add_grad_sample(i, x, 1.0, acc);
}

Vec CompositeProblem::full_grad(std::span<const double> x) const {
  Vec g(dim(), 0.0);
  accumulate_grad(0, num_samples(), x, g);
  const double inv_n = 1.0 / static_cast<double>(num_samples());
  for (auto& v : g) v *= inv_n;
  return g;
}

double CompositeProblem::f_value(std::span<const double> x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < num_samples(); ++i) total += loss_sample(i, x);
  return total / static_cast<double>(num_samples());
}

Vec CompositeProblem::prox(double eta, std::span<const double> v) const {
  Vec out(v.size());
  prox(eta, v, out);
  return out;
}

double gradient_mapping_norm(const CompositeProblem& problem, std::span<const double> x,
                             double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("gradient_mapping_norm: eta must be positive");
  const Vec g = problem.full_grad(x);
  Vec step(x.begin(), x.end());
  linalg::axpy(-eta, g, step);
  const Vec p = problem.prox(eta, step);
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double gm = (x[j] - p[j]) / eta;
    total += gm * gm;
  }
  return total;
}

void soft_threshold(std::span<const double> v, double threshold, std::span<double> out) {
  linalg::require_same_size(v.size(), out.size(), "soft_threshold");
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double mag = std::abs(v[j]) - threshold;
    out[j] = mag > 0.0 ? std::copysign(mag, v[j]) : 0.0;
  }
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

}  // namespace

LogisticProblem::LogisticProblem(Dataset data, double lambda1, double lambda2, double smoothness)
    : data_(std::move(data)), lambda1_(lambda1), lambda2_(lambda2) {
  data_.validate();
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw std::invalid_argument("logistic_problem: regularization weights must be nonnegative");
  }
  double max_row_sq = 0.0;
  for (std::size_t i = 0; i < data_.num_samples(); ++i) {
    const double y = data_.labels[i];
    if (y != 1.0 && y != -1.0) {
      throw std::invalid_argument("logistic_problem: labels must be +1 or -1 (row " +
                                  std::to_string(i) + ")");
    }
    max_row_sq = std::max(max_row_sq, linalg::norm2_sq(data_.row(i).value));
  }
  if (smoothness < 0.0) throw std::invalid_argument("logistic_problem: smoothness must be >= 0");
  smoothness_ = smoothness > 0.0 ? smoothness : max_row_sq / 4.0 + lambda2_;
}

double LogisticProblem::margin(std::size_t i, std::span<const double> x) const {
  const auto row = data_.row(i);
  double z = 0.0;
  for (std::size_t k = 0; k < row.index.size(); ++k) z += row.value[k] * x[row.index[k]];
  return data_.labels[i] * z;
}

double LogisticProblem::loss_sample(std::size_t i, std::span<const double> x) const {
  return log1p_exp_neg(margin(i, x)) + 0.5 * lambda2_ * linalg::norm2_sq(x);
}

void LogisticProblem::add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                                      std::span<double> out) const {
  const auto row = data_.row(i);
  const double coef = -scale * data_.labels[i] * sigmoid_neg(margin(i, x));
  for (std::size_t k = 0; k < row.index.size(); ++k) out[row.index[k]] += coef * row.value[k];
  if (lambda2_ != 0.0) linalg::axpy(scale * lambda2_, x, out);
}

double LogisticProblem::h_value(std::span<const double> x) const {
  return lambda1_ * linalg::norm1(x);
}

void LogisticProblem::prox(double eta, std::span<const double> v, std::span<double> out) const {
  soft_threshold(v, eta * lambda1_, out);
}

double LogisticProblem::accuracy(std::span<const double> x) const {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < num_samples(); ++i) correct += margin(i, x) > 0.0;
  return static_cast<double>(correct) / static_cast<double>(num_samples());
}

std::shared_ptr<const LogisticProblem> logistic_problem(Dataset data, double lambda1,
                                                        double lambda2, double smoothness) {
  return std::make_shared<const LogisticProblem>(std::move(data), lambda1, lambda2, smoothness);
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticProblem::QuadraticProblem(std::vector<Vec> centers, double curvature, double lambda1)
    : centers_(std::move(centers)), curvature_(curvature), lambda1_(lambda1) {
  if (centers_.empty()) throw std::invalid_argument("quadratic problem needs at least one center");
  dim_ = centers_.front().size();
  for (const auto& c : centers_) linalg::require_same_size(c.size(), dim_, "QuadraticProblem");
  if (!(curvature > 0.0)) throw std::invalid_argument("curvature must be positive");
}

double QuadraticProblem::loss_sample(std::size_t i, std::span<const double> x) const {
  return 0.5 * curvature_ * linalg::dist_sq(x, centers_[i]);
}

void QuadraticProblem::add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                                       std::span<double> out) const {
  for (std::size_t j = 0; j < dim_; ++j) out[j] += scale * curvature_ * (x[j] - centers_[i][j]);
}

double QuadraticProblem::h_value(std::span<const double> x) const {
  return lambda1_ * linalg::norm1(x);
}

void QuadraticProblem::prox(double eta, std::span<const double> v, std::span<double> out) const {
  soft_threshold(v, eta * lambda1_, out);
}

Vec QuadraticProblem::minimizer() const {
  Vec mean(dim_, 0.0);
  for (const auto& c : centers_) linalg::axpy(1.0 / static_cast<double>(centers_.size()), c, mean);
  // argmin (c/2)||x - mean||^2 + lambda1 ||x||_1 is a soft threshold at lambda1 / c.
  Vec out(dim_);
  soft_threshold(mean, lambda1_ / curvature_, out);
  return out;
}

// ---------------------------------------------------------------------------
// Box restriction

BoxedProblem::BoxedProblem(std::shared_ptr<const CompositeProblem> inner, double radius)
    : inner_(std::move(inner)), radius_(radius) {
  if (!inner_) throw std::invalid_argument("BoxedProblem: null inner problem");
  if (!(radius > 0.0)) throw std::invalid_argument("BoxedProblem: radius must be positive");
}

double BoxedProblem::h_value(std::span<const double> x) const {
  if (linalg::norm_inf(x) > radius_) return std::numeric_limits<double>::infinity();
  return inner_->h_value(x);
}

void BoxedProblem::prox(double eta, std::span<const double> v, std::span<double> out) const {
  inner_->prox(eta, v, out);
  for (auto& x : out) x = std::clamp(x, -radius_, radius_);
}

}  // namespace dqsim::problems
