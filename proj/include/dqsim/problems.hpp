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
#include <memory>
#include <span>

#include "dqsim/dataset.hpp"
#include "dqsim/linalg.hpp"

namespace dqsim::problems {

/// P(x) = f(x) + h(x) with f = (1/n) sum_i f_i smooth and h proximable.
/// Implementations are immutable and safe to evaluate concurrently.
class CompositeProblem {
 public:
  virtual ~CompositeProblem() = default;

  virtual std::size_t num_samples() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double loss_sample(std::size_t i, std::span<const double> x) const = 0;
  /// out += scale * grad f_i(x)
  virtual void add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                               std::span<double> out) const = 0;
  virtual double h_value(std::span<const double> x) const = 0;
  /// argmin_y h(y) + ||y - v||^2 / (2 eta)
  virtual void prox(double eta, std::span<const double> v, std::span<double> out) const = 0;
  /// Lipschitz estimate of each grad f_i.
  virtual double smoothness() const = 0;

  Vec grad_sample(std::size_t i, std::span<const double> x) const;
  /// acc += sum_{i in [begin, end)} grad f_i(x), in index order.
  void accumulate_grad(std::size_t begin, std::size_t end, std::span<const double> x,
                       std::span<double> acc) const;
  /// (1/n) sum_i grad f_i(x), summed in index order then scaled.
  Vec full_grad(std::span<const double> x) const;
  double f_value(std::span<const double> x) const;
  double objective(std::span<const double> x) const { return f_value(x) + h_value(x); }
  Vec prox(double eta, std::span<const double> v) const;
};

/// ||(1/eta) [x - prox_{eta h}(x - eta grad f(x))]||^2
double gradient_mapping_norm(const CompositeProblem& problem, std::span<const double> x,
                             double eta);

/// Coordinatewise soft threshold by `threshold`.
void soft_threshold(std::span<const double> v, double threshold, std::span<double> out);

/// f_i(x) = log(1 + exp(-y_i <a_i, x>)) + (lambda2/2)||x||^2, h = lambda1 ||x||_1.
class LogisticProblem final : public CompositeProblem {
 public:
  /// smoothness 0 means the estimate max_i ||a_i||^2 / 4 + lambda2.
  LogisticProblem(Dataset data, double lambda1, double lambda2, double smoothness = 0.0);

  std::size_t num_samples() const override { return data_.num_samples(); }
  std::size_t dim() const override { return data_.dim; }
  double loss_sample(std::size_t i, std::span<const double> x) const override;
  void add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                       std::span<double> out) const override;
  double h_value(std::span<const double> x) const override;
  void prox(double eta, std::span<const double> v, std::span<double> out) const override;
  double smoothness() const override { return smoothness_; }
  using CompositeProblem::prox;

  const Dataset& data() const { return data_; }
  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  /// Fraction of samples with sign(<a_i, x>) == y_i.
  double accuracy(std::span<const double> x) const;

 private:
  double margin(std::size_t i, std::span<const double> x) const;

  Dataset data_;
  double lambda1_;
  double lambda2_;
  double smoothness_;
};

/// f_i(x) = (c/2)||x - z_i||^2, h = lambda1 ||x||_1. Closed-form minimizer,
/// used for analytic checks.
class QuadraticProblem final : public CompositeProblem {
 public:
  QuadraticProblem(std::vector<Vec> centers, double curvature, double lambda1 = 0.0);

  std::size_t num_samples() const override { return centers_.size(); }
  std::size_t dim() const override { return dim_; }
  double loss_sample(std::size_t i, std::span<const double> x) const override;
  void add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                       std::span<double> out) const override;
  double h_value(std::span<const double> x) const override;
  void prox(double eta, std::span<const double> v, std::span<double> out) const override;
  double smoothness() const override { return curvature_; }
  using CompositeProblem::prox;

  Vec minimizer() const;

 private:
  std::vector<Vec> centers_;
  std::size_t dim_;
  double curvature_;
  double lambda1_;
};

/// Restricts another problem to the box ||x||_inf <= radius by composing
/// its prox with a clip. Exact for separable h (L1 or zero).
class BoxedProblem final : public CompositeProblem {
 public:
  BoxedProblem(std::shared_ptr<const CompositeProblem> inner, double radius);

  std::size_t num_samples() const override { return inner_->num_samples(); }
  std::size_t dim() const override { return inner_->dim(); }
  double loss_sample(std::size_t i, std::span<const double> x) const override {
    return inner_->loss_sample(i, x);
  }
  void add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                       std::span<double> out) const override {
    inner_->add_grad_sample(i, x, scale, out);
  }
  double h_value(std::span<const double> x) const override;
  void prox(double eta, std::span<const double> v, std::span<double> out) const override;
  double smoothness() const override { return inner_->smoothness(); }
  using CompositeProblem::prox;

  double radius() const { return radius_; }

 private:
  std::shared_ptr<const CompositeProblem> inner_;
  double radius_;
};

struct MlpShape {
  std::size_t inputs = 0;
  std::size_t hidden = 100;
  std::size_t classes = 10;

  std::size_t num_params() const { return hidden * inputs + hidden + classes * hidden + classes; }
};

/// One-hidden-layer ReLU network with softmax cross-entropy and an L2
/// penalty on every parameter, folded into f (h = 0). Parameters are one
/// flat vector: W1 (hidden x inputs, row-major), b1, W2 (classes x hidden), b2.
class MlpProblem final : public CompositeProblem {
 public:
  MlpProblem(Dataset data, std::size_t hidden, double lambda2, double smoothness_estimate = 1.0);

  std::size_t num_samples() const override { return data_.num_samples(); }
  std::size_t dim() const override { return shape_.num_params(); }
  double loss_sample(std::size_t i, std::span<const double> x) const override;
  void add_grad_sample(std::size_t i, std::span<const double> x, double scale,
                       std::span<double> out) const override;
  double h_value(std::span<const double>) const override { return 0.0; }
  void prox(double eta, std::span<const double> v, std::span<double> out) const override;
  double smoothness() const override { return smoothness_; }
  using CompositeProblem::prox;

  const MlpShape& shape() const { return shape_; }
  /// He-style Gaussian weights, zero biases.
  Vec initial_point(std::uint64_t seed) const;
  double accuracy(std::span<const double> x) const;

 private:
  struct Forward {
    Vec pre;     // hidden pre-activations
    Vec logits;  // softmax probabilities after forward()
  };
  void forward(std::size_t i, std::span<const double> x, Forward& fw) const;

  Dataset data_;
  MlpShape shape_;
  double lambda2_;
  double smoothness_;
};

std::shared_ptr<const LogisticProblem> logistic_problem(Dataset data, double lambda1,
                                                        double lambda2, double smoothness = 0.0);
std::shared_ptr<const MlpProblem> mlp_problem(Dataset data, std::size_t hidden, double lambda2);

}  // namespace dqsim::problems
