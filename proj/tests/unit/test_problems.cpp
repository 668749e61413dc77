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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "dqsim/dataset.hpp"
#include "dqsim/problems.hpp"
#include "dqsim/rng.hpp"

using namespace dqsim;
using namespace dqsim::problems;

namespace {

Vec random_point(rng::Stream& s, std::size_t d, double scale) {
  Vec x(d);
  for (auto& v : x) v = scale * s.normal();
  return x;
}

// Central differences on one sample's loss.
Vec fd_grad(const CompositeProblem& p, std::size_t i, Vec x, double h) {
  Vec g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = p.loss_sample(i, x);
    x[j] = keep - h;
    const double down = p.loss_sample(i, x);
    x[j] = keep;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

double rel_error(const Vec& a, const Vec& b) {
  return std::sqrt(linalg::dist_sq(a, b)) / std::max(1e-12, std::sqrt(linalg::norm2_sq(b)));
}

// Golden-section search on a 1-D convex function over [lo, hi].
template <class F>
double golden_min(F f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  for (int k = 0; k < 200; ++k) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    (f(c) < f(d) ? b : a) = (f(c) < f(d) ? d : c);
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("logistic loss and gradient at zero") {
  const Dataset data = synth_dataset({30, 6, 2, 0.2, 2.0});
  const auto p = logistic_problem(data, 0.0, 0.0);
  const Vec zero(6, 0.0);
  CHECK(p->f_value(zero) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Vec expect(6, 0.0);
  for (std::size_t i = 0; i < data.num_samples(); ++i) {
    const auto row = data.row(i);
    for (std::size_t k = 0; k < row.index.size(); ++k) {
      expect[row.index[k]] -= data.labels[i] * row.value[k] / (2.0 * 30.0);
    }
  }
  const Vec g = p->full_grad(zero);
  for (std::size_t j = 0; j < 6; ++j) CHECK(g[j] == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("logistic per-sample gradient matches finite differences") {
  rng::Stream s(31, rng::Purpose::kTest);
  const auto p = logistic_problem(synth_dataset({40, 12, 4, 0.1, 2.0}), 1e-3, 1e-2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = random_point(s, 12, 2.0);
    const std::size_t i = s.below(40);
    CHECK(rel_error(p->grad_sample(i, x), fd_grad(*p, i, x, 1e-5)) <= 1e-6);
  }
}

TEST_CASE("full gradient is the mean of per-sample gradients") {
  rng::Stream s(32, rng::Purpose::kTest);
  const auto p = logistic_problem(synth_dataset({7, 5, 9, 0.3, 2.0}), 0.0, 0.1);
  const Vec x = random_point(s, 5, 1.0);
  Vec mean(5, 0.0);
  for (std::size_t i = 0; i < 7; ++i) linalg::axpy(1.0 / 7.0, p->grad_sample(i, x), mean);
  const Vec g = p->full_grad(x);
  for (std::size_t j = 0; j < 5; ++j) CHECK(g[j] == doctest::Approx(mean[j]).epsilon(1e-14));
}

TEST_CASE("logistic rejects non-binary labels") {
  Dataset d;
  d.dim = 1;
  const std::uint32_t idx[] = {0};
  const double val[] = {1.0};
  d.push_row(idx, val, 2.0);
  CHECK_THROWS(logistic_problem(d, 0.0, 0.0));
  CHECK_THROWS(logistic_problem(synth_dataset({5, 2, 1, 0.0, 2.0}), -1.0, 0.0));
}

TEST_CASE("soft threshold") {
  Vec out(4);
  soft_threshold(Vec{3.0, -3.0, 0.5, -1.0}, 1.0, out);
  CHECK(out == Vec{2.0, -2.0, 0.0, 0.0});
  const auto p = logistic_problem(synth_dataset({5, 1, 1, 0.0, 2.0}), 2.0, 0.0);
  CHECK(p->prox(0.5, Vec{3.0}) == Vec{2.0});
}

TEST_CASE("prox agrees with a numeric minimizer") {
  rng::Stream s(33, rng::Purpose::kTest);
  auto inner = logistic_problem(synth_dataset({5, 3, 1, 0.0, 2.0}), 0.7, 0.0);
  const BoxedProblem boxed(inner, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec v = random_point(s, 3, 3.0);
    const double eta = 0.1 + 2.0 * s.uniform();
    const Vec got = inner->prox(eta, v);
    const Vec got_box = boxed.prox(eta, v);
    // the objective is separable, so each coordinate is minimized on its own
    for (std::size_t j = 0; j < 3; ++j) {
      auto f = [&](double y) { return 0.7 * std::abs(y) + (y - v[j]) * (y - v[j]) / (2.0 * eta); };
      CHECK(got[j] == doctest::Approx(golden_min(f, -20.0, 20.0)).epsilon(1e-6).scale(1.0));
      CHECK(got_box[j] == doctest::Approx(golden_min(f, -1.5, 1.5)).epsilon(1e-6).scale(1.0));
    }
  }
  CHECK(boxed.h_value(Vec{2.0, 0.0, 0.0}) == std::numeric_limits<double>::infinity());
  CHECK(boxed.h_value(Vec{1.0, 0.0, -1.0}) == doctest::Approx(1.4));
}

TEST_CASE("per-sample gradients respect the smoothness estimate") {
  rng::Stream s(34, rng::Purpose::kTest);
  const auto p = logistic_problem(synth_dataset({60, 8, 6, 0.1, 2.0}), 0.0, 1e-2);
  for (int trial = 0; trial < 2000; ++trial) {
    const Vec x = random_point(s, 8, 3.0), y = random_point(s, 8, 3.0);
    const std::size_t i = s.below(60);
    const double lhs = std::sqrt(linalg::dist_sq(p->grad_sample(i, x), p->grad_sample(i, y)));
    REQUIRE(lhs <= p->smoothness() * std::sqrt(linalg::dist_sq(x, y)) * (1.0 + 1e-12));
  }
  CHECK(logistic_problem(synth_dataset({5, 2, 1, 0.0, 2.0}), 0.0, 0.0, 7.5)->smoothness() == 7.5);
}

TEST_CASE("gradient mapping examples") {
  const QuadraticProblem q({Vec{0.0}}, 1.0);
  for (double eta : {0.01, 0.5, 1.0, 3.0}) CHECK(gradient_mapping_norm(q, Vec{2.0}, eta) == doctest::Approx(4.0));
  CHECK_THROWS(gradient_mapping_norm(q, Vec{2.0}, 0.0));

  // h = 0 gives ||grad f||^2
  rng::Stream s(35, rng::Purpose::kTest);
  const auto p = logistic_problem(synth_dataset({20, 4, 3, 0.1, 2.0}), 0.0, 0.1);
  const Vec x = random_point(s, 4, 1.0);
  CHECK(gradient_mapping_norm(*p, x, 0.3) == doctest::Approx(linalg::norm2_sq(p->full_grad(x))).epsilon(1e-12));

  // P(x) = (x-3)^2/2 + |x| has minimizer 2
  const QuadraticProblem l1({Vec{3.0}}, 1.0, 1.0);
  CHECK(l1.minimizer() == Vec{2.0});
  CHECK(gradient_mapping_norm(l1, Vec{2.0}, 0.5) <= 1e-10);
  CHECK(gradient_mapping_norm(l1, Vec{2.5}, 0.5) > 0.1);
}

TEST_CASE("mlp backprop matches finite differences") {
  rng::Stream s(36, rng::Purpose::kTest);
  const auto p = mlp_problem(synth_multiclass(10, 5, 3, 4), 6, 1e-3);
  CHECK(p->dim() == 6 * 5 + 6 + 3 * 6 + 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = random_point(s, p->dim(), 0.7);
    const std::size_t i = s.below(10);
    CHECK(rel_error(p->grad_sample(i, x), fd_grad(*p, i, x, 1e-6)) <= 1e-4);
  }
}

TEST_CASE("mlp loss at zero weights is log of the class count") {
  const auto p = mlp_problem(synth_multiclass(40, 5, 4, 5), 7, 0.0);
  CHECK(p->f_value(Vec(p->dim(), 0.0)) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(p->h_value(Vec(p->dim(), 1.0)) == 0.0);
  const Vec v{1.0, -2.0};
  Vec out(2);
  p->prox(0.3, v, out);
  CHECK(out == v);
  CHECK_THROWS(p->loss_sample(0, Vec(3, 0.0)));
}

TEST_CASE("one small mlp gradient step lowers the loss") {
  const auto p = mlp_problem(synth_multiclass(30, 6, 3, 6), 8, 1e-4);
  const Vec x = p->initial_point(3);
  const double before = p->f_value(x);
  Vec y = x;
  linalg::axpy(-1e-3, p->full_grad(x), y);
  CHECK(p->f_value(y) < before);
}

TEST_CASE("mlp rejects bad labels") {
  Dataset d;
  d.dim = 1;
  const std::uint32_t idx[] = {0};
  const double val[] = {1.0};
  d.push_row(idx, val, -1.0);
  CHECK_THROWS(mlp_problem(d, 4, 0.0));
  d.labels[0] = 0.5;
  CHECK_THROWS(mlp_problem(d, 4, 0.0));
}
