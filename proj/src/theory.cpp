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

#include "dqsim/theory.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dqsim/quantizer.hpp"

namespace dqsim::theory {
namespace {

double levels(int bits) {
  quant::check_bits(bits);
  return std::ldexp(1.0, bits - 1) - 1.0;
}

}  // namespace

double delta_factor(std::size_t d, int bits) {
  const double l = levels(bits);
  return static_cast<double>(d) / (4.0 * l * l);
}

double gamma_factor(std::size_t d, double phi, int bits) {
  if (!(phi > 0.0)) throw std::invalid_argument("gamma_factor: phi must be positive");
  const double l = levels(bits);
  const double dd = static_cast<double>(d);
  return dd * dd / (4.0 * phi * l * l) + dd / phi + 1.0;
}

double rho_max(double a) {
  if (a < 0.0) throw std::invalid_argument("rho_max: negative coefficient");
  if (a == 0.0) return 1.0;
  return (-1.0 + std::sqrt(1.0 + 4.0 * a)) / (2.0 * a);
}

double dense_coefficient(std::size_t m, double mu, double delta, std::uint64_t tau) {
  const double mm = static_cast<double>(m), tt = static_cast<double>(tau);
  return (8.0 * mm * mm + 2.0 * tt * tt) * (mu + 1.0) * (delta + 2.0);
}

double sparse_coefficient(std::size_t m, double mu, double gamma, std::uint64_t tau) {
  const double mm = static_cast<double>(m), tt = static_cast<double>(tau);
  return (8.0 * mm * mm + 2.0 * tt * tt) * (mu + 1.0) * gamma;
}

double acc_tau_bound(std::size_t d, int bits, double mu, double sigma, double theta) {
  if (!(sigma > 1.0)) throw std::invalid_argument("acc_tau_bound: sigma must exceed 1");
  const double l = levels(bits);
  const double delta = static_cast<double>(d) / (l * l) + 2.0;
  const double gamma = 1.0 + 2.0 * theta * mu;
  const double c = 2.0 / (gamma * theta) + theta * delta;
  return (std::sqrt(c * c + 4.0 * (sigma - 1.0) / gamma) - c) / 2.0;
}

double rate_bound(double lipschitz, double p0, double pstar, double rho, std::uint64_t iters) {
  if (!(rho > 0.0 && rho < 0.5)) return std::numeric_limits<double>::infinity();
  if (iters == 0) throw std::invalid_argument("rate_bound: zero iterations");
  return 2.0 * lipschitz * (p0 - pstar) / (rho * (1.0 - 2.0 * rho) * static_cast<double>(iters));
}

Report theory_constants(const Inputs& in) {
  if (in.d == 0 || in.m == 0) throw std::invalid_argument("theory_constants: empty problem");
  Report r;
  r.delta = delta_factor(in.d, in.b);
  r.gamma = gamma_factor(in.d, in.phi, in.b);
  r.rho = in.rho;
  const double rho2 = in.rho * in.rho;
  const double a_dense = dense_coefficient(in.m, in.mu, r.delta, in.tau);
  const double a_sparse = sparse_coefficient(in.m, in.mu, r.gamma, in.tau);
  r.dense_lhs = a_dense * rho2 + in.rho;
  r.dense_ok = r.dense_lhs <= 1.0;
  r.sparse_lhs = a_sparse * rho2 + in.rho;
  r.sparse_ok = r.sparse_lhs <= 1.0;
  const double mm = static_cast<double>(in.m);
  r.serial_lhs = 4.0 * rho2 * mm * mm + in.rho;
  r.serial_ok = r.serial_lhs <= 1.0;
  r.regime_ok = in.rho > 0.0 && in.rho < 0.5;
  if (!r.regime_ok) r.notes.push_back("outside the nonconvex rate regime (rho must be in (0, 1/2))");
  r.dense_rho_max = rho_max(a_dense);
  r.sparse_rho_max = rho_max(a_sparse);

  if (in.sigma > 1.0) {
    r.acc_ok = true;
    double tightest = std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s <= in.epochs; ++s) {
      AccEpochBound e;
      e.s = s;
      e.theta = 2.0 / (static_cast<double>(s) + 2.0);
      e.tau_bound = acc_tau_bound(in.d, in.b, in.mu, in.sigma, e.theta);
      e.ok = static_cast<double>(in.tau) <= e.tau_bound;
      r.acc_ok = r.acc_ok && e.ok;
      if (e.tau_bound < tightest) {
        tightest = e.tau_bound;
        r.acc_binding_epoch = s;
      }
      r.acc.push_back(e);
    }
  } else {
    r.notes.push_back("accelerated delay bound needs sigma > 1");
  }
  return r;
}

}  // namespace dqsim::theory
