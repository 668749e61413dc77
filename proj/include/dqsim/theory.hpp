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
#include <optional>
#include <string>
#include <vector>

namespace dqsim::theory {

/// Quantization variance factor d / (4 (2^(b-1) - 1)^2).
double delta_factor(std::size_t d, int bits);

/// Sparsify-then-quantize variance factor
/// d^2 / (4 phi (2^(b-1) - 1)^2) + d / phi + 1.
double gamma_factor(std::size_t d, double phi, int bits);

/// Largest rho with A rho^2 + rho <= 1.
double rho_max(double a);

/// Coefficient A in the dense step-size condition A rho^2 + rho <= 1.
double dense_coefficient(std::size_t m, double mu, double delta, std::uint64_t tau);
/// Same with the sparse variance factor in place of (Delta + 2).
double sparse_coefficient(std::size_t m, double mu, double gamma, std::uint64_t tau);

/// Delay bound of the accelerated method at momentum weight theta.
double acc_tau_bound(std::size_t d, int bits, double mu, double sigma, double theta);

/// 2 L (P(x0) - P*) / (rho (1 - 2 rho) T).
double rate_bound(double lipschitz, double p0, double pstar, double rho, std::uint64_t iters);

struct Inputs {
  std::size_t d = 0;
  std::size_t m = 1;
  std::uint64_t tau = 0;
  int b = 8;
  double mu = 0.1;
  double phi = 1.0;  // sparsity budget used for the sparse factor
  double rho = 0.0;  // eta * L
  double sigma = 2.0;
  std::size_t epochs = 1;
};

struct AccEpochBound {
  std::size_t s = 0;
  double theta = 0.0;
  double tau_bound = 0.0;
  bool ok = false;
};

struct Report {
  double delta = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double dense_lhs = 0.0;   // 8 rho^2 m^2 (mu+1)(Delta+2) + 2 rho^2 (mu+1)(Delta+2) tau^2 + rho
  bool dense_ok = false;
  double sparse_lhs = 0.0;  // same with Gamma
  bool sparse_ok = false;
  double serial_lhs = 0.0;  // 4 rho^2 m^2 + rho, the undelayed full-precision condition
  bool serial_ok = false;
  bool regime_ok = false;   // rho < 1/2
  double dense_rho_max = 0.0;
  double sparse_rho_max = 0.0;
  std::vector<AccEpochBound> acc;
  std::size_t acc_binding_epoch = 0;  // epoch with the smallest bound
  bool acc_ok = false;
  std::vector<std::string> notes;
};

Report theory_constants(const Inputs& in);

}  // namespace dqsim::theory
