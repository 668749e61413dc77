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

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqsim/codec.hpp"
#include "dqsim/linalg.hpp"
#include "dqsim/problems.hpp"
#include "dqsim/quantizer.hpp"
#include "dqsim/rng.hpp"
#include "dqsim/simnet.hpp"

namespace dqsim::optim {

enum class Algorithm { kAsyLPG, kSparseAsyLPG, kAccAsyLPG, kAsyFPG, kAccAsyFPG, kQSVRG };

std::string_view algorithm_name(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

enum class GradPath { kDense, kSparse, kFull };

bool is_accelerated(Algorithm algo);
/// Whether the model travels quantized (with the snapshot flag shortcut).
bool quantizes_model(Algorithm algo);
GradPath grad_path(Algorithm algo);

enum class StepMode { kExperiment, kTheory };
std::string_view step_mode_name(StepMode mode);
StepMode parse_step_mode(std::string_view name);

/// How the model width b_x is picked at each broadcast.
///   fixed:    always b_x; constraint violations are logged.
///   escalate: start at b_x and widen until the constraint holds (up to 32).
///   search:   smallest width from 2 that satisfies the constraint.
enum class BxPolicy { kFixed, kEscalate, kSearch };
std::string_view bx_policy_name(BxPolicy policy);
BxPolicy parse_bx_policy(std::string_view name);

struct AlgoConfig {
  Algorithm algo = Algorithm::kAsyLPG;
  std::size_t epochs = 10;
  std::size_t m = 0;  // inner iterations; 0 means ceil(n / batch)
  StepMode step_mode = StepMode::kExperiment;
  double lr = 0.1;
  double rho = 0.0;    // theory mode: eta = rho / L; 0 picks the largest admissible rho
  double sigma = 2.0;  // accelerated theory mode: eta_s = 1 / (sigma L theta_s)
  int bx = 8;
  int b = 8;
  double mu = 0.1;
  BxPolicy bx_policy = BxPolicy::kFixed;
  double phi = 0.0;  // sparsity budget; 0 means budget_max(alpha)
  std::uint64_t tau = 0;
  std::size_t batch = 1;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  simnet::LatencyModel latency;
  bool threaded = false;
  std::size_t eval_every = 0;  // 0 means max(1, m / 20)
  std::vector<int> mu_replay_bits;

  void validate() const;
  std::size_t inner_iterations(std::size_t n) const {
    return m != 0 ? m : std::max<std::size_t>(1, (n + batch - 1) / batch);
  }
};

/// Iterates x_{t-depth+1..t} of the current epoch, addressed by version.
class VersionBuffer {
 public:
  explicit VersionBuffer(std::size_t depth = 1);

  void reset(Vec x0);
  void push(Vec x);
  const Vec& at(std::uint64_t version) const;
  std::uint64_t latest() const { return latest_; }
  std::size_t depth() const { return slots_.size(); }

 private:
  std::vector<Vec> slots_;
  std::uint64_t latest_ = 0;
};

struct TrainState {
  std::size_t s = 0;  // epochs completed before the current one
  std::uint64_t t = 0;
  Vec x;
  Vec snapshot;
  Vec snapshot_grad;
  Vec y;        // accelerated only
  Vec avg_sum;  // accelerated only: running sum of x_{t+1}
  double eta = 0.0;
  double theta = 1.0;
  VersionBuffer versions;
};

/// theta_s = 2 / (s + 2), with s counted from 1.
double acc_theta(std::size_t s);

/// Step size for epoch s (from 1) given the base eta (lr or rho / L).
double epoch_eta(const AlgoConfig& cfg, double base_eta, double lipschitz, std::size_t s);

struct BroadcastInfo {
  std::uint64_t epoch = 0;
  std::uint64_t version = 0;
  int worker = 0;
  bool flag = false;
  int bx_used = 0;  // 0 for flag and full-precision messages
  double mu_required = std::numeric_limits<double>::quiet_NaN();
  double expected_error = 0.0;
  double budget = 0.0;  // scale * mu * ||x - snapshot||^2
  bool ok = true;
  std::uint64_t bits = 0;
  std::vector<double> replay_mu;  // mu_required at AlgoConfig::mu_replay_bits
};

struct ModelMessage {
  codec::WireMessage msg;
  BroadcastInfo info;
};

/// Quantized model download. Sends the one-bit flag when x equals the
/// snapshot; otherwise quantizes x on the inf-norm grid and checks
/// E||Q(x) - x||^2 <= scale * mu * ||x - snapshot||^2. mu_required is
/// reported relative to `scale`.
ModelMessage model_broadcast(std::span<const double> x, std::span<const double> snapshot,
                             const AlgoConfig& cfg, double scale, rng::Stream& rng);

/// Same with the constraint scaled by theta_s.
ModelMessage acc_model_broadcast(const TrainState& state, std::uint64_t version,
                                 const AlgoConfig& cfg, rng::Stream& rng);

/// Full-precision model download.
ModelMessage full_broadcast(std::span<const double> x);

std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch, rng::Stream& rng);

/// Mean over the batch of grad f_a(x) - grad f_a(snapshot).
Vec semi_stochastic_difference(const problems::CompositeProblem& problem,
                               std::span<const double> x, std::span<const double> snapshot,
                               std::span<const std::size_t> batch);

/// Worker steps: decode the model (flag -> snapshot), form alpha, encode it.
codec::WireMessage asylpg_worker_step(const codec::WireMessage& model,
                                      const problems::CompositeProblem& problem,
                                      std::span<const double> snapshot,
                                      std::span<const std::size_t> batch, int bits,
                                      rng::Stream& rng);
codec::WireMessage sparse_worker_step(const codec::WireMessage& model,
                                      const problems::CompositeProblem& problem,
                                      std::span<const double> snapshot,
                                      std::span<const std::size_t> batch, double phi, int bits,
                                      rng::Stream& rng);
codec::WireMessage full_worker_step(const codec::WireMessage& model,
                                    const problems::CompositeProblem& problem,
                                    std::span<const double> snapshot,
                                    std::span<const std::size_t> batch);

/// x <- prox(eta, x - eta (decoded + snapshot_grad)).
void asylpg_master_step(TrainState& state, const problems::CompositeProblem& problem,
                        const codec::WireMessage& grad);
/// y <- prox(eta_s, y - eta_s u); x <- snapshot + theta_s (y - snapshot).
void acc_master_step(TrainState& state, const problems::CompositeProblem& problem,
                     const codec::WireMessage& grad);

/// Uniform index in [0, count).
std::size_t select_index(std::size_t count, rng::Stream& rng);
Vec select_output(std::span<const Vec> trace, rng::Stream& rng);

/// Uniform choice over a stream of iterates without storing them.
class Reservoir {
 public:
  explicit Reservoir(rng::Stream rng) : rng_(rng) {}
  void offer(std::span<const double> x);
  const Vec& value() const { return value_; }
  std::uint64_t seen() const { return seen_; }

 private:
  rng::Stream rng_;
  Vec value_;
  std::uint64_t seen_ = 0;
};

struct MetricsRow {
  std::uint64_t epoch = 0;
  std::uint64_t t = 0;
  std::uint64_t version = 0;
  int worker = 0;
  std::uint64_t tick = 0;
  bool evaluated = false;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double grad_mapping_sq = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t cumulative_bits = 0;
  double mu_required = std::numeric_limits<double>::quiet_NaN();
  int bx_used = 0;
  std::size_t nnz_sent = 0;
};

struct EpochRow {
  std::uint64_t epoch = 0;
  double snapshot_loss = 0.0;
  double grad_mapping_sq = 0.0;
  std::uint64_t cumulative_bits = 0;
  std::uint64_t max_staleness = 0;
  std::uint64_t ticks = 0;
};

struct TrainResult {
  Algorithm algo = Algorithm::kAsyLPG;
  std::size_t m = 0;
  double base_eta = 0.0;
  double initial_loss = 0.0;
  Vec x_final;   // last inner iterate
  Vec snapshot;  // last snapshot
  Vec output;    // uniform draw (plain) or last snapshot (accelerated)
  std::vector<MetricsRow> metrics;
  std::vector<EpochRow> epochs;
  std::vector<BroadcastInfo> broadcasts;
  std::vector<simnet::TraceRow> trace;
  std::vector<Vec> iterates;  // every x_t when keep_iterates is set
  codec::BitLedger ledger;
  std::size_t violations = 0;
  double max_coupling_error = 0.0;
  bool diverged = false;
};

struct TrainOptions {
  bool keep_iterates = false;
  /// Loss below which training may stop early at an evaluation (0 disables).
  double stop_below = 0.0;
};

/// Base step size: lr in experiment mode, rho / L in theory mode with rho
/// defaulting to the largest value the step-size condition admits.
double base_step(const AlgoConfig& cfg, const problems::CompositeProblem& problem);

TrainResult train(const problems::CompositeProblem& problem, const AlgoConfig& cfg,
                  std::span<const double> x0, const TrainOptions& opts = {});

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& os);
void write_epochs_csv(std::span<const EpochRow> rows, std::ostream& os);

}  // namespace dqsim::optim
