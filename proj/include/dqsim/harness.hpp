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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dqsim/config.hpp"
#include "dqsim/optim.hpp"
#include "dqsim/theory.hpp"

namespace dqsim::harness {

using config::ExperimentConfig;
using config::json;

/// Parallel run cap: DQSIM_THREADS if set and positive, else the core count.
std::size_t parallel_limit();
/// Calls fn(0..count-1) on at most parallel_limit() threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

struct OracleResult {
  Vec x;
  double loss = 0.0;
  double grad_mapping_sq = 0.0;
  std::size_t iterations = 0;
};

/// Accelerated proximal gradient with backtracking and function-value restart.
OracleResult reference_optimum(const problems::CompositeProblem& problem,
                               std::span<const double> x0, std::size_t iters);

double target_loss(const config::TargetSpec& spec, double pstar, double p0);

struct Crossing {
  bool reached = false;
  std::uint64_t bits = 0;  // cumulative bits at the crossing, or total bits if never reached
  std::uint64_t epoch = 0;
  std::uint64_t t = 0;
};

/// First evaluated metrics row whose loss is below the threshold.
Crossing bits_to_target(std::span<const optim::MetricsRow> rows, double threshold,
                        std::uint64_t total_bits);
/// First epoch whose snapshot loss is below the threshold.
std::optional<std::uint64_t> epochs_to_target(std::span<const optim::EpochRow> rows,
                                              double threshold);

struct RunOptions {
  std::optional<double> pstar;  // skips the oracle run when set
  std::filesystem::path out_dir;  // no files when empty
  bool keep_iterates = false;
};

struct RunReport {
  ExperimentConfig config;
  double pstar = 0.0;
  double target = 0.0;
  Crossing bits;
  std::optional<std::uint64_t> epochs;
  theory::Report theory;
  double final_loss = 0.0;   // last snapshot
  double output_loss = 0.0;  // selected output
  std::vector<std::string> files;
  optim::TrainResult train;

  json to_json() const;
};

RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// P* for the unboxed problem of `spec` from the oracle, starting at x0.
double oracle_loss(const ExperimentConfig& cfg);

struct GridPoint {
  double lr = 0.0;
  double final_loss = 0.0;
  bool diverged = false;
};

struct GridResult {
  double best_lr = 0.0;
  std::vector<GridPoint> points;
};

/// Final snapshot loss per lr; smallest wins, ties to the smaller lr.
GridResult lr_grid_search(const ExperimentConfig& cfg, std::span<const double> grid);

struct EpochMu {
  std::uint64_t epoch = 0;
  double max_mu = 0.0;
  std::uint64_t argmax_version = 0;
  bool early = false;  // argmax within the first 20% of inner iterations
};

struct MuTrace {
  std::vector<int> replay_bits;
  int primary_bits = 0;  // width behind ceiling and epochs; 0 means the width used
  std::vector<optim::BroadcastInfo> rows;  // quantized broadcasts only
  double ceiling = 0.0;
  std::vector<double> replay_ceiling;
  std::vector<EpochMu> epochs;
  double early_fraction = 0.0;
  bool finite = true;
};

/// Per-broadcast mu summary. With primary_bits set (one of the replay
/// widths) the ceiling and per-epoch maxima use that replay column, which
/// pins the grid while the trajectory stays the one actually run.
MuTrace summarize_mu(const optim::TrainResult& result, std::span<const int> replay_bits,
                     int primary_bits = 0);
MuTrace figure_mu_trace(const ExperimentConfig& cfg, int primary_bits = 0);
/// Columns: epoch,t,worker,b_x_used,mu_required, then mu_bx<k> per replay width.
void write_mu_trace_csv(const MuTrace& trace, std::ostream& os);

struct CompareRow {
  std::string algo;
  Crossing bits;
  std::optional<std::uint64_t> epochs;
  double ratio = 0.0;  // AsyFPG bits / these bits; NaN when undefined
  double final_loss = 0.0;
  std::uint64_t total_bits = 0;
};

struct CompareResult {
  double pstar = 0.0;
  double target = 0.0;
  std::vector<CompareRow> rows;
  std::vector<RunReport> runs;
};

CompareResult compare_suite(std::span<const ExperimentConfig> configs);
void write_compare_table(const CompareResult& result, std::ostream& os);

}  // namespace dqsim::harness
