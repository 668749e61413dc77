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
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "dqsim/codec.hpp"
#include "dqsim/linalg.hpp"
#include "dqsim/problems.hpp"
#include "dqsim/rng.hpp"

namespace dqsim::simnet {

enum class LatencyKind { kFixed, kUniform, kGeometric };

/// Compute-plus-transfer time of one worker task, in master ticks (>= 1).
struct LatencyModel {
  LatencyKind kind = LatencyKind::kFixed;
  std::uint64_t ticks = 1;  // fixed
  std::uint64_t lo = 1;     // uniform, inclusive
  std::uint64_t hi = 1;
  double p = 1.0;           // geometric success probability, support {1, 2, ...}

  static LatencyModel fixed(std::uint64_t k) { return {LatencyKind::kFixed, k, 1, 1, 1.0}; }
  static LatencyModel uniform(std::uint64_t lo, std::uint64_t hi) {
    return {LatencyKind::kUniform, 1, lo, hi, 1.0};
  }
  static LatencyModel geometric(double p) { return {LatencyKind::kGeometric, 1, 1, 1, p}; }

  void validate() const;
  std::uint64_t sample(rng::Stream& rng) const;
};

struct WorkerSpec {
  int id = 0;
  LatencyModel latency;
  rng::Stream stream;  // latency draws
};

/// Workers 0..count-1 sharing one latency model, each with its own stream.
std::vector<WorkerSpec> make_workers(std::size_t count, const LatencyModel& latency,
                                     std::uint64_t seed);

/// Update t of an epoch used a gradient computed on model version D(t).
struct StalenessRecord {
  std::uint64_t t = 0;
  std::uint64_t version = 0;
  int worker = 0;
  std::uint64_t tick = 0;

  std::uint64_t staleness() const { return t - version; }
};

struct LoopCallbacks {
  /// Master -> worker: model at `version` (always the current one here).
  std::function<codec::WireMessage(int worker, std::uint64_t version)> broadcast;
  /// Worker step on the received model. Must touch only worker-owned state.
  std::function<codec::WireMessage(int worker, const codec::WireMessage& model)> work;
  /// The gradient reached the master's queue.
  std::function<void(int worker, const codec::WireMessage& grad)> arrive;
  /// Master update t with this gradient.
  std::function<void(const StalenessRecord& rec, const codec::WireMessage& grad)> apply;
  /// Dropped when the loop ends; `arrived` tells whether arrive() saw it.
  std::function<void(int worker, const codec::WireMessage& grad, bool arrived)> discard;
};

struct LoopResult {
  std::vector<StalenessRecord> records;
  std::uint64_t ticks = 0;         // simulated time consumed
  std::uint64_t idle_ticks = 0;    // ticks without a master update
  std::uint64_t stall_events = 0;  // pulls delayed by the staleness cap
  std::size_t discarded = 0;

  std::uint64_t max_staleness() const;
};

/// Deterministic event loop running exactly m master updates.
///
/// Time advances in ticks. A worker pulls the current model, computes, and
/// its gradient arrives `latency` ticks later; on arrival it pushes and
/// immediately pulls again, seeing the model after that tick's update. The
/// master applies at most one gradient per tick, earliest arrival first
/// (ties by worker id). Staleness is bounded by tau through two rules:
/// at most tau+1 tasks are outstanding (further pulls stall), and when the
/// outstanding deadlines version+tau leave no slack the master serves the
/// earliest deadline, idling until it arrives. Together these give
/// t - D(t) <= tau for every update.
LoopResult run_inner_loop(std::span<WorkerSpec> workers, std::uint64_t tau, std::uint64_t m,
                          const LoopCallbacks& callbacks);

/// Same contract on real threads with channel message passing: one thread
/// per worker, the caller's thread is the master. Latency models are not
/// used (timing is physical) and results are not reproducible; the
/// staleness bound and the update count still hold.
LoopResult run_inner_loop_threaded(std::size_t workers, std::uint64_t tau, std::uint64_t m,
                                   const LoopCallbacks& callbacks);

/// Contiguous sample ranges, one per worker; earlier workers get the extra rows.
std::vector<std::pair<std::size_t, std::size_t>> partition(std::size_t n, std::size_t workers);

/// Full-batch gradient at the snapshot as a chained reduction over the
/// workers' partitions. The summation order equals CompositeProblem::full_grad,
/// so the result is bit-identical to it. Records one full-precision
/// snapshot download and one partial-sum upload per worker.
Vec epoch_barrier(std::size_t workers, const problems::CompositeProblem& problem,
                  std::span<const double> snapshot, codec::BitLedger* ledger, std::uint64_t step);

struct TraceRow {
  StalenessRecord record;
  std::uint64_t epoch = 0;
  codec::MessageKind kind = codec::MessageKind::kQuantizedDense;
  std::uint64_t bits = 0;
};

/// Columns: t,D(t),worker_id,epoch,message_kind,bits
void write_trace_csv(std::span<const TraceRow> rows, std::ostream& os);

}  // namespace dqsim::simnet
