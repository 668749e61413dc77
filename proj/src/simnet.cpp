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

#include "dqsim/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace dqsim::simnet {

void LatencyModel::validate() const {
  switch (kind) {
    case LatencyKind::kFixed:
      if (ticks < 1) throw std::invalid_argument("fixed latency must be >= 1 tick");
      return;
    case LatencyKind::kUniform:
      if (lo < 1 || hi < lo) throw std::invalid_argument("uniform latency needs 1 <= lo <= hi");
      return;
    case LatencyKind::kGeometric:
      if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("geometric latency needs 0 < p <= 1");
      return;
  }
  throw std::invalid_argument("unknown latency model");
}

std::uint64_t LatencyModel::sample(rng::Stream& rng) const {
  switch (kind) {
    case LatencyKind::kFixed: return ticks;
    case LatencyKind::kUniform: return lo + rng.below(hi - lo + 1);
    case LatencyKind::kGeometric: {
      if (p >= 1.0) return 1;
      // Inverse CDF of the number of trials until the first success.
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
    }
  }
  return 1;
}

std::vector<WorkerSpec> make_workers(std::size_t count, const LatencyModel& latency,
                                     std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("need at least one worker");
  latency.validate();
  std::vector<WorkerSpec> out;
  for (std::size_t w = 0; w < count; ++w) {
    out.push_back({static_cast<int>(w), latency, rng::Stream(seed, rng::Purpose::kWorkerLatency, w)});
  }
  return out;
}

std::uint64_t LoopResult::max_staleness() const {
  std::uint64_t m = 0;
  for (const auto& r : records) m = std::max(m, r.staleness());
  return m;
}

namespace {

struct Task {
  int worker;
  std::uint64_t version;
  std::uint64_t seq;
  std::uint64_t arrival;
  bool arrived;
  codec::WireMessage grad;
};

auto arrival_key(const Task& t) { return std::make_tuple(t.arrival, t.worker, t.seq); }

}  // namespace

LoopResult run_inner_loop(std::span<WorkerSpec> workers, std::uint64_t tau, std::uint64_t m,
                          const LoopCallbacks& cb) {
  if (workers.empty()) throw std::invalid_argument("run_inner_loop: need at least one worker");
  if (m < 1) throw std::invalid_argument("run_inner_loop: m must be >= 1");
  for (const auto& w : workers) w.latency.validate();

  const std::uint64_t cap = tau + 1;
  LoopResult result;
  std::vector<Task> outstanding;
  std::deque<std::size_t> pulls;  // indices into `workers`
  std::vector<bool> stalled(workers.size(), false);
  std::uint64_t now = 0, t = 0, seq = 0;

  auto dispatch = [&] {
    while (!pulls.empty() && outstanding.size() < cap) {
      const std::size_t w = pulls.front();
      pulls.pop_front();
      stalled[w] = false;
      const int id = workers[w].id;
      codec::WireMessage model = cb.broadcast(id, t);
      codec::WireMessage grad = cb.work(id, model);
      const std::uint64_t lat = workers[w].latency.sample(workers[w].stream);
      outstanding.push_back({id, t, seq++, now + lat, false, std::move(grad)});
    }
    for (std::size_t w : pulls) {
      if (!stalled[w]) {
        stalled[w] = true;
        ++result.stall_events;
      }
    }
  };

  auto index_of = [&](int id) {
    for (std::size_t w = 0; w < workers.size(); ++w) {
      if (workers[w].id == id) return w;
    }
    throw std::logic_error("unknown worker id");
  };

  for (std::size_t w = 0; w < workers.size(); ++w) pulls.push_back(w);
  dispatch();

  while (t < m) {
    // Arrivals at this tick, in (worker, seq) order.
    std::vector<Task*> landed;
    for (auto& task : outstanding) {
      if (!task.arrived && task.arrival == now) landed.push_back(&task);
    }
    std::sort(landed.begin(), landed.end(),
              [](const Task* a, const Task* b) { return arrival_key(*a) < arrival_key(*b); });
    std::vector<std::size_t> arrived_workers;
    for (Task* task : landed) {
      task->arrived = true;
      if (cb.arrive) cb.arrive(task->worker, task->grad);
      arrived_workers.push_back(index_of(task->worker));
    }

    // Pick the gradient for update t.
    std::vector<std::size_t> by_deadline(outstanding.size());
    for (std::size_t k = 0; k < by_deadline.size(); ++k) by_deadline[k] = k;
    std::sort(by_deadline.begin(), by_deadline.end(), [&](std::size_t a, std::size_t b) {
      const Task &x = outstanding[a], &y = outstanding[b];
      return std::make_tuple(x.version, x.arrival, x.worker, x.seq) <
             std::make_tuple(y.version, y.arrival, y.worker, y.seq);
    });
    bool tight = false;
    for (std::size_t k = 0; k < by_deadline.size(); ++k) {
      if (outstanding[by_deadline[k]].version + tau <= t + k) {
        tight = true;
        break;
      }
    }
    std::size_t chosen = outstanding.size();
    if (tight) {
      if (outstanding[by_deadline.front()].arrived) chosen = by_deadline.front();
    } else {
      for (std::size_t k = 0; k < outstanding.size(); ++k) {
        if (!outstanding[k].arrived) continue;
        if (chosen == outstanding.size() ||
            arrival_key(outstanding[k]) < arrival_key(outstanding[chosen])) {
          chosen = k;
        }
      }
    }

    if (chosen < outstanding.size()) {
      Task task = std::move(outstanding[chosen]);
      outstanding.erase(outstanding.begin() + static_cast<std::ptrdiff_t>(chosen));
      const StalenessRecord rec{t, task.version, task.worker, now};
      cb.apply(rec, task.grad);
      result.records.push_back(rec);
      ++t;
    } else {
      ++result.idle_ticks;
    }

    if (t < m) {
      for (std::size_t w : arrived_workers) pulls.push_back(w);
      dispatch();
    }
    if (t >= m) break;

    // Jump straight to the next arrival when nothing is queued.
    const bool queued = std::any_of(outstanding.begin(), outstanding.end(),
                                    [](const Task& x) { return x.arrived; });
    std::uint64_t next = now + 1;
    if (!queued) {
      std::uint64_t earliest = std::numeric_limits<std::uint64_t>::max();
      for (const auto& task : outstanding) earliest = std::min(earliest, task.arrival);
      if (earliest == std::numeric_limits<std::uint64_t>::max()) {
        throw std::logic_error("run_inner_loop: no outstanding work");
      }
      if (earliest > next) result.idle_ticks += earliest - next;
      next = std::max(next, earliest);
    }
    now = next;
  }

  result.ticks = now + 1;
  std::sort(outstanding.begin(), outstanding.end(),
            [](const Task& a, const Task& b) { return std::tie(a.worker, a.seq) < std::tie(b.worker, b.seq); });
  for (const auto& task : outstanding) {
    if (cb.discard) cb.discard(task.worker, task.grad, task.arrived);
  }
  result.discarded = outstanding.size();
  return result;
}

std::vector<std::pair<std::size_t, std::size_t>> partition(std::size_t n, std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("partition: need at least one worker");
  std::vector<std::pair<std::size_t, std::size_t>> parts;
  const std::size_t base = n / workers, extra = n % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t len = base + (w < extra ? 1 : 0);
    parts.emplace_back(begin, begin + len);
    begin += len;
  }
  return parts;
}

Vec epoch_barrier(std::size_t workers, const problems::CompositeProblem& problem,
                  std::span<const double> snapshot, codec::BitLedger* ledger, std::uint64_t step) {
  const std::size_t d = problem.dim();
  linalg::require_same_size(snapshot.size(), d, "epoch_barrier");
  Vec acc(d, 0.0);
  for (const auto& [begin, end] : partition(problem.num_samples(), workers)) {
    if (ledger) ledger->record_barrier(d, codec::Direction::kDown, step);
    problem.accumulate_grad(begin, end, snapshot, acc);
    if (ledger) ledger->record_barrier(d, codec::Direction::kUp, step);
  }
  const double inv_n = 1.0 / static_cast<double>(problem.num_samples());
  for (auto& v : acc) v *= inv_n;
  return acc;
}

void write_trace_csv(std::span<const TraceRow> rows, std::ostream& os) {
  os << "t,D(t),worker_id,epoch,message_kind,bits\n";
  for (const auto& row : rows) {
    os << row.record.t << ',' << row.record.version << ',' << row.record.worker << ','
       << row.epoch << ',' << codec::kind_name(row.kind) << ',' << row.bits << '\n';
  }
}

}  // namespace dqsim::simnet
