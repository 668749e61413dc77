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
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "dqsim/simnet.hpp"

namespace dqsim::simnet {
namespace {

template <typename T>
class Channel {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  T pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !items_.empty(); });
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
};

struct ToMaster {
  enum Type { kPull, kResult } type;
  int worker;
  std::uint64_t seq;
  codec::WireMessage grad;
};

struct ToWorker {
  bool stop = false;
  std::uint64_t version = 0;
  std::uint64_t seq = 0;
  codec::WireMessage model;
};

struct Pending {
  int worker;
  std::uint64_t version;
  std::uint64_t seq;
  std::uint64_t order;  // arrival order, valid once arrived
  bool arrived;
  codec::WireMessage grad;
};

}  // namespace

LoopResult run_inner_loop_threaded(std::size_t workers, std::uint64_t tau, std::uint64_t m,
                                   const LoopCallbacks& cb) {
  if (workers == 0) throw std::invalid_argument("run_inner_loop_threaded: need a worker");
  if (m < 1) throw std::invalid_argument("run_inner_loop_threaded: m must be >= 1");

  Channel<ToMaster> inbox;
  std::vector<Channel<ToWorker>> outboxes(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      const int id = static_cast<int>(w);
      for (;;) {
        inbox.push({ToMaster::kPull, id, 0, {}});
        ToWorker job = outboxes[w].pop();
        if (job.stop) return;
        codec::WireMessage grad = cb.work(id, job.model);
        inbox.push({ToMaster::kResult, id, job.seq, std::move(grad)});
      }
    });
  }

  const std::uint64_t cap = tau + 1;
  LoopResult result;
  std::vector<Pending> outstanding;
  std::deque<int> pulls;
  std::uint64_t t = 0, seq = 0, order = 0;
  std::size_t stopped = 0;

  auto stop_worker = [&](int id) {
    ToWorker msg;
    msg.stop = true;
    outboxes[static_cast<std::size_t>(id)].push(std::move(msg));
    ++stopped;
  };

  auto serve = [&] {
    while (t < m) {
      std::vector<std::size_t> idx(outstanding.size());
      for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(outstanding[a].version, outstanding[a].seq) <
               std::tie(outstanding[b].version, outstanding[b].seq);
      });
      bool tight = false;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (outstanding[idx[k]].version + tau <= t + k) {
          tight = true;
          break;
        }
      }
      std::optional<std::size_t> chosen;
      if (tight) {
        if (outstanding[idx.front()].arrived) chosen = idx.front();
      } else {
        for (std::size_t k = 0; k < outstanding.size(); ++k) {
          if (outstanding[k].arrived && (!chosen || outstanding[k].order < outstanding[*chosen].order)) {
            chosen = k;
          }
        }
      }
      if (!chosen) return;
      Pending task = std::move(outstanding[*chosen]);
      outstanding.erase(outstanding.begin() + static_cast<std::ptrdiff_t>(*chosen));
      const StalenessRecord rec{t, task.version, task.worker, result.ticks++};
      cb.apply(rec, task.grad);
      result.records.push_back(rec);
      ++t;
    }
  };

  auto dispatch = [&] {
    while (!pulls.empty() && t < m && outstanding.size() < cap) {
      const int id = pulls.front();
      pulls.pop_front();
      ToWorker job;
      job.version = t;
      job.seq = seq++;
      job.model = cb.broadcast(id, t);
      outstanding.push_back({id, t, job.seq, 0, false, {}});
      outboxes[static_cast<std::size_t>(id)].push(std::move(job));
    }
    if (!pulls.empty() && t < m) ++result.stall_events;
  };

  while (stopped < workers) {
    ToMaster msg = inbox.pop();
    if (msg.type == ToMaster::kResult) {
      auto it = std::find_if(outstanding.begin(), outstanding.end(),
                             [&](const Pending& p) { return p.seq == msg.seq; });
      if (it == outstanding.end()) throw std::logic_error("result for unknown task");
      if (t >= m) {
        if (cb.discard) cb.discard(msg.worker, msg.grad, false);
        ++result.discarded;
        outstanding.erase(it);
        continue;
      }
      it->arrived = true;
      it->order = order++;
      it->grad = std::move(msg.grad);
      if (cb.arrive) cb.arrive(msg.worker, it->grad);
      serve();
    } else {
      pulls.push_back(msg.worker);
    }
    if (t >= m) {
      // Epoch over: drop queued gradients and release idle workers.
      for (auto it = outstanding.begin(); it != outstanding.end();) {
        if (it->arrived) {
          if (cb.discard) cb.discard(it->worker, it->grad, true);
          ++result.discarded;
          it = outstanding.erase(it);
        } else {
          ++it;
        }
      }
      while (!pulls.empty()) {
        stop_worker(pulls.front());
        pulls.pop_front();
      }
    } else {
      dispatch();
    }
  }
  for (auto& th : threads) th.join();
  return result;
}

}  // namespace dqsim::simnet
