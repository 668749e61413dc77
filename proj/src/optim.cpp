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

#include "dqsim/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dqsim/sparsifier.hpp"
#include "dqsim/theory.hpp"

namespace dqsim::optim {
namespace {

constexpr quant::GridOptions kWireGrid{quant::ScaleNorm::kInf, quant::ScalePrecision::kBinary32};

struct NamedAlgo {
  Algorithm algo;
  std::string_view name;
};

constexpr NamedAlgo kAlgos[] = {
    {Algorithm::kAsyLPG, "AsyLPG"},       {Algorithm::kSparseAsyLPG, "Sparse-AsyLPG"},
    {Algorithm::kAccAsyLPG, "Acc-AsyLPG"}, {Algorithm::kAsyFPG, "AsyFPG"},
    {Algorithm::kAccAsyFPG, "Acc-AsyFPG"}, {Algorithm::kQSVRG, "QSVRG"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  out.erase(std::remove(out.begin(), out.end(), '-'), out.end());
  out.erase(std::remove(out.begin(), out.end(), '_'), out.end());
  return out;
}

}  // namespace

std::string_view algorithm_name(Algorithm algo) {
  for (const auto& a : kAlgos) {
    if (a.algo == algo) return a.name;
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& a : kAlgos) {
    if (lower(a.name) == key) return a.algo;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

bool is_accelerated(Algorithm algo) {
  return algo == Algorithm::kAccAsyLPG || algo == Algorithm::kAccAsyFPG;
}

bool quantizes_model(Algorithm algo) {
  return algo == Algorithm::kAsyLPG || algo == Algorithm::kSparseAsyLPG ||
         algo == Algorithm::kAccAsyLPG;
}

GradPath grad_path(Algorithm algo) {
  switch (algo) {
    case Algorithm::kSparseAsyLPG: return GradPath::kSparse;
    case Algorithm::kAsyFPG:
    case Algorithm::kAccAsyFPG: return GradPath::kFull;
    default: return GradPath::kDense;
  }
}

std::string_view step_mode_name(StepMode mode) {
  return mode == StepMode::kTheory ? "theory" : "experiment";
}

StepMode parse_step_mode(std::string_view name) {
  if (name == "theory") return StepMode::kTheory;
  if (name == "experiment") return StepMode::kExperiment;
  throw std::invalid_argument("unknown step mode '" + std::string(name) + "'");
}

std::string_view bx_policy_name(BxPolicy policy) {
  switch (policy) {
    case BxPolicy::kFixed: return "fixed";
    case BxPolicy::kEscalate: return "escalate";
    case BxPolicy::kSearch: return "search";
  }
  return "unknown";
}

BxPolicy parse_bx_policy(std::string_view name) {
  if (name == "fixed") return BxPolicy::kFixed;
  if (name == "escalate") return BxPolicy::kEscalate;
  if (name == "search") return BxPolicy::kSearch;
  throw std::invalid_argument("unknown b_x policy '" + std::string(name) + "'");
}

void AlgoConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (step_mode == StepMode::kExperiment && !(lr > 0.0)) {
    throw std::invalid_argument("lr must be positive");
  }
  if (step_mode == StepMode::kTheory && rho < 0.0) throw std::invalid_argument("rho must be >= 0");
  if (is_accelerated(algo) && !(sigma > 1.0)) throw std::invalid_argument("sigma must exceed 1");
  quant::check_bits(bx);
  quant::check_bits(b);
  for (int r : mu_replay_bits) quant::check_bits(r);
  if (!(mu >= 0.0)) throw std::invalid_argument("mu must be >= 0");
  if (phi < 0.0) throw std::invalid_argument("phi must be >= 0");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  latency.validate();
}

VersionBuffer::VersionBuffer(std::size_t depth) : slots_(std::max<std::size_t>(depth, 1)) {}

void VersionBuffer::reset(Vec x0) {
  latest_ = 0;
  slots_[0] = std::move(x0);
}

void VersionBuffer::push(Vec x) {
  ++latest_;
  slots_[latest_ % slots_.size()] = std::move(x);
}

const Vec& VersionBuffer::at(std::uint64_t version) const {
  if (version > latest_ || latest_ - version >= slots_.size()) {
    throw std::out_of_range("version " + std::to_string(version) + " not buffered (latest " +
                            std::to_string(latest_) + ")");
  }
  return slots_[version % slots_.size()];
}

double acc_theta(std::size_t s) {
  if (s < 1) throw std::invalid_argument("acc_theta: epochs count from 1");
  return 2.0 / (static_cast<double>(s) + 2.0);
}

double epoch_eta(const AlgoConfig& cfg, double base_eta, double lipschitz, std::size_t s) {
  if (!is_accelerated(cfg.algo)) return base_eta;
  const double theta = acc_theta(s);
  if (cfg.step_mode == StepMode::kTheory) return 1.0 / (cfg.sigma * lipschitz * theta);
  return base_eta / theta;
}

double base_step(const AlgoConfig& cfg, const problems::CompositeProblem& problem) {
  const double lip = problem.smoothness();
  if (cfg.step_mode == StepMode::kExperiment) return cfg.lr;
  if (is_accelerated(cfg.algo)) return 1.0 / (cfg.sigma * lip);
  double rho = cfg.rho;
  if (rho == 0.0) {
    const std::size_t m = cfg.inner_iterations(problem.num_samples());
    const std::size_t d = problem.dim();
    double a = 0.0;
    switch (cfg.algo) {
      case Algorithm::kSparseAsyLPG: {
        const double phi = cfg.phi > 0.0 ? cfg.phi : 1.0;
        a = theory::sparse_coefficient(m, cfg.mu, theory::gamma_factor(d, phi, cfg.b), cfg.tau);
        break;
      }
      case Algorithm::kAsyFPG: a = theory::dense_coefficient(m, 0.0, 0.0, cfg.tau); break;
      case Algorithm::kQSVRG:
        a = theory::dense_coefficient(m, 0.0, theory::delta_factor(d, cfg.b), cfg.tau);
        break;
      default:
        a = theory::dense_coefficient(m, cfg.mu, theory::delta_factor(d, cfg.b), cfg.tau);
        break;
    }
    rho = theory::rho_max(a);
  }
  return rho / lip;
}

ModelMessage model_broadcast(std::span<const double> x, std::span<const double> snapshot,
                             const AlgoConfig& cfg, double scale, rng::Stream& rng) {
  ModelMessage out;
  const double gap = linalg::dist_sq(x, snapshot);
  if (gap == 0.0) {
    out.msg = codec::encode_flag();
    out.info.flag = true;
    out.info.bits = out.msg.counted_bits;
    return out;
  }
  const double budget = scale * cfg.mu * gap;
  auto fits = [&](int bits, double& err) {
    err = quant::expected_sq_error(x, quant::grid_for(x, bits, kWireGrid));
    return err <= budget;
  };

  int bits = cfg.bx;
  double err = 0.0;
  bool ok = false;
  switch (cfg.bx_policy) {
    case BxPolicy::kFixed: ok = fits(bits, err); break;
    case BxPolicy::kEscalate:
      ok = fits(bits, err);
      while (!ok && bits < quant::kMaxBits) ok = fits(++bits, err);
      break;
    case BxPolicy::kSearch:
      for (bits = quant::kMinBits;; ++bits) {
        ok = fits(bits, err);
        if (ok || bits == quant::kMaxBits) break;
      }
      break;
  }

  const quant::LowPrecisionVector q = quant::quantize_vector(x, bits, rng, kWireGrid);
  out.msg = codec::encode_dense(q);
  out.info.bx_used = bits;
  out.info.expected_error = err;
  out.info.budget = budget;
  out.info.ok = ok;
  out.info.mu_required = err / (scale * gap);
  out.info.bits = out.msg.counted_bits;
  for (int r : cfg.mu_replay_bits) {
    out.info.replay_mu.push_back(
        quant::expected_sq_error(x, quant::grid_for(x, r, kWireGrid)) / (scale * gap));
  }
  return out;
}

ModelMessage acc_model_broadcast(const TrainState& state, std::uint64_t version,
                                 const AlgoConfig& cfg, rng::Stream& rng) {
  return model_broadcast(state.versions.at(version), state.snapshot, cfg, state.theta, rng);
}

ModelMessage full_broadcast(std::span<const double> x) {
  ModelMessage out;
  out.msg = codec::encode_full(x);
  out.info.bits = out.msg.counted_bits;
  return out;
}

std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch, rng::Stream& rng) {
  if (n == 0) throw std::invalid_argument("draw_batch: empty dataset");
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = static_cast<std::size_t>(rng.below(n));
  return out;
}

Vec semi_stochastic_difference(const problems::CompositeProblem& problem,
                               std::span<const double> x, std::span<const double> snapshot,
                               std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("semi_stochastic_difference: empty batch");
  linalg::require_same_size(x.size(), problem.dim(), "semi_stochastic_difference");
  linalg::require_same_size(snapshot.size(), problem.dim(), "semi_stochastic_difference");
  Vec alpha(problem.dim(), 0.0);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i : batch) {
    problem.add_grad_sample(i, x, w, alpha);
    problem.add_grad_sample(i, snapshot, -w, alpha);
  }
  return alpha;
}

namespace {

Vec received_model(const codec::WireMessage& model, std::span<const double> snapshot) {
  const Vec snap(snapshot.begin(), snapshot.end());
  return codec::decode_values(model, snapshot.size(), &snap);
}

}  // namespace

codec::WireMessage asylpg_worker_step(const codec::WireMessage& model,
                                      const problems::CompositeProblem& problem,
                                      std::span<const double> snapshot,
                                      std::span<const std::size_t> batch, int bits,
                                      rng::Stream& rng) {
  const Vec x = received_model(model, snapshot);
  const Vec alpha = semi_stochastic_difference(problem, x, snapshot, batch);
  return codec::encode_dense(quant::quantize_vector(alpha, bits, rng, kWireGrid));
}

codec::WireMessage sparse_worker_step(const codec::WireMessage& model,
                                      const problems::CompositeProblem& problem,
                                      std::span<const double> snapshot,
                                      std::span<const std::size_t> batch, double phi, int bits,
                                      rng::Stream& rng) {
  const Vec x = received_model(model, snapshot);
  const Vec alpha = semi_stochastic_difference(problem, x, snapshot, batch);
  if (linalg::norm_inf(alpha) == 0.0) {
    sparse::SparseLowPrecisionVector empty;
    empty.grid.bits = bits;
    empty.dim = alpha.size();
    return codec::encode_sparse(empty);
  }
  const double cap = sparse::budget_max(alpha);
  const double budget = phi > 0.0 ? std::min(phi, cap) : cap;
  const sparse::SparseRealVector beta =
      sparse::sparsify(alpha, sparse::optimal_plan(alpha, budget), rng);
  return codec::encode_sparse(sparse::quantize_sparse(beta, bits, rng, kWireGrid));
}

codec::WireMessage full_worker_step(const codec::WireMessage& model,
                                    const problems::CompositeProblem& problem,
                                    std::span<const double> snapshot,
                                    std::span<const std::size_t> batch) {
  const Vec x = received_model(model, snapshot);
  return codec::encode_full(semi_stochastic_difference(problem, x, snapshot, batch));
}

namespace {

Vec semi_stochastic_gradient(const TrainState& state, const codec::WireMessage& grad) {
  Vec u = codec::decode_values(grad, state.x.size());
  linalg::axpy(1.0, state.snapshot_grad, u);
  return u;
}

}  // namespace

void asylpg_master_step(TrainState& state, const problems::CompositeProblem& problem,
                        const codec::WireMessage& grad) {
  const Vec u = semi_stochastic_gradient(state, grad);
  Vec v = state.x;
  linalg::axpy(-state.eta, u, v);
  problem.prox(state.eta, v, state.x);
  ++state.t;
  state.versions.push(state.x);
}

void acc_master_step(TrainState& state, const problems::CompositeProblem& problem,
                     const codec::WireMessage& grad) {
  const Vec u = semi_stochastic_gradient(state, grad);
  Vec v = state.y;
  linalg::axpy(-state.eta, u, v);
  problem.prox(state.eta, v, state.y);
  for (std::size_t j = 0; j < state.x.size(); ++j) {
    state.x[j] = state.snapshot[j] + state.theta * (state.y[j] - state.snapshot[j]);
  }
  if (state.avg_sum.size() != state.x.size()) state.avg_sum.assign(state.x.size(), 0.0);
  linalg::axpy(1.0, state.x, state.avg_sum);
  ++state.t;
  state.versions.push(state.x);
}

std::size_t select_index(std::size_t count, rng::Stream& rng) {
  if (count == 0) throw std::invalid_argument("select_index: empty trace");
  return static_cast<std::size_t>(rng.below(count));
}

Vec select_output(std::span<const Vec> trace, rng::Stream& rng) {
  return trace[select_index(trace.size(), rng)];
}

void Reservoir::offer(std::span<const double> x) {
  ++seen_;
  if (seen_ == 1 || rng_.below(seen_) == 0) value_.assign(x.begin(), x.end());
}

namespace {

class Trainer {
 public:
  Trainer(const problems::CompositeProblem& problem, const AlgoConfig& cfg,
          std::span<const double> x0, const TrainOptions& opts)
      : problem_(problem),
        cfg_(cfg),
        opts_(opts),
        n_(problem.num_samples()),
        d_(problem.dim()),
        m_(cfg.inner_iterations(problem.num_samples())),
        eval_every_(cfg.eval_every == 0 ? std::max<std::size_t>(1, m_ / 20) : cfg.eval_every),
        master_quant_(cfg.seed, rng::Purpose::kMasterQuant),
        reservoir_(rng::Stream(cfg.seed, rng::Purpose::kMasterSelect)),
        pending_(cfg.workers) {
    cfg_.validate();
    linalg::require_same_size(x0.size(), d_, "train");
    for (std::size_t w = 0; w < cfg.workers; ++w) {
      sample_streams_.emplace_back(cfg.seed, rng::Purpose::kWorkerSample, w);
      quant_streams_.emplace_back(cfg.seed, rng::Purpose::kWorkerQuant, w);
    }
    workers_ = simnet::make_workers(cfg.workers, cfg.latency, cfg.seed);
    state_.versions = VersionBuffer(cfg.tau + 1);
    state_.x.assign(x0.begin(), x0.end());
    state_.snapshot = state_.x;
    state_.y = state_.x;
    result_.algo = cfg.algo;
    result_.m = m_;
    result_.base_eta = base_step(cfg, problem);
    result_.initial_loss = problem.objective(state_.x);
  }

  TrainResult run() {
    const bool acc = is_accelerated(cfg_.algo);
    for (std::size_t s = 1; s <= cfg_.epochs && !stopped_; ++s) {
      state_.s = s - 1;
      state_.t = 0;
      state_.snapshot_grad = simnet::epoch_barrier(cfg_.workers, problem_, state_.snapshot,
                                                   &result_.ledger, updates_);
      state_.eta = epoch_eta(cfg_, result_.base_eta, problem_.smoothness(), s);
      if (acc) {
        state_.theta = acc_theta(s);
        for (std::size_t j = 0; j < d_; ++j) {
          state_.x[j] = state_.snapshot[j] + state_.theta * (state_.y[j] - state_.snapshot[j]);
        }
        state_.avg_sum.assign(d_, 0.0);
      } else {
        state_.x = state_.snapshot;
      }
      state_.versions.reset(state_.x);
      epoch_ = s;
      for (auto& q : pending_) q.clear();

      simnet::LoopCallbacks cb;
      cb.broadcast = [this](int w, std::uint64_t v) { return broadcast(w, v); };
      cb.work = [this](int w, const codec::WireMessage& model) { return work(w, model); };
      cb.arrive = [this](int, const codec::WireMessage& g) {
        result_.ledger.record(g, codec::Direction::kUp, updates_);
      };
      cb.apply = [this](const simnet::StalenessRecord& rec, const codec::WireMessage& g) {
        apply(rec, g);
      };
      cb.discard = [this](int, const codec::WireMessage& g, bool arrived) {
        if (!arrived) result_.ledger.record(g, codec::Direction::kUp, updates_);
      };

      simnet::LoopResult loop =
          cfg_.threaded ? simnet::run_inner_loop_threaded(cfg_.workers, cfg_.tau, m_, cb)
                        : simnet::run_inner_loop(workers_, cfg_.tau, m_, cb);

      if (stopped_ && loop.records.size() < m_) break;
      if (acc) {
        for (std::size_t j = 0; j < d_; ++j) {
          state_.snapshot[j] = state_.avg_sum[j] / static_cast<double>(m_);
        }
      } else {
        state_.snapshot = state_.x;
      }
      EpochRow row;
      row.epoch = s;
      row.snapshot_loss = problem_.objective(state_.snapshot);
      row.grad_mapping_sq = grad_mapping(state_.snapshot);
      row.cumulative_bits = result_.ledger.total_bits();
      row.max_staleness = loop.max_staleness();
      row.ticks = loop.ticks;
      result_.epochs.push_back(row);
      if (!std::isfinite(row.snapshot_loss)) {
        result_.diverged = true;
        break;
      }
    }
    result_.x_final = state_.x;
    result_.snapshot = state_.snapshot;
    if (acc || reservoir_.seen() == 0) {
      result_.output = state_.snapshot;
    } else {
      result_.output = reservoir_.value();
    }
    return std::move(result_);
  }

 private:
  double grad_mapping(std::span<const double> x) const {
    return problems::gradient_mapping_norm(problem_, x, state_.eta);
  }

  codec::WireMessage broadcast(int w, std::uint64_t version) {
    ModelMessage mm;
    if (quantizes_model(cfg_.algo)) {
      mm = model_broadcast(state_.versions.at(version), state_.snapshot, cfg_,
                           is_accelerated(cfg_.algo) ? state_.theta : 1.0, master_quant_);
    } else {
      mm = full_broadcast(state_.versions.at(version));
    }
    mm.info.epoch = epoch_;
    mm.info.version = version;
    mm.info.worker = w;
    if (!mm.info.ok) ++result_.violations;
    result_.ledger.record(mm.msg, codec::Direction::kDown, updates_);
    pending_[static_cast<std::size_t>(w)].push_back(result_.broadcasts.size());
    result_.broadcasts.push_back(std::move(mm.info));
    return std::move(mm.msg);
  }

  codec::WireMessage work(int w, const codec::WireMessage& model) {
    const auto wi = static_cast<std::size_t>(w);
    const std::vector<std::size_t> batch = draw_batch(n_, cfg_.batch, sample_streams_[wi]);
    switch (grad_path(cfg_.algo)) {
      case GradPath::kDense:
        return asylpg_worker_step(model, problem_, state_.snapshot, batch, cfg_.b,
                                  quant_streams_[wi]);
      case GradPath::kSparse:
        return sparse_worker_step(model, problem_, state_.snapshot, batch, cfg_.phi, cfg_.b,
                                  quant_streams_[wi]);
      case GradPath::kFull: return full_worker_step(model, problem_, state_.snapshot, batch);
    }
    throw std::logic_error("unknown gradient path");
  }

  void apply(const simnet::StalenessRecord& rec, const codec::WireMessage& grad) {
    auto& queue = pending_[static_cast<std::size_t>(rec.worker)];
    if (queue.empty()) throw std::logic_error("update without a matching broadcast");
    const BroadcastInfo& info = result_.broadcasts[queue.front()];
    queue.pop_front();
    if (info.version != rec.version) throw std::logic_error("broadcast order mismatch");

    if (is_accelerated(cfg_.algo)) {
      acc_master_step(state_, problem_, grad);
      double err = 0.0;
      for (std::size_t j = 0; j < d_; ++j) {
        err = std::max(err, std::abs((state_.x[j] - state_.snapshot[j]) -
                                     state_.theta * (state_.y[j] - state_.snapshot[j])));
      }
      result_.max_coupling_error = std::max(result_.max_coupling_error, err);
    } else {
      asylpg_master_step(state_, problem_, grad);
      reservoir_.offer(state_.x);
    }
    ++updates_;
    if (opts_.keep_iterates) result_.iterates.push_back(state_.x);

    MetricsRow row;
    row.epoch = epoch_;
    row.t = rec.t;
    row.version = rec.version;
    row.worker = rec.worker;
    row.tick = rec.tick;
    row.cumulative_bits = result_.ledger.total_bits();
    row.mu_required = info.mu_required;
    row.bx_used = info.bx_used;
    row.nnz_sent = codec::coordinates_sent(grad, d_);
    if (state_.t % eval_every_ == 0 || state_.t == m_) {
      row.evaluated = true;
      row.train_loss = problem_.objective(state_.x);
      row.grad_mapping_sq = grad_mapping(state_.x);
      if (!std::isfinite(row.train_loss) || !linalg::all_finite(state_.x)) {
        result_.diverged = true;
        stopped_ = true;
      }
      if (opts_.stop_below > 0.0 && row.train_loss < opts_.stop_below) stopped_ = true;
    }
    result_.metrics.push_back(row);

    simnet::TraceRow tr;
    tr.record = rec;
    tr.epoch = epoch_;
    tr.kind = grad.kind;
    tr.bits = grad.counted_bits;
    result_.trace.push_back(tr);
  }

  const problems::CompositeProblem& problem_;
  AlgoConfig cfg_;
  TrainOptions opts_;
  std::size_t n_, d_, m_, eval_every_;
  rng::Stream master_quant_;
  Reservoir reservoir_;
  std::vector<std::deque<std::size_t>> pending_;
  std::vector<rng::Stream> sample_streams_, quant_streams_;
  std::vector<simnet::WorkerSpec> workers_;
  TrainState state_;
  TrainResult result_;
  std::uint64_t epoch_ = 0;
  std::uint64_t updates_ = 0;
  bool stopped_ = false;
};

}  // namespace

TrainResult train(const problems::CompositeProblem& problem, const AlgoConfig& cfg,
                  std::span<const double> x0, const TrainOptions& opts) {
  return Trainer(problem, cfg, x0, opts).run();
}

namespace {

void put(std::ostream& os, double v) {
  if (std::isnan(v)) return;
  os << v;
}

}  // namespace

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& os) {
  os << "epoch,t,D(t),train_loss,grad_mapping_sq,cumulative_bits,mu_required,b_x_used,nnz_sent\n";
  const auto old = os.precision(17);
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.t << ',' << r.version << ',';
    put(os, r.train_loss);
    os << ',';
    put(os, r.grad_mapping_sq);
    os << ',' << r.cumulative_bits << ',';
    put(os, r.mu_required);
    os << ',' << r.bx_used << ',' << r.nnz_sent << '\n';
  }
  os.precision(old);
}

void write_epochs_csv(std::span<const EpochRow> rows, std::ostream& os) {
  os << "epoch,snapshot_loss,grad_mapping_sq,cumulative_bits,max_staleness,ticks\n";
  const auto old = os.precision(17);
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.snapshot_loss << ',' << r.grad_mapping_sq << ','
       << r.cumulative_bits << ',' << r.max_staleness << ',' << r.ticks << '\n';
  }
  os.precision(old);
}

}  // namespace dqsim::optim
