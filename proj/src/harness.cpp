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

#include "dqsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dqsim::harness {

std::size_t parallel_limit() {
  if (const char* env = std::getenv("DQSIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min(parallel_limit(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

OracleResult reference_optimum(const problems::CompositeProblem& problem,
                               std::span<const double> x0, std::size_t iters) {
  const std::size_t d = problem.dim();
  linalg::require_same_size(x0.size(), d, "reference_optimum");
  Vec x(x0.begin(), x0.end()), y = x, z(d), v(d);
  double px = problem.objective(x);
  double lip = problem.smoothness();
  double momentum = 1.0;
  OracleResult out;
  for (std::size_t k = 0; k < iters; ++k) {
    const Vec g = problem.full_grad(y);
    const double fy = problem.f_value(y);
    for (int tries = 0;; ++tries) {
      v = y;
      linalg::axpy(-1.0 / lip, g, v);
      problem.prox(1.0 / lip, v, z);
      double model = fy + 0.5 * lip * linalg::dist_sq(z, y);
      for (std::size_t j = 0; j < d; ++j) model += g[j] * (z[j] - y[j]);
      if (problem.f_value(z) <= model + 1e-12 * std::abs(model) || tries > 60) break;
      lip *= 2.0;
    }
    const double pz = problem.objective(z);
    out.iterations = k + 1;
    if (pz > px) {
      // Restart from the best point; if that was already the momentum-free
      // step there is nothing left to gain.
      if (momentum == 1.0) break;
      momentum = 1.0;
      y = x;
      continue;
    }
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    for (std::size_t j = 0; j < d; ++j) y[j] = z[j] + ((momentum - 1.0) / next) * (z[j] - x[j]);
    momentum = next;
    const bool stalled = px - pz <= 1e-16 * std::max(1.0, std::abs(px));
    x = z;
    px = pz;
    if (stalled || k % 10 == 9) {
      const double gm = problems::gradient_mapping_norm(problem, x, 1.0 / lip);
      if (gm < 1e-20 * std::max(1.0, std::abs(px))) break;
    }
  }
  out.x = x;
  out.loss = px;
  out.grad_mapping_sq = problems::gradient_mapping_norm(problem, x, 1.0 / problem.smoothness());
  return out;
}

double target_loss(const config::TargetSpec& spec, double pstar, double p0) {
  if (spec.mode == "absolute") return spec.loss;
  if (spec.mode == "progress") return pstar + spec.gap * (p0 - pstar);
  if (spec.mode == "relative") return pstar + spec.gap * std::abs(pstar);
  throw std::invalid_argument("unknown target mode '" + spec.mode + "'");
}

Crossing bits_to_target(std::span<const optim::MetricsRow> rows, double threshold,
                        std::uint64_t total_bits) {
  for (const auto& r : rows) {
    if (r.evaluated && r.train_loss < threshold) return {true, r.cumulative_bits, r.epoch, r.t};
  }
  return {false, total_bits, 0, 0};
}

std::optional<std::uint64_t> epochs_to_target(std::span<const optim::EpochRow> rows,
                                              double threshold) {
  for (const auto& r : rows) {
    if (r.snapshot_loss < threshold) return r.epoch;
  }
  return std::nullopt;
}

double oracle_loss(const ExperimentConfig& cfg) {
  const auto problem = config::build_problem(cfg.problem, false);
  const Vec x0 = config::initial_point(cfg.problem, *problem, cfg.algo.seed);
  return reference_optimum(*problem, x0, cfg.target.oracle_iters).loss;
}

namespace {

json crossing_json(const Crossing& c) {
  if (!c.reached) return json{{"reached", false}, {"status", "not reached"}, {"total_bits", c.bits}};
  return json{{"reached", true}, {"bits", c.bits}, {"epoch", c.epoch}, {"t", c.t}};
}

json theory_json(const theory::Report& r) {
  json acc = json::array();
  for (const auto& e : r.acc) {
    acc.push_back({{"s", e.s}, {"theta", e.theta}, {"tau_bound", e.tau_bound}, {"ok", e.ok}});
  }
  return json{{"delta", r.delta},
              {"gamma", r.gamma},
              {"rho", r.rho},
              {"dense_lhs", r.dense_lhs},
              {"dense_ok", r.dense_ok},
              {"dense_rho_max", r.dense_rho_max},
              {"sparse_lhs", r.sparse_lhs},
              {"sparse_ok", r.sparse_ok},
              {"sparse_rho_max", r.sparse_rho_max},
              {"serial_lhs", r.serial_lhs},
              {"serial_ok", r.serial_ok},
              {"regime_ok", r.regime_ok},
              {"acc", acc},
              {"acc_binding_epoch", r.acc_binding_epoch},
              {"acc_ok", r.acc_ok},
              {"notes", r.notes}};
}

template <typename Writer>
std::string write_file(const std::filesystem::path& dir, const char* name, Writer&& writer) {
  const auto path = dir / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  writer(out);
  return path.string();
}

}  // namespace

json RunReport::to_json() const {
  const auto& led = train.ledger;
  json kinds = json::object();
  for (std::size_t k = 0; k < codec::kLedgerKinds; ++k) {
    const auto kind = static_cast<codec::LedgerKind>(k);
    const auto& tot = led.kind_totals(kind);
    kinds[std::string(codec::ledger_kind_name(kind))] = {{"count", tot.count}, {"bits", tot.bits}};
  }
  json epochs_json = json::array();
  std::uint64_t max_stale = 0;
  for (const auto& e : train.epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"snapshot_loss", e.snapshot_loss},
                           {"grad_mapping_sq", e.grad_mapping_sq},
                           {"cumulative_bits", e.cumulative_bits}});
    max_stale = std::max(max_stale, e.max_staleness);
  }
  return json{{"config", config::to_json(config)},
              {"algorithm", optim::algorithm_name(train.algo)},
              {"m", train.m},
              {"eta", train.base_eta},
              {"initial_loss", train.initial_loss},
              {"pstar", pstar},
              {"target_loss", target},
              {"bits_to_target", crossing_json(bits)},
              {"epochs_to_target", epochs ? json(*epochs) : json("not reached")},
              {"total_bits", led.total_bits()},
              {"up_bits", led.up_bits()},
              {"down_bits", led.down_bits()},
              {"bits_by_kind", kinds},
              {"epochs", epochs_json},
              {"final_loss", final_loss},
              {"output_loss", output_loss},
              {"output", train.output},
              {"constraint_violations", train.violations},
              {"max_staleness", max_stale},
              {"max_coupling_error", train.max_coupling_error},
              {"diverged", train.diverged},
              {"theory", theory_json(theory)},
              {"files", files}};
}

RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  RunReport rep;
  rep.config = cfg;
  const bool acc = optim::is_accelerated(cfg.algo.algo);
  const auto problem = config::build_problem(cfg.problem, acc);
  const Vec x0 = config::initial_point(cfg.problem, *problem, cfg.algo.seed);
  const double p0 = problem->objective(x0);
  rep.pstar = opts.pstar ? *opts.pstar : oracle_loss(cfg);
  rep.target = target_loss(cfg.target, rep.pstar, p0);

  optim::TrainOptions topts;
  topts.keep_iterates = opts.keep_iterates;
  rep.train = optim::train(*problem, cfg.algo, x0, topts);

  const std::size_t m = rep.train.m;
  theory::Inputs in;
  in.d = problem->dim();
  in.m = m;
  in.tau = cfg.algo.tau;
  in.b = cfg.algo.b;
  in.mu = cfg.algo.mu;
  in.phi = cfg.algo.phi > 0.0 ? cfg.algo.phi : 1.0;
  in.rho = rep.train.base_eta * problem->smoothness();
  in.sigma = cfg.algo.sigma;
  in.epochs = cfg.algo.epochs;
  rep.theory = theory::theory_constants(in);

  rep.bits = bits_to_target(rep.train.metrics, rep.target, rep.train.ledger.total_bits());
  rep.epochs = epochs_to_target(rep.train.epochs, rep.target);
  rep.final_loss = rep.train.epochs.empty() ? p0 : rep.train.epochs.back().snapshot_loss;
  rep.output_loss = problem->objective(rep.train.output);

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    const auto& t = rep.train;
    rep.files.push_back(write_file(opts.out_dir, "metrics.csv",
                                   [&](std::ostream& os) { optim::write_metrics_csv(t.metrics, os); }));
    rep.files.push_back(write_file(opts.out_dir, "epochs.csv",
                                   [&](std::ostream& os) { optim::write_epochs_csv(t.epochs, os); }));
    rep.files.push_back(
        write_file(opts.out_dir, "ledger.csv", [&](std::ostream& os) { t.ledger.write_csv(os); }));
    rep.files.push_back(write_file(opts.out_dir, "trace.csv",
                                   [&](std::ostream& os) { simnet::write_trace_csv(t.trace, os); }));
    rep.files.push_back((opts.out_dir / "report.json").string());
    write_file(opts.out_dir, "report.json",
               [&](std::ostream& os) { os << std::setprecision(17) << rep.to_json().dump(2) << '\n'; });
  }
  return rep;
}

GridResult lr_grid_search(const ExperimentConfig& cfg, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("lr_grid_search: empty grid");
  cfg.validate();
  std::vector<double> lrs(grid.begin(), grid.end());
  std::sort(lrs.begin(), lrs.end());
  GridResult out;
  out.points.resize(lrs.size());
  const bool acc = optim::is_accelerated(cfg.algo.algo);
  const auto problem = config::build_problem(cfg.problem, acc);
  const Vec x0 = config::initial_point(cfg.problem, *problem, cfg.algo.seed);
  parallel_for(lrs.size(), [&](std::size_t i) {
    optim::AlgoConfig a = cfg.algo;
    a.step_mode = optim::StepMode::kExperiment;
    a.lr = lrs[i];
    GridPoint& p = out.points[i];
    p.lr = lrs[i];
    try {
      const optim::TrainResult r = optim::train(*problem, a, x0);
      p.diverged = r.diverged || r.epochs.empty();
      p.final_loss = p.diverged ? std::numeric_limits<double>::infinity() : r.epochs.back().snapshot_loss;
      p.diverged = p.diverged || !std::isfinite(p.final_loss);
    } catch (const std::exception&) {
      p.diverged = true;
      p.final_loss = std::numeric_limits<double>::infinity();
    }
  });
  const GridPoint* best = nullptr;
  for (const auto& p : out.points) {
    if (p.diverged) continue;
    if (best == nullptr || p.final_loss < best->final_loss) best = &p;
  }
  if (best == nullptr) {
    std::ostringstream os;
    os << "lr_grid_search: every run diverged for grid {";
    for (std::size_t i = 0; i < lrs.size(); ++i) os << (i ? ", " : "") << lrs[i];
    os << "}";
    throw std::runtime_error(os.str());
  }
  out.best_lr = best->lr;
  return out;
}

MuTrace summarize_mu(const optim::TrainResult& result, std::span<const int> replay_bits,
                     int primary_bits) {
  MuTrace tr;
  tr.replay_bits.assign(replay_bits.begin(), replay_bits.end());
  tr.replay_ceiling.assign(replay_bits.size(), 0.0);
  tr.primary_bits = primary_bits;
  std::size_t column = replay_bits.size();
  if (primary_bits != 0) {
    const auto it = std::find(replay_bits.begin(), replay_bits.end(), primary_bits);
    if (it == replay_bits.end()) {
      throw std::invalid_argument("summarize_mu: primary width is not a replay width");
    }
    column = static_cast<std::size_t>(it - replay_bits.begin());
  }
  for (const auto& b : result.broadcasts) {
    if (b.flag || b.bx_used == 0) continue;
    tr.rows.push_back(b);
    tr.finite = tr.finite && std::isfinite(b.mu_required);
    for (std::size_t k = 0; k < b.replay_mu.size() && k < tr.replay_ceiling.size(); ++k) {
      tr.replay_ceiling[k] = std::max(tr.replay_ceiling[k], b.replay_mu[k]);
      tr.finite = tr.finite && std::isfinite(b.replay_mu[k]);
    }
    double mu = b.mu_required;
    if (column < replay_bits.size()) {
      if (column >= b.replay_mu.size()) throw std::invalid_argument("summarize_mu: replay column missing");
      mu = b.replay_mu[column];
    }
    tr.ceiling = std::max(tr.ceiling, mu);
    if (tr.epochs.empty() || tr.epochs.back().epoch != b.epoch) tr.epochs.push_back({b.epoch, -1.0, 0, false});
    EpochMu& e = tr.epochs.back();
    if (mu > e.max_mu) {
      e.max_mu = mu;
      e.argmax_version = b.version;
    }
  }
  std::size_t early = 0;
  for (auto& e : tr.epochs) {
    e.early = static_cast<double>(e.argmax_version) < 0.2 * static_cast<double>(result.m);
    early += e.early ? 1 : 0;
  }
  tr.early_fraction = tr.epochs.empty() ? 0.0 : static_cast<double>(early) / static_cast<double>(tr.epochs.size());
  return tr;
}

MuTrace figure_mu_trace(const ExperimentConfig& cfg, int primary_bits) {
  cfg.validate();
  const bool acc = optim::is_accelerated(cfg.algo.algo);
  const auto problem = config::build_problem(cfg.problem, acc);
  const Vec x0 = config::initial_point(cfg.problem, *problem, cfg.algo.seed);
  const optim::TrainResult r = optim::train(*problem, cfg.algo, x0);
  return summarize_mu(r, cfg.algo.mu_replay_bits, primary_bits);
}

void write_mu_trace_csv(const MuTrace& trace, std::ostream& os) {
  os << "epoch,t,worker,b_x_used,mu_required";
  for (int b : trace.replay_bits) os << ",mu_bx" << b;
  os << '\n';
  const auto old = os.precision(17);
  for (const auto& r : trace.rows) {
    os << r.epoch << ',' << r.version << ',' << r.worker << ',' << r.bx_used << ',' << r.mu_required;
    for (double v : r.replay_mu) os << ',' << v;
    os << '\n';
  }
  os.precision(old);
}

CompareResult compare_suite(std::span<const ExperimentConfig> configs) {
  if (configs.size() < 2) throw std::invalid_argument("compare_suite: need at least two configs");
  for (const auto& c : configs) {
    c.validate();
    if (!(c.problem == configs.front().problem)) {
      throw std::invalid_argument("compare_suite: configs do not share a problem");
    }
  }
  CompareResult out;
  out.pstar = oracle_loss(configs.front());
  out.runs.resize(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    RunOptions opts;
    opts.pstar = out.pstar;
    out.runs[i] = run_experiment(configs[i], opts);
  });
  out.target = out.runs.front().target;
  std::optional<std::uint64_t> fpg_bits;
  for (const auto& r : out.runs) {
    if (r.train.algo == optim::Algorithm::kAsyFPG && r.bits.reached) fpg_bits = r.bits.bits;
  }
  for (const auto& r : out.runs) {
    CompareRow row;
    row.algo = std::string(optim::algorithm_name(r.train.algo));
    row.bits = r.bits;
    row.epochs = r.epochs;
    row.final_loss = r.final_loss;
    row.total_bits = r.train.ledger.total_bits();
    row.ratio = (fpg_bits && r.bits.reached && r.bits.bits > 0)
                    ? static_cast<double>(*fpg_bits) / static_cast<double>(r.bits.bits)
                    : std::numeric_limits<double>::quiet_NaN();
    out.rows.push_back(row);
  }
  return out;
}

void write_compare_table(const CompareResult& result, std::ostream& os) {
  os << "target_loss " << std::setprecision(10) << result.target << " (P* " << result.pstar << ")\n";
  os << std::left << std::setw(16) << "algorithm" << std::setw(18) << "bits_to_target"
     << std::setw(10) << "ratio" << std::setw(10) << "epochs" << "final_loss\n";
  for (const auto& r : result.rows) {
    std::ostringstream bits, ratio, epochs;
    if (r.bits.reached) bits << r.bits.bits; else bits << "not reached";
    if (std::isnan(r.ratio)) ratio << "-"; else ratio << std::fixed << std::setprecision(2) << r.ratio << "x";
    if (r.epochs) epochs << *r.epochs; else epochs << "-";
    os << std::setw(16) << r.algo << std::setw(18) << bits.str() << std::setw(10) << ratio.str()
       << std::setw(10) << epochs.str() << std::setprecision(8) << r.final_loss << '\n';
  }
}

}  // namespace dqsim::harness
