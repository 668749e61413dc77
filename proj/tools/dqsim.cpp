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
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dqsim/config.hpp"
#include "dqsim/harness.hpp"

namespace fs = std::filesystem;
using dqsim::config::ExperimentConfig;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string algo;
};

void add_common(CLI::App* cmd, Common& c, bool with_config = true) {
  if (with_config) cmd->add_option("--config", c.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the run seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--algo", c.algo, "override the algorithm (AsyLPG, Sparse-AsyLPG, Acc-AsyLPG, AsyFPG, Acc-AsyFPG, QSVRG)");
}

ExperimentConfig load(const std::string& path, const Common& c) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : dqsim::config::load(path);
  if (c.seed) cfg.algo.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (!c.algo.empty()) cfg.algo.algo = dqsim::optim::parse_algorithm(c.algo);
  cfg.validate();
  return cfg;
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load(c.config_path, c);
  fs::create_directories(cfg.output_dir);
  dqsim::config::save(cfg, fs::path(cfg.output_dir) / "config.json");
  const double pstar = dqsim::harness::oracle_loss(cfg);
  std::vector<dqsim::harness::RunReport> reports(cfg.repetitions);
  dqsim::harness::parallel_for(cfg.repetitions, [&](std::size_t r) {
    ExperimentConfig rc = cfg;
    rc.algo.seed = cfg.algo.seed + r;
    dqsim::harness::RunOptions opts;
    opts.pstar = pstar;
    opts.out_dir = cfg.repetitions == 1 ? fs::path(cfg.output_dir)
                                        : fs::path(cfg.output_dir) / ("rep" + std::to_string(r));
    reports[r] = dqsim::harness::run_experiment(rc, opts);
  });
  for (const auto& rep : reports) {
    std::cout << dqsim::optim::algorithm_name(rep.train.algo) << " seed " << rep.config.algo.seed
              << ": final loss " << rep.final_loss << ", total bits " << rep.train.ledger.total_bits()
              << ", bits to target ";
    if (rep.bits.reached) std::cout << rep.bits.bits; else std::cout << "not reached";
    std::cout << ", violations " << rep.train.violations << '\n';
  }
  return 0;
}

int cmd_grid(const Common& c) {
  const ExperimentConfig cfg = load(c.config_path, c);
  const auto res = dqsim::harness::lr_grid_search(cfg, cfg.grid);
  for (const auto& p : res.points) {
    std::cout << "lr " << p.lr << ": " << (p.diverged ? std::string("diverged") : std::to_string(p.final_loss)) << '\n';
  }
  std::cout << "best lr " << res.best_lr << '\n';
  return 0;
}

int cmd_mu(const Common& c, int pin_bits) {
  ExperimentConfig cfg = load(c.config_path, c);
  if (cfg.algo.mu_replay_bits.empty()) cfg.algo.mu_replay_bits = {4, 8};
  auto& replay = cfg.algo.mu_replay_bits;
  if (pin_bits != 0 && std::find(replay.begin(), replay.end(), pin_bits) == replay.end()) {
    replay.push_back(pin_bits);
  }
  const auto tr = dqsim::harness::figure_mu_trace(cfg, pin_bits);
  fs::create_directories(cfg.output_dir);
  const auto path = fs::path(cfg.output_dir) / "mu_trace.csv";
  std::ofstream out(path);
  dqsim::harness::write_mu_trace_csv(tr, out);
  std::cout << "mu ceiling " << tr.ceiling << (tr.finite ? "" : " (non-finite values present)") << '\n';
  for (std::size_t k = 0; k < tr.replay_bits.size(); ++k) {
    std::cout << "  replay b_x=" << tr.replay_bits[k] << ": " << tr.replay_ceiling[k] << '\n';
  }
  std::cout << "epochs with an early peak: " << tr.early_fraction * 100.0 << "%\n"
            << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths, const Common& c) {
  std::vector<ExperimentConfig> cfgs;
  for (const auto& p : paths) cfgs.push_back(load(p, c));
  const auto res = dqsim::harness::compare_suite(cfgs);
  dqsim::harness::write_compare_table(res, std::cout);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream out(fs::path(c.out) / "compare.txt");
    dqsim::harness::write_compare_table(res, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dqsim: double-quantized asynchronous optimisation simulator"};
  app.require_subcommand(1);

  Common run_opts, grid_opts, mu_opts, cmp_opts;
  auto* run = app.add_subcommand("run", "train one configuration and write CSVs and report.json");
  add_common(run, run_opts);
  auto* grid = app.add_subcommand("grid-search", "pick the lr with the lowest final loss");
  add_common(grid, grid_opts);
  auto* mu = app.add_subcommand("mu-trace", "log the mu needed at every model broadcast");
  add_common(mu, mu_opts);
  int pin_bits = 0;
  mu->add_option("--pin-bits", pin_bits, "summarize at this replay width instead of the width used");
  auto* cmp = app.add_subcommand("compare", "bits and epochs to the target loss per algorithm");
  std::vector<std::string> cmp_paths;
  cmp->add_option("--config", cmp_paths, "one config per algorithm")->required()->check(CLI::ExistingFile);
  add_common(cmp, cmp_opts, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_opts);
    if (*grid) return cmd_grid(grid_opts);
    if (*mu) return cmd_mu(mu_opts, pin_bits);
    if (*cmp) return cmd_compare(cmp_paths, cmp_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
