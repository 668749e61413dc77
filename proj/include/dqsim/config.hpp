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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqsim/linalg.hpp"
#include "dqsim/optim.hpp"
#include "dqsim/problems.hpp"

namespace dqsim::config {

using nlohmann::json;

struct ProblemSpec {
  std::string kind = "logistic";  // logistic | mlp | quadratic
  std::string dataset;            // libsvm path; empty means synthetic
  problems::SynthSpec synth;
  std::size_t classes = 10;       // mlp synthetic data
  double spread = 1.0;            // mlp synthetic data
  double lambda1 = 0.0;
  double lambda2 = 1e-4;
  double smoothness = 0.0;        // L override; 0 uses the problem's estimate
  std::size_t hidden = 100;       // mlp
  double box_radius = 100.0;      // accelerated runs only; 0 disables
  std::vector<double> centers;    // quadratic, one scalar center per sample (1-D)
  double curvature = 1.0;         // quadratic

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

/// How the loss threshold for bits-to-target is fixed.
///   relative: P* + gap |P*|
///   progress: P* + gap (P(x0) - P*)
///   absolute: `loss`
struct TargetSpec {
  std::string mode = "relative";
  double gap = 0.1;
  double loss = 0.0;
  std::size_t oracle_iters = 2000;
};

struct ExperimentConfig {
  ProblemSpec problem;
  optim::AlgoConfig algo;
  TargetSpec target;
  std::size_t repetitions = 1;
  std::string output_dir = "out";
  std::vector<double> grid{1e-1, 5e-2, 1e-2, 5e-3, 1e-3};

  /// Throws with the full list of problems found.
  void validate() const;
};

ExperimentConfig from_json(const json& j);
json to_json(const ExperimentConfig& cfg);
json to_json(const optim::AlgoConfig& cfg);
json to_json(const ProblemSpec& spec);

ExperimentConfig load(const std::filesystem::path& path);
void save(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// The problem an algorithm actually trains on: accelerated runs get the
/// box constraint when box_radius > 0.
std::shared_ptr<const problems::CompositeProblem> build_problem(const ProblemSpec& spec,
                                                                bool accelerated);
/// Zero for convex problems, He initialisation for the MLP.
Vec initial_point(const ProblemSpec& spec, const problems::CompositeProblem& problem,
                  std::uint64_t seed);

}  // namespace dqsim::config
