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

#include "dqsim/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dqsim::config {
namespace {

std::string latency_kind_name(simnet::LatencyKind kind) {
  switch (kind) {
    case simnet::LatencyKind::kFixed: return "fixed";
    case simnet::LatencyKind::kUniform: return "uniform";
    case simnet::LatencyKind::kGeometric: return "geometric";
  }
  return "fixed";
}

simnet::LatencyKind parse_latency_kind(const std::string& name) {
  if (name == "fixed") return simnet::LatencyKind::kFixed;
  if (name == "uniform") return simnet::LatencyKind::kUniform;
  if (name == "geometric") return simnet::LatencyKind::kGeometric;
  throw std::invalid_argument("unknown latency kind '" + name + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw std::invalid_argument("unknown key '" + k + "' in " + where);
  }
}

ProblemSpec problem_from_json(const json& j) {
  reject_unknown(j, {"kind", "dataset", "synth", "classes", "spread", "lambda1", "lambda2",
                     "smoothness", "hidden", "box_radius", "centers", "curvature"},
                 "problem");
  ProblemSpec p;
  read(j, "kind", p.kind);
  read(j, "dataset", p.dataset);
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    reject_unknown(s, {"n", "d", "seed", "flip_prob", "margin_scale"}, "problem.synth");
    read(s, "n", p.synth.n);
    read(s, "d", p.synth.d);
    read(s, "seed", p.synth.seed);
    read(s, "flip_prob", p.synth.flip_prob);
    read(s, "margin_scale", p.synth.margin_scale);
  }
  read(j, "classes", p.classes);
  read(j, "spread", p.spread);
  read(j, "lambda1", p.lambda1);
  read(j, "lambda2", p.lambda2);
  read(j, "smoothness", p.smoothness);
  read(j, "hidden", p.hidden);
  read(j, "box_radius", p.box_radius);
  read(j, "centers", p.centers);
  read(j, "curvature", p.curvature);
  return p;
}

optim::AlgoConfig algo_from_json(const json& j, optim::AlgoConfig a) {
  reject_unknown(j, {"name", "epochs", "m", "step_mode", "lr", "rho", "sigma", "bx", "b", "mu",
                     "bx_policy", "phi", "tau", "batch", "eval_every", "mu_replay_bits"},
                 "algo");
  if (j.contains("name")) a.algo = optim::parse_algorithm(j.at("name").get<std::string>());
  read(j, "epochs", a.epochs);
  read(j, "m", a.m);
  if (j.contains("step_mode")) a.step_mode = optim::parse_step_mode(j.at("step_mode").get<std::string>());
  read(j, "lr", a.lr);
  read(j, "rho", a.rho);
  read(j, "sigma", a.sigma);
  read(j, "bx", a.bx);
  read(j, "b", a.b);
  read(j, "mu", a.mu);
  if (j.contains("bx_policy")) a.bx_policy = optim::parse_bx_policy(j.at("bx_policy").get<std::string>());
  read(j, "phi", a.phi);
  read(j, "tau", a.tau);
  read(j, "batch", a.batch);
  read(j, "eval_every", a.eval_every);
  read(j, "mu_replay_bits", a.mu_replay_bits);
  return a;
}

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  check(problem.kind == "logistic" || problem.kind == "mlp" || problem.kind == "quadratic",
        "problem.kind must be logistic, mlp or quadratic");
  if (!problem.dataset.empty()) {
    check(std::filesystem::exists(problem.dataset), "dataset not found: " + problem.dataset);
  } else if (problem.kind != "quadratic") {
    check(problem.synth.n >= 1 && problem.synth.d >= 1, "synthetic data needs n, d >= 1");
  }
  if (problem.kind == "quadratic") {
    check(!problem.centers.empty(), "quadratic problem needs centers");
    check(problem.curvature > 0.0, "quadratic curvature must be positive");
  }
  if (problem.kind == "mlp") check(problem.classes >= 2 && problem.hidden >= 1, "mlp needs classes >= 2, hidden >= 1");
  check(problem.lambda1 >= 0.0 && problem.lambda2 >= 0.0, "regularisers must be >= 0");
  check(problem.box_radius >= 0.0, "box_radius must be >= 0");
  check(problem.smoothness >= 0.0, "smoothness must be >= 0");
  check(target.mode == "relative" || target.mode == "progress" || target.mode == "absolute",
        "target.mode must be relative, progress or absolute");
  check(target.gap >= 0.0, "target.gap must be >= 0");
  check(target.oracle_iters >= 1, "target.oracle_iters must be >= 1");
  check(repetitions >= 1, "repetitions must be >= 1");
  for (double lr : grid) check(lr > 0.0, "grid entries must be positive");
  try {
    algo.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("algo: ") + e.what());
  }
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid config:";
    for (const auto& e : errors) os << "\n  - " << e;
    throw std::invalid_argument(os.str());
  }
}

ExperimentConfig from_json(const json& j) {
  reject_unknown(j, {"problem", "algo", "workers", "target", "seed", "repetitions", "output_dir", "grid"},
                 "config");
  ExperimentConfig c;
  if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
  if (j.contains("algo")) c.algo = algo_from_json(j.at("algo"), c.algo);
  if (j.contains("workers")) {
    const json& w = j.at("workers");
    reject_unknown(w, {"count", "latency", "threaded"}, "workers");
    read(w, "count", c.algo.workers);
    read(w, "threaded", c.algo.threaded);
    if (w.contains("latency")) {
      const json& l = w.at("latency");
      reject_unknown(l, {"kind", "ticks", "lo", "hi", "p"}, "workers.latency");
      if (l.contains("kind")) c.algo.latency.kind = parse_latency_kind(l.at("kind").get<std::string>());
      read(l, "ticks", c.algo.latency.ticks);
      read(l, "lo", c.algo.latency.lo);
      read(l, "hi", c.algo.latency.hi);
      read(l, "p", c.algo.latency.p);
    }
  }
  if (j.contains("target")) {
    const json& t = j.at("target");
    reject_unknown(t, {"mode", "gap", "loss", "oracle_iters"}, "target");
    read(t, "mode", c.target.mode);
    read(t, "gap", c.target.gap);
    read(t, "loss", c.target.loss);
    read(t, "oracle_iters", c.target.oracle_iters);
  }
  read(j, "seed", c.algo.seed);
  read(j, "repetitions", c.repetitions);
  read(j, "output_dir", c.output_dir);
  read(j, "grid", c.grid);
  return c;
}

json to_json(const ProblemSpec& p) {
  return json{{"kind", p.kind},
              {"dataset", p.dataset},
              {"synth",
               {{"n", p.synth.n},
                {"d", p.synth.d},
                {"seed", p.synth.seed},
                {"flip_prob", p.synth.flip_prob},
                {"margin_scale", p.synth.margin_scale}}},
              {"classes", p.classes},
              {"spread", p.spread},
              {"lambda1", p.lambda1},
              {"lambda2", p.lambda2},
              {"smoothness", p.smoothness},
              {"hidden", p.hidden},
              {"box_radius", p.box_radius},
              {"centers", p.centers},
              {"curvature", p.curvature}};
}

json to_json(const optim::AlgoConfig& a) {
  return json{{"name", optim::algorithm_name(a.algo)},
              {"epochs", a.epochs},
              {"m", a.m},
              {"step_mode", optim::step_mode_name(a.step_mode)},
              {"lr", a.lr},
              {"rho", a.rho},
              {"sigma", a.sigma},
              {"bx", a.bx},
              {"b", a.b},
              {"mu", a.mu},
              {"bx_policy", optim::bx_policy_name(a.bx_policy)},
              {"phi", a.phi},
              {"tau", a.tau},
              {"batch", a.batch},
              {"eval_every", a.eval_every},
              {"mu_replay_bits", a.mu_replay_bits}};
}

json to_json(const ExperimentConfig& c) {
  const auto& l = c.algo.latency;
  return json{{"problem", to_json(c.problem)},
              {"algo", to_json(c.algo)},
              {"workers",
               {{"count", c.algo.workers},
                {"threaded", c.algo.threaded},
                {"latency",
                 {{"kind", latency_kind_name(l.kind)},
                  {"ticks", l.ticks},
                  {"lo", l.lo},
                  {"hi", l.hi},
                  {"p", l.p}}}}},
              {"target",
               {{"mode", c.target.mode},
                {"gap", c.target.gap},
                {"loss", c.target.loss},
                {"oracle_iters", c.target.oracle_iters}}},
              {"seed", c.algo.seed},
              {"repetitions", c.repetitions},
              {"output_dir", c.output_dir},
              {"grid", c.grid}};
}

ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return from_json(j);
}

void save(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

std::shared_ptr<const problems::CompositeProblem> build_problem(const ProblemSpec& spec,
                                                                bool accelerated) {
  std::shared_ptr<const problems::CompositeProblem> p;
  if (spec.kind == "quadratic") {
    std::vector<Vec> centers;
    for (double c : spec.centers) centers.push_back(Vec{c});
    p = std::make_shared<problems::QuadraticProblem>(std::move(centers), spec.curvature,
                                                     spec.lambda1);
  } else {
    problems::Dataset data;
    if (!spec.dataset.empty()) {
      data = problems::load_libsvm(spec.dataset);
    } else if (spec.kind == "mlp") {
      data = problems::synth_multiclass(spec.synth.n, spec.synth.d, spec.classes, spec.synth.seed,
                                        spec.spread);
    } else {
      data = problems::synth_dataset(spec.synth);
    }
    if (spec.kind == "mlp") {
      p = std::make_shared<problems::MlpProblem>(std::move(data), spec.hidden, spec.lambda2,
                                                spec.smoothness > 0.0 ? spec.smoothness : 1.0);
    } else {
      p = problems::logistic_problem(std::move(data), spec.lambda1, spec.lambda2, spec.smoothness);
    }
  }
  if (accelerated && spec.box_radius > 0.0) {
    p = std::make_shared<problems::BoxedProblem>(p, spec.box_radius);
  }
  return p;
}

Vec initial_point(const ProblemSpec& spec, const problems::CompositeProblem& problem,
                  std::uint64_t seed) {
  if (spec.kind == "mlp") {
    const auto* boxed = dynamic_cast<const problems::BoxedProblem*>(&problem);
    const auto* mlp = dynamic_cast<const problems::MlpProblem*>(&problem);
    if (boxed == nullptr && mlp != nullptr) return mlp->initial_point(seed);
    // Boxed MLP: rebuild the shape-only initialiser from an unboxed copy.
    const auto inner = build_problem(spec, false);
    return dynamic_cast<const problems::MlpProblem&>(*inner).initial_point(seed);
  }
  return Vec(problem.dim(), 0.0);
}

}  // namespace dqsim::config
