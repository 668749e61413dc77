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

#include "dqsim/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dqsim/linalg.hpp"
#include "dqsim/rng.hpp"

namespace dqsim::problems {

namespace {

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& what) {
  throw std::runtime_error(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

bool parse_double(std::string_view tok, double& out) {
  // from_chars for double is available in libstdc++ 11; it rejects a leading '+'.
  if (tok.size() > 1 && tok[0] == '+' && tok[1] != '-' && tok[1] != '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

void Dataset::push_row(std::span<const std::uint32_t> index, std::span<const double> value,
                       double label) {
  if (index.size() != value.size()) throw std::invalid_argument("push_row: size mismatch");
  cols.insert(cols.end(), index.begin(), index.end());
  vals.insert(vals.end(), value.begin(), value.end());
  row_ptr.push_back(cols.size());
  labels.push_back(label);
}

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset has no samples");
  if (row_ptr.size() != labels.size() + 1 || row_ptr.back() != cols.size() ||
      cols.size() != vals.size()) {
    throw std::invalid_argument("dataset storage is inconsistent");
  }
  for (auto c : cols) {
    if (c >= dim) throw std::invalid_argument("dataset feature index >= dimension");
  }
}

Dataset parse_libsvm(std::istream& in, std::string_view source, std::size_t dim_override) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;
    double label = 0.0;
    if (!parse_double(tok, label)) parse_fail(source, line_no, "bad label '" + tok + "'");
    idx.clear();
    val.clear();
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0) {
        parse_fail(source, line_no, "expected idx:val, got '" + tok + "'");
      }
      std::uint64_t one_based = 0;
      const auto* b = tok.data();
      auto [ptr, ec] = std::from_chars(b, b + colon, one_based);
      if (ec != std::errc() || ptr != b + colon || one_based == 0 ||
          one_based > std::numeric_limits<std::uint32_t>::max()) {
        parse_fail(source, line_no, "bad feature index in '" + tok + "'");
      }
      double v = 0.0;
      if (!parse_double(std::string_view(tok).substr(colon + 1), v)) {
        parse_fail(source, line_no, "bad feature value in '" + tok + "'");
      }
      idx.push_back(static_cast<std::uint32_t>(one_based - 1));
      val.push_back(v);
      max_index = std::max<std::size_t>(max_index, one_based);
    }
    data.push_row(idx, val, label);
  }
  if (data.labels.empty()) throw std::runtime_error(std::string(source) + ": no samples");
  if (dim_override != 0 && dim_override < max_index) {
    throw std::runtime_error(std::string(source) + ": feature index exceeds requested dimension");
  }
  data.dim = dim_override != 0 ? dim_override : max_index;
  if (data.dim == 0) data.dim = 1;
  return data;
}

Dataset load_libsvm(const std::filesystem::path& path, std::size_t dim_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return parse_libsvm(in, path.string(), dim_override);
}

void write_libsvm(const Dataset& data, std::ostream& out) {
  const auto old_precision = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < data.num_samples(); ++i) {
    out << data.labels[i];
    const auto row = data.row(i);
    for (std::size_t k = 0; k < row.index.size(); ++k) {
      out << ' ' << row.index[k] + 1 << ':' << row.value[k];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("synth_dataset: n and d must be >= 1");
  if (!(spec.flip_prob >= 0.0 && spec.flip_prob <= 1.0)) {
    throw std::invalid_argument("synth_dataset: flip_prob must lie in [0, 1]");
  }
  rng::Stream gen(spec.seed, rng::Purpose::kData, 0);
  Vec planted(spec.d);
  for (auto& w : planted) w = spec.margin_scale * gen.normal();

  Dataset data;
  data.dim = spec.d;
  const double feature_sd = 1.0 / std::sqrt(static_cast<double>(spec.d));
  std::vector<std::uint32_t> idx(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) idx[j] = static_cast<std::uint32_t>(j);
  Vec row(spec.d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double margin = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      row[j] = feature_sd * gen.normal();
      margin += row[j] * planted[j];
    }
    double label = margin >= 0.0 ? 1.0 : -1.0;
    if (gen.uniform() < spec.flip_prob) label = -label;
    data.push_row(idx, row, label);
  }
  return data;
}

Dataset synth_multiclass(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed,
                         double spread) {
  if (n == 0 || d == 0 || classes < 2) {
    throw std::invalid_argument("synth_multiclass: need n, d >= 1 and >= 2 classes");
  }
  rng::Stream gen(seed, rng::Purpose::kData, 1);
  std::vector<Vec> centres(classes, Vec(d));
  for (auto& c : centres) {
    for (auto& x : c) x = gen.normal();
  }
  Dataset data;
  data.dim = d;
  std::vector<std::uint32_t> idx(d);
  for (std::size_t j = 0; j < d; ++j) idx[j] = static_cast<std::uint32_t>(j);
  Vec row(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % classes;
    for (std::size_t j = 0; j < d; ++j) row[j] = centres[label][j] + spread * gen.normal();
    data.push_row(idx, row, static_cast<double>(label));
  }
  return data;
}

}  // namespace dqsim::problems
