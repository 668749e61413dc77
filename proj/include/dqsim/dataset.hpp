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
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace dqsim::problems {

/// Row-compressed sparse samples with one real label per row: +/-1 for
/// binary problems, a class index for multiclass ones.
struct Dataset {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  std::vector<double> labels;

  struct Row {
    std::span<const std::uint32_t> index;
    std::span<const double> value;
  };

  std::size_t num_samples() const { return labels.size(); }
  Row row(std::size_t i) const {
    const std::size_t b = row_ptr[i], e = row_ptr[i + 1];
    return {std::span(cols).subspan(b, e - b), std::span(vals).subspan(b, e - b)};
  }
  void push_row(std::span<const std::uint32_t> index, std::span<const double> value, double label);
  void validate() const;
};

/// Parses "label idx:val idx:val ..." lines with 1-based indices. Blank
/// lines are skipped. dim is the largest index unless `dim_override` is
/// nonzero. Errors name the offending line.
Dataset parse_libsvm(std::istream& in, std::string_view source = "<stream>",
                     std::size_t dim_override = 0);
Dataset load_libsvm(const std::filesystem::path& path, std::size_t dim_override = 0);
void write_libsvm(const Dataset& data, std::ostream& out);

struct SynthSpec {
  std::size_t n = 1000;
  std::size_t d = 50;
  std::uint64_t seed = 1;
  /// Probability that a label is flipped after labelling by the planted vector.
  double flip_prob = 0.0;
  /// Standard deviation of the planted margin <a, w*>.
  double margin_scale = 2.0;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

/// Dense N(0, 1/d) features, labels sign(<a, w*>) with flip noise.
Dataset synth_dataset(const SynthSpec& spec);

/// Gaussian blobs around `classes` random centres; labels 0..classes-1.
Dataset synth_multiclass(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed,
                         double spread = 1.0);

}  // namespace dqsim::problems
