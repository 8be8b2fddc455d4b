/* Copyright 2026 The SepConv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Forward-pass timing. Each sample times a batch of forwards long enough to
// dominate clock resolution and is reported per forward. Variants are sampled
// round-robin so slow drift of the host hits all of them alike.

#ifndef SEPCONV_BENCH_HPP_
#define SEPCONV_BENCH_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sepconv/cost_model.hpp"
#include "sepconv/model_io.hpp"

namespace sepconv {

struct BenchOptions {
  std::size_t warmup = 5;
  std::size_t reps = 30;  // must be >= 10
  std::size_t threads = 1;
  bool single_precision = false;
  std::uint64_t seed = 1;
  double min_sample_ns = 2e6;  // lower bound on the duration of one timed batch

  void validate() const;
};

struct VariantTiming {
  std::string name;
  std::vector<double> samples_ns;  // per forward, warmups excluded
  std::size_t batch = 1;           // forwards per sample and thread
  double median_ns = 0;
  double q1_ns = 0;
  double q3_ns = 0;
  double iqr_ns = 0;
  std::uint64_t multiplications = 0;  // per forward, exact mode; 0 when not modelled
};

struct BenchReport {
  ConvShape shape;
  std::size_t warmup = 0;
  std::size_t reps = 0;
  std::size_t threads = 1;
  std::string precision;
  std::vector<VariantTiming> variants;
  CostReport classic_paper, separated_paper, classic_exact, separated_exact;
  double theoretical_ratio_paper = 0;  // classic / separated multiplications
  double theoretical_ratio_exact = 0;
  double measured_ratio = 0;    // separated median time / classic median time
  double measured_speedup = 0;  // 1 / measured_ratio

  const VariantTiming& variant(const std::string& name) const;
};

/// One benchmarked callable; it must perform exactly one forward per call.
struct BenchCase {
  std::string name;
  std::function<void()> run;
  std::uint64_t multiplications = 0;
};

/// Times every case under the protocol in options; fills samples and statistics only.
std::vector<VariantTiming> time_cases(std::vector<BenchCase> cases, const BenchOptions& options);

/// Classic vs separated conv layer at the given shape with random parameters and input.
BenchReport bench_layers(const ConvShape& shape, const BenchOptions& options);

/// As bench_layers at the model's first conv layer, plus whole-network variants.
/// A separated model is compared against its equivalent classic layer. If input is
/// given it must equal the model's input shape.
BenchReport bench_model(const ModelFile& model, std::optional<Shape3> input, const BenchOptions& options);

/// Median and quartiles by linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

void print_report(std::ostream& os, const BenchReport& report);

}  // namespace sepconv

#endif  // SEPCONV_BENCH_HPP_
