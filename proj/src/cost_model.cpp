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

#include "sepconv/cost_model.hpp"

#include <string>

#include "sepconv/tensor.hpp"

namespace sepconv {

void ConvShape::validate() const {
  if (k == 0 || n == 0 || m == 0 || c == 0 || l == 0) {
    throw DimensionError("conv shape fields must all be >= 1");
  }
  if (k > n || k > m) {
    throw DimensionError("filter size " + std::to_string(k) + " exceeds image " + std::to_string(n) + "x" +
                         std::to_string(m));
  }
}

std::string_view to_string(CountingMode mode) {
  return mode == CountingMode::exact_valid ? "exact" : "paper";
}

CountingMode parse_counting_mode(std::string_view name) {
  if (name == "exact" || name == "exact-valid") return CountingMode::exact_valid;
  if (name == "paper" || name == "paper-asymptotic") return CountingMode::paper_asymptotic;
  throw std::invalid_argument("unknown counting mode '" + std::string(name) + "'");
}

namespace {

struct Extent {
  std::uint64_t out_h;
  std::uint64_t out_w;
  std::uint64_t vertical_rows;  // rows of the K x 1 stage output
};

Extent extent_for(const ConvShape& s, CountingMode mode) {
  if (mode == CountingMode::paper_asymptotic) return {s.n, s.m, s.n};
  return {s.n - s.k + 1, s.m - s.k + 1, s.n - s.k + 1};
}

}  // namespace

CostReport classic_cost(const ConvShape& s, CountingMode mode) {
  s.validate();
  const Extent e = extent_for(s, mode);
  const std::uint64_t pixels = e.out_h * e.out_w;
  const std::uint64_t taps = s.k * s.k * s.c;
  CostReport r;
  r.mode = mode;
  r.output_h = e.out_h;
  r.output_w = e.out_w;
  r.multiplications = pixels * s.l * taps;
  // taps products plus the bias: taps additions per output value.
  r.additions = pixels * s.l * taps;
  r.weights = taps * s.l;
  r.biases = s.l;
  return r;
}

CostReport separated_cost(const ConvShape& s, CountingMode mode) {
  s.validate();
  const Extent e = extent_for(s, mode);
  const std::uint64_t pixels = e.out_h * e.out_w;
  const std::uint64_t vertical_px = e.vertical_rows * s.m;
  CostReport r;
  r.mode = mode;
  r.output_h = e.out_h;
  r.output_w = e.out_w;
  const std::uint64_t mul_vertical = vertical_px * s.l * s.k * s.c;
  const std::uint64_t mul_horizontal = pixels * s.l * s.k;
  const std::uint64_t mul_fusion = pixels * s.l * s.l;
  r.multiplications = mul_vertical + mul_horizontal + mul_fusion;
  const std::uint64_t add_vertical = vertical_px * s.l * (s.k * s.c - 1);
  const std::uint64_t add_horizontal = pixels * s.l * (s.k - 1);
  const std::uint64_t add_fusion = pixels * s.l * s.l;  // L - 1 sums plus the bias
  r.additions = add_vertical + add_horizontal + add_fusion;
  r.weights = s.k * s.c * s.l + s.k * s.l + s.l * s.l;
  r.quoted_weights = s.k * s.c * s.l + s.k * s.l + s.l;
  r.biases = s.l;
  return r;
}

double speedup_ratio(const ConvShape& shape, CountingMode mode) {
  return static_cast<double>(classic_cost(shape, mode).multiplications) /
         static_cast<double>(separated_cost(shape, mode).multiplications);
}

bool separation_pays_off(const ConvShape& s) {
  s.validate();
  return s.k * s.k * s.c > s.k * s.c + s.k + s.l;
}

}  // namespace sepconv
