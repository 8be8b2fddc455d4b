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

#ifndef SEPCONV_COST_MODEL_HPP_
#define SEPCONV_COST_MODEL_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace sepconv {

/// Filter K x K, image N x M (rows x cols), C input channels, L filters.
struct ConvShape {
  std::uint64_t k = 1;
  std::uint64_t n = 1;
  std::uint64_t m = 1;
  std::uint64_t c = 1;
  std::uint64_t l = 1;

  /// Throws DimensionError unless every field is >= 1 and k <= min(n, m).
  void validate() const;
};

enum class CountingMode {
  exact_valid,       // counts what a valid, stride-1 forward pass executes
  paper_asymptotic,  // every stage charged for all N*M pixels
};

std::string_view to_string(CountingMode mode);
CountingMode parse_counting_mode(std::string_view name);

struct CostReport {
  std::uint64_t multiplications = 0;
  std::uint64_t additions = 0;
  std::uint64_t weights = 0;
  std::uint64_t biases = 0;
  // Separated layer only: the K*C*L + K*L + L weight total as usually quoted, which
  // leaves out L*L - L of the fusion weights. Zero for the classic layer.
  std::uint64_t quoted_weights = 0;
  std::uint64_t output_h = 0;
  std::uint64_t output_w = 0;
  CountingMode mode = CountingMode::exact_valid;
};

CostReport classic_cost(const ConvShape& shape, CountingMode mode);
CostReport separated_cost(const ConvShape& shape, CountingMode mode);

/// classic multiplications / separated multiplications.
double speedup_ratio(const ConvShape& shape, CountingMode mode);

/// True iff the separated layer needs fewer multiplications per output pixel:
/// K^2 * C > K*C + K + L.
bool separation_pays_off(const ConvShape& shape);

}  // namespace sepconv

#endif  // SEPCONV_COST_MODEL_HPP_
