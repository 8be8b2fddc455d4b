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

// 16-bit fixed-point inference.
//
// Every tensor carries one symmetric scale: value = integer * scale, with
// scale = max|value| / qmax (qmax = 32767 for 16 bits) and round-to-nearest-even.
// Weights take their scale from themselves, activations from the maxima observed
// while running the float network over calibration images. Products are summed in
// 64-bit accumulators; biases are stored at accumulator scale. At every layer
// boundary (and between the stages of a separated layer) the accumulator is
// rescaled to the next activation scale and saturated to 16 bits.

#ifndef SEPCONV_QUANTIZER_HPP_
#define SEPCONV_QUANTIZER_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "sepconv/dataset.hpp"
#include "sepconv/network.hpp"

namespace sepconv {

class AccumulatorOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

struct FixedTensor {
  std::vector<std::size_t> shape;
  std::vector<std::int16_t> values;
  double scale = 1.0;

  std::size_t size() const { return values.size(); }
};

/// Largest magnitude representable with the given bit width (2..16).
std::int32_t qmax_for_bits(int bits);

/// scale = max|v| / qmax, or 1 when every value is zero.
double symmetric_scale(std::span<const double> values, std::int32_t qmax);

/// Round-to-nearest-even of v / scale, saturated to [-qmax, qmax].
std::int16_t quantize_value(double v, double scale, std::int32_t qmax);

FixedTensor quantize_tensor(std::span<const double> values, std::vector<std::size_t> shape, int bits = 16);
FixedTensor quantize_tensor_with_scale(std::span<const double> values, std::vector<std::size_t> shape, double scale,
                                       int bits = 16);
std::vector<double> dequantize(const FixedTensor& t);

/// acc + a * b, throwing AccumulatorOverflow when the 64-bit result does not fit.
std::int64_t checked_mac(std::int64_t acc, std::int64_t a, std::int64_t b);

struct QuantizedClassicConv {
  std::size_t kh = 0, kw = 0, in_channels = 0, count = 0;
  FixedTensor weights;             // (l, dy, dx, c)
  std::vector<std::int64_t> bias;  // at scale in_scale * weights.scale
  Activation activation = Activation::rectifier;
  double in_scale = 1.0;
  double out_scale = 1.0;
};

struct QuantizedSeparatedConv {
  std::size_t k = 0, in_channels = 0, count = 0;
  FixedTensor vertical;    // (l, dy, c)
  FixedTensor horizontal;  // (g, dx)
  FixedTensor fusion;      // (l, j)
  std::vector<std::int64_t> bias;  // at scale horizontal_scale * fusion.scale
  Activation activation = Activation::rectifier;
  double in_scale = 1.0;
  double vertical_scale = 1.0;    // activation scale after the K x 1 stage
  double horizontal_scale = 1.0;  // activation scale after the 1 x K stage
  double out_scale = 1.0;
  bool fusion_frozen = false;
};

struct QuantizedDense {
  std::size_t inputs = 0, outputs = 0;
  FixedTensor weights;             // (out, in)
  std::vector<std::int64_t> bias;  // at scale in_scale * weights.scale
  double in_scale = 1.0;
  double out_scale = 1.0;  // only used when another layer follows
};

using QuantizedLayer = std::variant<QuantizedClassicConv, QuantizedSeparatedConv, QuantizedDense, SoftmaxLayer>;

struct QuantizedNetwork {
  Shape3 input;
  int bits = 16;
  double input_scale = 1.0;
  std::vector<QuantizedLayer> layers;
};

struct QuantizeOptions {
  int bits = 16;
};

/// Requires a valid network and at least one calibration image of the input shape.
QuantizedNetwork quantize_network(const Network& net, std::span<const Tensor3> calibration,
                                  QuantizeOptions options = {});

struct FixedForwardResult {
  std::vector<double> logits;  // dequantized
  std::size_t prediction = 0;
  // Dequantized pre-activation accumulator of every non-softmax layer, in layer order.
  std::vector<std::vector<double>> preactivations;
};

/// Integer-only arithmetic except for the rescale multipliers and tanh.
FixedForwardResult forward_fixed(const QuantizedNetwork& qnet, const Tensor3& image);

/// Fraction of samples on which the float and fixed-point argmax agree.
double prediction_agreement(const Network& net, const QuantizedNetwork& qnet, const Dataset& data);

/// Error rate of the fixed-point network.
double evaluate_error_rate(const QuantizedNetwork& qnet, const Dataset& data);

}  // namespace sepconv

#endif  // SEPCONV_QUANTIZER_HPP_
