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

#ifndef SEPCONV_NETWORK_HPP_
#define SEPCONV_NETWORK_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sepconv/conv_classic.hpp"
#include "sepconv/conv_separated.hpp"
#include "sepconv/tensor.hpp"

namespace sepconv {

namespace detail {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace detail

/// Fully connected layer over the flattened input: y = W x + b, W is outputs x inputs.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : inputs(in), outputs(out), weights(in * out), bias(out) {}
  void validate() const;
};

struct SoftmaxLayer {};

using Layer = std::variant<ClassicConvLayer, SeparatedConvParams, DenseLayer, SoftmaxLayer>;

struct Network {
  Shape3 input;
  std::vector<Layer> layers;

  /// Checks parameter lengths, adjacent shapes and the single terminal softmax.
  void validate() const;
  std::size_t class_count() const;
  /// Shape entering each layer, plus the final output shape at the back.
  std::vector<Shape3> shapes() const;
};

enum class Structure : std::uint8_t { classic, separated, separated_nofuse };

std::string_view to_string(Structure s);
Structure parse_structure(std::string_view name);

struct Topology {
  Shape3 input{14, 20, 1};
  std::size_t filters = 8;
  std::size_t kernel = 5;
  std::size_t classes = 10;
  Activation activation = Activation::rectifier;
};

/// conv(filters, kernel) -> activation -> dense(classes) -> softmax. Weights are drawn
/// uniformly from [-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases start at zero.
/// separated_nofuse pins the fusion matrix to identity.
Network make_network(Structure structure, const Topology& topology, std::uint64_t seed);

/// Output of the layer before the softmax.
std::vector<double> network_logits(const Network& net, const Tensor3& image);
std::size_t predict(const Network& net, const Tensor3& image);

std::vector<double> softmax(std::span<const double> logits);
/// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

/// Forward through one non-softmax layer (activation included).
Tensor3 layer_forward(const Layer& layer, const Tensor3& input);

}  // namespace sepconv

#endif  // SEPCONV_NETWORK_HPP_
