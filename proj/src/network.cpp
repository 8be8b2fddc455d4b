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

#include "sepconv/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sepconv/random.hpp"

namespace sepconv {

void DenseLayer::validate() const {
  if (inputs == 0 || outputs == 0) throw DimensionError("dense layer dimensions must be positive");
  if (weights.size() != inputs * outputs || bias.size() != outputs) {
    throw DimensionError("dense layer parameter lengths do not match " + std::to_string(outputs) + "x" +
                         std::to_string(inputs));
  }
}

namespace {

using detail::Overloaded;

Shape3 layer_output_shape(const Layer& layer, const Shape3& in) {
  return std::visit(Overloaded{
                        [&](const ClassicConvLayer& l) {
                          l.validate();
                          return l.output_shape(in);
                        },
                        [&](const SeparatedConvParams& l) {
                          l.validate();
                          return l.output_shape(in);
                        },
                        [&](const DenseLayer& l) {
                          l.validate();
                          if (in.size() != l.inputs) {
                            throw DimensionError("dense layer expects " + std::to_string(l.inputs) +
                                                 " inputs, receives " + to_string(in));
                          }
                          return Shape3{1, 1, l.outputs};
                        },
                        [&](const SoftmaxLayer&) { return in; },
                    },
                    layer);
}

void fill_uniform(std::span<double> values, double bound, Rng& rng) {
  for (double& v : values) v = uniform(rng, -bound, bound);
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::vector<Shape3> Network::shapes() const {
  std::vector<Shape3> out;
  out.reserve(layers.size() + 1);
  Shape3 s = input;
  out.push_back(s);
  for (const auto& layer : layers) {
    s = layer_output_shape(layer, s);
    out.push_back(s);
  }
  return out;
}

void Network::validate() const {
  if (input.size() == 0) throw DimensionError("network input shape must be positive");
  if (layers.empty() || !std::holds_alternative<SoftmaxLayer>(layers.back())) {
    throw DimensionError("network must end with a softmax layer");
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (std::holds_alternative<SoftmaxLayer>(layers[i])) {
      throw DimensionError("softmax is only allowed as the last layer");
    }
  }
  (void)shapes();
}

std::size_t Network::class_count() const { return shapes().back().size(); }

std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::classic:
      return "classic";
    case Structure::separated:
      return "separated";
    case Structure::separated_nofuse:
      return "separated-nofuse";
  }
  return "unknown";
}

Structure parse_structure(std::string_view name) {
  if (name == "classic") return Structure::classic;
  if (name == "separated") return Structure::separated;
  if (name == "separated-nofuse") return Structure::separated_nofuse;
  throw std::invalid_argument("unknown structure '" + std::string(name) + "'");
}

Network make_network(Structure structure, const Topology& t, std::uint64_t seed) {
  Rng rng(seed);
  Network net;
  net.input = t.input;
  const std::size_t K = t.kernel;
  const std::size_t C = t.input.channels;
  const std::size_t L = t.filters;
  if (structure == Structure::classic) {
    ClassicConvLayer conv;
    conv.filters = FilterBank(K, K, C, L);
    fill_uniform(conv.filters.weights, glorot(K * K * C, K * K * L), rng);
    conv.bias.assign(L, 0.0);
    conv.activation = t.activation;
    net.layers.emplace_back(std::move(conv));
  } else {
    SeparatedConvParams sep(K, C, L);
    fill_uniform(sep.vertical, glorot(K * C, K * L), rng);
    fill_uniform(sep.horizontal, glorot(K, K), rng);
    if (structure == Structure::separated_nofuse) {
      for (std::size_t l = 0; l < L; ++l) sep.a(l, l) = 1.0;
      sep.fusion_frozen = true;
    } else {
      fill_uniform(sep.fusion, glorot(L, L), rng);
    }
    sep.activation = t.activation;
    net.layers.emplace_back(std::move(sep));
  }
  const Shape3 conv_out = layer_output_shape(net.layers.back(), t.input);
  DenseLayer dense(conv_out.size(), t.classes);
  fill_uniform(dense.weights, glorot(dense.inputs, dense.outputs), rng);
  net.layers.emplace_back(std::move(dense));
  net.layers.emplace_back(SoftmaxLayer{});
  net.validate();
  return net;
}

Tensor3 layer_forward(const Layer& layer, const Tensor3& input) {
  return std::visit(detail::Overloaded{
                        [&](const ClassicConvLayer& l) { return conv2d_matrix(input, l); },
                        [&](const SeparatedConvParams& l) { return sep_forward(input, l); },
                        [&](const DenseLayer& l) {
                          l.validate();
                          if (input.size() != l.inputs) {
                            throw DimensionError("dense layer expects " + std::to_string(l.inputs) + " inputs");
                          }
                          Tensor3 out(1, 1, l.outputs);
                          const auto x = input.data();
                          for (std::size_t o = 0; o < l.outputs; ++o) {
                            double acc = l.bias[o];
                            const double* w = l.weights.data() + o * l.inputs;
                            for (std::size_t i = 0; i < l.inputs; ++i) acc += w[i] * x[i];
                            out(0, 0, o) = acc;
                          }
                          return out;
                        },
                        [&](const SoftmaxLayer&) {
                          return Tensor3(input.shape(), softmax(input.data()));
                        },
                    },
                    layer);
}

std::vector<double> network_logits(const Network& net, const Tensor3& image) {
  if (image.shape() != net.input) {
    throw DimensionError("image shape " + to_string(image.shape()) + " does not match network input " +
                         to_string(net.input));
  }
  Tensor3 x = image;
  for (const auto& layer : net.layers) {
    if (std::holds_alternative<SoftmaxLayer>(layer)) break;
    x = layer_forward(layer, x);
  }
  return std::move(x).release();
}

std::size_t predict(const Network& net, const Tensor3& image) { return argmax(network_logits(net, image)); }

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace sepconv
