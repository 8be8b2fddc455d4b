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

#include "sepconv/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sepconv {

using detail::Overloaded;

std::int32_t qmax_for_bits(int bits) {
  if (bits < 2 || bits > 16) throw std::invalid_argument("fixed-point width must be 2..16 bits");
  return (std::int32_t{1} << (bits - 1)) - 1;
}

double symmetric_scale(std::span<const double> values, std::int32_t qmax) {
  double top = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("cannot quantize non-finite values");
    top = std::max(top, std::abs(v));
  }
  return top > 0.0 ? top / static_cast<double>(qmax) : 1.0;
}

std::int16_t quantize_value(double v, double scale, std::int32_t qmax) {
  // nearbyint follows the default rounding mode: ties to even.
  const double q = std::nearbyint(v / scale);
  const double lim = static_cast<double>(qmax);
  return static_cast<std::int16_t>(std::clamp(q, -lim, lim));
}

FixedTensor quantize_tensor_with_scale(std::span<const double> values, std::vector<std::size_t> shape, double scale,
                                       int bits) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("quantization scale must be positive");
  const std::int32_t qmax = qmax_for_bits(bits);
  FixedTensor t;
  t.shape = std::move(shape);
  t.scale = scale;
  t.values.reserve(values.size());
  for (double v : values) t.values.push_back(quantize_value(v, scale, qmax));
  return t;
}

FixedTensor quantize_tensor(std::span<const double> values, std::vector<std::size_t> shape, int bits) {
  return quantize_tensor_with_scale(values, std::move(shape), symmetric_scale(values, qmax_for_bits(bits)), bits);
}

std::vector<double> dequantize(const FixedTensor& t) {
  std::vector<double> out;
  out.reserve(t.values.size());
  for (auto q : t.values) out.push_back(static_cast<double>(q) * t.scale);
  return out;
}

std::int64_t checked_mac(std::int64_t acc, std::int64_t a, std::int64_t b) {
  std::int64_t prod = 0;
  std::int64_t sum = 0;
  if (__builtin_mul_overflow(a, b, &prod) || __builtin_add_overflow(acc, prod, &sum)) {
    throw AccumulatorOverflow("fixed-point accumulator overflow; calibration does not cover this input");
  }
  return sum;
}

namespace {

std::vector<std::int64_t> quantize_bias(std::span<const double> bias, double acc_scale) {
  std::vector<std::int64_t> out;
  out.reserve(bias.size());
  for (double b : bias) out.push_back(static_cast<std::int64_t>(std::nearbyint(b / acc_scale)));
  return out;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double scale_from_max(double m, std::int32_t qmax) { return m > 0.0 ? m / static_cast<double>(qmax) : 1.0; }

// Per-layer maxima collected while running the float network.
struct LayerRange {
  double vertical = 0.0;
  double horizontal = 0.0;
  double output = 0.0;
};

}  // namespace

QuantizedNetwork quantize_network(const Network& net, std::span<const Tensor3> calibration, QuantizeOptions options) {
  net.validate();
  if (calibration.empty()) throw std::invalid_argument("quantization needs at least one calibration image");
  const std::int32_t qmax = qmax_for_bits(options.bits);

  double input_max = 0.0;
  std::vector<LayerRange> ranges(net.layers.size());
  for (const auto& image : calibration) {
    if (image.shape() != net.input) throw DimensionError("calibration image shape does not match network input");
    input_max = std::max(input_max, max_abs(image.data()));
    Tensor3 x = image;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const auto& layer = net.layers[i];
      if (std::holds_alternative<SoftmaxLayer>(layer)) break;
      if (const auto* sep = std::get_if<SeparatedConvParams>(&layer)) {
        auto st = sep_forward_stages(x, *sep);
        ranges[i].vertical = std::max(ranges[i].vertical, max_abs(st.vertical.data()));
        ranges[i].horizontal = std::max(ranges[i].horizontal, max_abs(st.horizontal.data()));
        x = apply_activation(std::move(st.fused), sep->activation);
      } else {
        x = layer_forward(layer, x);
      }
      if (!all_finite(x.data())) throw std::invalid_argument("network produced non-finite values during calibration");
      ranges[i].output = std::max(ranges[i].output, max_abs(x.data()));
    }
  }

  QuantizedNetwork q;
  q.input = net.input;
  q.bits = options.bits;
  q.input_scale = scale_from_max(input_max, qmax);
  double in_scale = q.input_scale;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const double out_scale = scale_from_max(ranges[i].output, qmax);
    std::visit(Overloaded{
                   [&](const ClassicConvLayer& l) {
                     QuantizedClassicConv c;
                     c.kh = l.filters.kh;
                     c.kw = l.filters.kw;
                     c.in_channels = l.filters.in_channels;
                     c.count = l.filters.count;
                     c.weights = quantize_tensor(l.filters.weights, {c.count, c.kh, c.kw, c.in_channels}, options.bits);
                     c.bias = quantize_bias(l.bias, in_scale * c.weights.scale);
                     c.activation = l.activation;
                     c.in_scale = in_scale;
                     c.out_scale = out_scale;
                     q.layers.emplace_back(std::move(c));
                   },
                   [&](const SeparatedConvParams& p) {
                     QuantizedSeparatedConv s;
                     s.k = p.k;
                     s.in_channels = p.in_channels;
                     s.count = p.count;
                     s.vertical = quantize_tensor(p.vertical, {p.count, p.k, p.in_channels}, options.bits);
                     s.horizontal = quantize_tensor(p.horizontal, {p.count, p.k}, options.bits);
                     s.fusion = quantize_tensor(p.fusion, {p.count, p.count}, options.bits);
                     s.in_scale = in_scale;
                     s.vertical_scale = scale_from_max(ranges[i].vertical, qmax);
                     s.horizontal_scale = scale_from_max(ranges[i].horizontal, qmax);
                     s.bias = quantize_bias(p.bias, s.horizontal_scale * s.fusion.scale);
                     s.activation = p.activation;
                     s.out_scale = out_scale;
                     s.fusion_frozen = p.fusion_frozen;
                     q.layers.emplace_back(std::move(s));
                   },
                   [&](const DenseLayer& l) {
                     QuantizedDense d;
                     d.inputs = l.inputs;
                     d.outputs = l.outputs;
                     d.weights = quantize_tensor(l.weights, {l.outputs, l.inputs}, options.bits);
                     d.bias = quantize_bias(l.bias, in_scale * d.weights.scale);
                     d.in_scale = in_scale;
                     d.out_scale = out_scale;
                     q.layers.emplace_back(std::move(d));
                   },
                   [&](const SoftmaxLayer& s) { q.layers.emplace_back(s); },
               },
               net.layers[i]);
    in_scale = out_scale;
  }
  return q;
}

namespace {

struct FixedImage {
  Shape3 shape;
  std::vector<std::int16_t> values;  // row-major, channel-minor

  std::int16_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * shape.width + x) * shape.channels + c];
  }
};

// Dequantize the accumulator, apply the activation, requantize to the next scale.
std::int16_t requantize(std::int64_t acc, double acc_scale, Activation act, double out_scale, std::int32_t qmax,
                        double* pre) {
  const double real = static_cast<double>(acc) * acc_scale;
  if (pre) *pre = real;
  return quantize_value(activate(real, act), out_scale, qmax);
}

FixedImage classic_fixed(const QuantizedClassicConv& l, const FixedImage& in, std::int32_t qmax, std::vector<double>& pre) {
  if (in.shape.channels != l.in_channels || l.kh > in.shape.height || l.kw > in.shape.width) {
    throw DimensionError("fixed-point conv: input shape mismatch");
  }
  FixedImage out{{in.shape.height - l.kh + 1, in.shape.width - l.kw + 1, l.count}, {}};
  out.values.resize(out.shape.size());
  pre.resize(out.shape.size());
  const double acc_scale = l.in_scale * l.weights.scale;
  std::size_t o = 0;
  for (std::size_t y = 0; y < out.shape.height; ++y) {
    for (std::size_t x = 0; x < out.shape.width; ++x) {
      for (std::size_t f = 0; f < l.count; ++f, ++o) {
        std::int64_t acc = l.bias[f];
        const std::int16_t* w = l.weights.values.data() + f * l.kh * l.kw * l.in_channels;
        for (std::size_t dy = 0; dy < l.kh; ++dy) {
          for (std::size_t dx = 0; dx < l.kw; ++dx) {
            for (std::size_t c = 0; c < l.in_channels; ++c) acc = checked_mac(acc, in.at(y + dy, x + dx, c), *w++);
          }
        }
        out.values[o] = requantize(acc, acc_scale, l.activation, l.out_scale, qmax, &pre[o]);
      }
    }
  }
  return out;
}

FixedImage separated_fixed(const QuantizedSeparatedConv& l, const FixedImage& in, std::int32_t qmax,
                           std::vector<double>& pre) {
  const std::size_t K = l.k, C = l.in_channels, L = l.count;
  if (in.shape.channels != C || K > in.shape.height || K > in.shape.width) {
    throw DimensionError("fixed-point separated conv: input shape mismatch");
  }
  const Shape3 v_shape{in.shape.height - K + 1, in.shape.width, L};
  const Shape3 out_shape{in.shape.height - K + 1, in.shape.width - K + 1, L};

  FixedImage s1{v_shape, std::vector<std::int16_t>(v_shape.size())};
  const double s1_acc = l.in_scale * l.vertical.scale;
  for (std::size_t y = 0; y < v_shape.height; ++y) {
    for (std::size_t x = 0; x < v_shape.width; ++x) {
      for (std::size_t j = 0; j < L; ++j) {
        std::int64_t acc = 0;
        for (std::size_t dy = 0; dy < K; ++dy) {
          for (std::size_t c = 0; c < C; ++c) {
            acc = checked_mac(acc, in.at(y + dy, x, c), l.vertical.values[(j * K + dy) * C + c]);
          }
        }
        s1.values[(y * v_shape.width + x) * L + j] =
            requantize(acc, s1_acc, Activation::identity, l.vertical_scale, qmax, nullptr);
      }
    }
  }

  FixedImage s2{out_shape, std::vector<std::int16_t>(out_shape.size())};
  const double s2_acc = l.vertical_scale * l.horizontal.scale;
  for (std::size_t y = 0; y < out_shape.height; ++y) {
    for (std::size_t x = 0; x < out_shape.width; ++x) {
      for (std::size_t g = 0; g < L; ++g) {
        std::int64_t acc = 0;
        for (std::size_t t = 0; t < K; ++t) acc = checked_mac(acc, s1.at(y, x + t, g), l.horizontal.values[g * K + t]);
        s2.values[(y * out_shape.width + x) * L + g] =
            requantize(acc, s2_acc, Activation::identity, l.horizontal_scale, qmax, nullptr);
      }
    }
  }

  FixedImage out{out_shape, std::vector<std::int16_t>(out_shape.size())};
  pre.resize(out_shape.size());
  const double s3_acc = l.horizontal_scale * l.fusion.scale;
  for (std::size_t p = 0; p < out_shape.height * out_shape.width; ++p) {
    for (std::size_t f = 0; f < L; ++f) {
      std::int64_t acc = l.bias[f];
      for (std::size_t j = 0; j < L; ++j) acc = checked_mac(acc, s2.values[p * L + j], l.fusion.values[f * L + j]);
      out.values[p * L + f] = requantize(acc, s3_acc, l.activation, l.out_scale, qmax, &pre[p * L + f]);
    }
  }
  return out;
}

FixedImage dense_fixed(const QuantizedDense& l, const FixedImage& in, std::int32_t qmax, std::vector<double>& pre) {
  if (in.values.size() != l.inputs) throw DimensionError("fixed-point dense: input size mismatch");
  FixedImage out{{1, 1, l.outputs}, std::vector<std::int16_t>(l.outputs)};
  pre.resize(l.outputs);
  const double acc_scale = l.in_scale * l.weights.scale;
  for (std::size_t o = 0; o < l.outputs; ++o) {
    std::int64_t acc = l.bias[o];
    const std::int16_t* w = l.weights.values.data() + o * l.inputs;
    for (std::size_t i = 0; i < l.inputs; ++i) acc = checked_mac(acc, in.values[i], w[i]);
    out.values[o] = requantize(acc, acc_scale, Activation::identity, l.out_scale, qmax, &pre[o]);
  }
  return out;
}

}  // namespace

FixedForwardResult forward_fixed(const QuantizedNetwork& qnet, const Tensor3& image) {
  if (image.shape() != qnet.input) throw DimensionError("image shape does not match quantized network input");
  const std::int32_t qmax = qmax_for_bits(qnet.bits);
  FixedImage cur{image.shape(), {}};
  cur.values.reserve(image.size());
  for (double v : image.data()) cur.values.push_back(quantize_value(v, qnet.input_scale, qmax));

  FixedForwardResult r;
  Activation last = Activation::identity;
  for (const auto& layer : qnet.layers) {
    if (std::holds_alternative<SoftmaxLayer>(layer)) break;
    std::vector<double> pre;
    cur = std::visit(Overloaded{
                         [&](const QuantizedClassicConv& l) {
                           last = l.activation;
                           return classic_fixed(l, cur, qmax, pre);
                         },
                         [&](const QuantizedSeparatedConv& l) {
                           last = l.activation;
                           return separated_fixed(l, cur, qmax, pre);
                         },
                         [&](const QuantizedDense& l) {
                           last = Activation::identity;
                           return dense_fixed(l, cur, qmax, pre);
                         },
                         [&](const SoftmaxLayer&) { return cur; },
                     },
                     layer);
    r.preactivations.push_back(std::move(pre));
  }
  if (r.preactivations.empty()) throw DimensionError("quantized network has no computing layers");
  // Logits come straight from the last accumulator, without a final requantization.
  r.logits = r.preactivations.back();
  for (double& v : r.logits) v = activate(v, last);
  r.prediction = argmax(r.logits);
  return r;
}

double prediction_agreement(const Network& net, const QuantizedNetwork& qnet, const Dataset& data) {
  if (data.empty()) return 1.0;
  std::size_t same = 0;
  for (const auto& img : data.images) {
    if (predict(net, img) == forward_fixed(qnet, img).prediction) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(data.size());
}

double evaluate_error_rate(const QuantizedNetwork& qnet, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (forward_fixed(qnet, data.images[i]).prediction != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace sepconv
