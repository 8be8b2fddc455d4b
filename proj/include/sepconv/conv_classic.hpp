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

#ifndef SEPCONV_CONV_CLASSIC_HPP_
#define SEPCONV_CONV_CLASSIC_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sepconv/tensor.hpp"

namespace sepconv {

enum class Activation : std::uint8_t { identity = 0, rectifier = 1, tanh = 2 };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::rectifier:
      return "rectifier";
    case Activation::tanh:
      return "tanh";
  }
  return "unknown";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "rectifier" || name == "relu") return Activation::rectifier;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

template <typename T>
T activate(const T& v, Activation kind) {
  using std::tanh;
  switch (kind) {
    case Activation::rectifier:
      return v < T{} ? T{} : v;
    case Activation::tanh:
      return tanh(v);
    case Activation::identity:
      break;
  }
  return v;
}

/// Derivative expressed through the pre-activation value. The rectifier kink counts as 0.
inline double activation_derivative(double pre, Activation kind) {
  switch (kind) {
    case Activation::rectifier:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::identity:
      break;
  }
  return 1.0;
}

template <typename T>
BasicTensor3<T> apply_activation(BasicTensor3<T> x, Activation kind) {
  if (kind == Activation::identity) return x;
  for (auto& v : x.data()) v = activate(v, kind);
  return x;
}

/// L multichannel filters, weights indexed (l, dy, dx, c) with c fastest.
template <typename T>
struct BasicFilterBank {
  std::size_t kh = 0;
  std::size_t kw = 0;
  std::size_t in_channels = 0;
  std::size_t count = 0;
  std::vector<T> weights;

  BasicFilterBank() = default;
  BasicFilterBank(std::size_t kh_, std::size_t kw_, std::size_t in_channels_, std::size_t count_)
      : kh(kh_), kw(kw_), in_channels(in_channels_), count(count_),
        weights(kh_ * kw_ * in_channels_ * count_, T{}) {}

  std::size_t filter_size() const { return kh * kw * in_channels; }
  std::size_t index(std::size_t l, std::size_t dy, std::size_t dx, std::size_t c) const {
    return ((l * kh + dy) * kw + dx) * in_channels + c;
  }
  T& at(std::size_t l, std::size_t dy, std::size_t dx, std::size_t c) { return weights[index(l, dy, dx, c)]; }
  const T& at(std::size_t l, std::size_t dy, std::size_t dx, std::size_t c) const {
    return weights[index(l, dy, dx, c)];
  }

  void validate() const {
    if (kh == 0 || kw == 0 || in_channels == 0 || count == 0) {
      throw DimensionError("filter bank dimensions must be positive");
    }
    if (weights.size() != count * filter_size()) {
      throw DimensionError("filter bank holds " + std::to_string(weights.size()) + " weights, expected " +
                           std::to_string(count * filter_size()));
    }
  }
};

template <typename T>
struct BasicClassicConvLayer {
  BasicFilterBank<T> filters;
  std::vector<T> bias;
  Activation activation = Activation::rectifier;

  void validate() const {
    filters.validate();
    if (bias.size() != filters.count) {
      throw DimensionError("bias length " + std::to_string(bias.size()) + " does not match filter count " +
                           std::to_string(filters.count));
    }
  }

  Shape3 output_shape(const Shape3& in) const {
    if (in.channels != filters.in_channels) {
      throw DimensionError("image has " + std::to_string(in.channels) + " channels, layer expects " +
                           std::to_string(filters.in_channels));
    }
    if (filters.kh > in.height || filters.kw > in.width) {
      throw DimensionError("filter " + std::to_string(filters.kh) + "x" + std::to_string(filters.kw) +
                           " larger than image " + to_string(in));
    }
    return {in.height - filters.kh + 1, in.width - filters.kw + 1, filters.count};
  }
};

using FilterBank = BasicFilterBank<double>;
using ClassicConvLayer = BasicClassicConvLayer<double>;

/// Cross-correlation straight from the per-pixel sum:
/// O(y, x, l) = bias_l + sum_{dy, dx, c} I(y + dy, x + dx, c) * w_l(dy, dx, c).
template <typename T>
BasicTensor3<T> conv2d_direct(const BasicTensor3<T>& image, const BasicClassicConvLayer<T>& layer,
                              bool pre_activation = false) {
  layer.validate();
  const Shape3 out_shape = layer.output_shape(image.shape());
  const auto& f = layer.filters;
  BasicTensor3<T> out(out_shape);
  for (std::size_t y = 0; y < out_shape.height; ++y) {
    for (std::size_t x = 0; x < out_shape.width; ++x) {
      for (std::size_t l = 0; l < f.count; ++l) {
        T acc = layer.bias[l];
        for (std::size_t dy = 0; dy < f.kh; ++dy) {
          for (std::size_t dx = 0; dx < f.kw; ++dx) {
            for (std::size_t c = 0; c < f.in_channels; ++c) {
              acc += image(y + dy, x + dx, c) * f.at(l, dy, dx, c);
            }
          }
        }
        out(y, x, l) = acc;
      }
    }
  }
  return pre_activation ? out : apply_activation(std::move(out), layer.activation);
}

/// Weights as an L x (kh*kw*C) matrix; the column order matches im2col_lower.
template <typename T>
BasicMatrix2<T> filter_matrix(const BasicFilterBank<T>& f) {
  return BasicMatrix2<T>(f.count, f.filter_size(), f.weights);
}

/// Matrix form: im2col(I) * W^T, then bias and activation.
template <typename T>
BasicTensor3<T> conv2d_matrix(const BasicTensor3<T>& image, const BasicClassicConvLayer<T>& layer,
                              bool pre_activation = false) {
  layer.validate();
  const Shape3 out_shape = layer.output_shape(image.shape());
  const auto cols = im2col_lower(image, layer.filters.kh, layer.filters.kw);
  auto product = matmul(cols, transpose(filter_matrix(layer.filters)));
  for (std::size_t p = 0; p < product.rows(); ++p) {
    auto row = product.row(p);
    for (std::size_t l = 0; l < row.size(); ++l) row[l] += layer.bias[l];
  }
  auto out = to_tensor(std::move(product), out_shape);
  return pre_activation ? out : apply_activation(std::move(out), layer.activation);
}

}  // namespace sepconv

#endif  // SEPCONV_CONV_CLASSIC_HPP_
