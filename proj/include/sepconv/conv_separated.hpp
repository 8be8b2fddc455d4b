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

// Separated convolution layer: L vertical K x 1 filters over all C input channels,
// one horizontal 1 x K filter per resulting channel (L groups of one channel),
// then an L x L pointwise fusion with bias, then the activation.
//
// The pre-activation output equals a classical K x K convolution whose filters are
//   w_l(dy, dx, c) = sum_j A[l, j] * vertical[j, dy, c] * horizontal[j, dx],
// i.e. each filter is a linear combination of L separable filters.

#ifndef SEPCONV_CONV_SEPARATED_HPP_
#define SEPCONV_CONV_SEPARATED_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sepconv/conv_classic.hpp"
#include "sepconv/tensor.hpp"

namespace sepconv {

template <typename T>
struct BasicSeparatedConvParams {
  std::size_t k = 0;
  std::size_t in_channels = 0;
  std::size_t count = 0;
  std::vector<T> vertical;    // (l, dy, c)
  std::vector<T> horizontal;  // (g, dx)
  std::vector<T> fusion;      // (l, j), row l mixes the L horizontal outputs
  std::vector<T> bias;
  Activation activation = Activation::rectifier;
  // Pins the fusion matrix during training (the "no fusing" variant keeps it at identity).
  bool fusion_frozen = false;

  BasicSeparatedConvParams() = default;
  BasicSeparatedConvParams(std::size_t k_, std::size_t in_channels_, std::size_t count_)
      : k(k_), in_channels(in_channels_), count(count_),
        vertical(count_ * k_ * in_channels_, T{}), horizontal(count_ * k_, T{}),
        fusion(count_ * count_, T{}), bias(count_, T{}) {}

  T& v(std::size_t l, std::size_t dy, std::size_t c) { return vertical[(l * k + dy) * in_channels + c]; }
  const T& v(std::size_t l, std::size_t dy, std::size_t c) const {
    return vertical[(l * k + dy) * in_channels + c];
  }
  T& h(std::size_t g, std::size_t dx) { return horizontal[g * k + dx]; }
  const T& h(std::size_t g, std::size_t dx) const { return horizontal[g * k + dx]; }
  T& a(std::size_t l, std::size_t j) { return fusion[l * count + j]; }
  const T& a(std::size_t l, std::size_t j) const { return fusion[l * count + j]; }

  /// K*C*L + K*L + L*L; biases excluded.
  std::size_t weight_count() const { return k * in_channels * count + k * count + count * count; }

  void validate() const {
    if (k == 0 || in_channels == 0 || count == 0) {
      throw DimensionError("separated layer dimensions must be positive");
    }
    if (vertical.size() != count * k * in_channels || horizontal.size() != count * k ||
        fusion.size() != count * count || bias.size() != count) {
      throw DimensionError("separated layer parameter lengths do not match k=" + std::to_string(k) +
                           " C=" + std::to_string(in_channels) + " L=" + std::to_string(count));
    }
  }

  Shape3 output_shape(const Shape3& in) const {
    if (in.channels != in_channels) {
      throw DimensionError("image has " + std::to_string(in.channels) + " channels, layer expects " +
                           std::to_string(in_channels));
    }
    if (k > in.height || k > in.width) {
      throw DimensionError("filter length " + std::to_string(k) + " larger than image " + to_string(in));
    }
    return {in.height - k + 1, in.width - k + 1, count};
  }
};

using SeparatedConvParams = BasicSeparatedConvParams<double>;

/// G groups, each with F filters of K taps spanning channels_per_group channels.
struct GroupedConvSpec {
  std::size_t groups = 1;
  std::size_t filters_per_group = 1;
  std::size_t filter_len = 1;
  std::size_t channels_per_group = 1;

  void validate() const {
    if (groups == 0 || filters_per_group == 0 || filter_len == 0 || channels_per_group == 0) {
      throw DimensionError("grouped convolution counts must be >= 1");
    }
  }
  std::size_t signal_size(std::size_t length) const { return length * channels_per_group * groups; }
  std::size_t weight_size() const { return filters_per_group * filter_len * channels_per_group * groups; }
  std::size_t output_size(std::size_t length) const {
    return filters_per_group * applications(length) * groups;
  }
  std::size_t applications(std::size_t length) const { return length - filter_len + 1; }
};

namespace detail {

inline void check_grouped(std::size_t signal_len, std::size_t length, const GroupedConvSpec& spec,
                          std::size_t weight_len) {
  spec.validate();
  if (length < spec.filter_len) {
    throw DimensionError("grouped conv: signal length " + std::to_string(length) + " shorter than " +
                         std::to_string(spec.filter_len) + " taps");
  }
  if (signal_len != spec.signal_size(length)) {
    throw DimensionError("grouped conv: signal holds " + std::to_string(signal_len) + " values, expected " +
                         std::to_string(spec.signal_size(length)));
  }
  if (weight_len != spec.weight_size()) {
    throw DimensionError("grouped conv: " + std::to_string(weight_len) + " weights, expected " +
                         std::to_string(spec.weight_size()));
  }
}

}  // namespace detail

/// Grouped 1D valid correlation as a matrix product whose elements are G-vectors.
///
/// Layouts (group axis innermost everywhere):
///   signal  (position, channel-in-group, g)
///   weights (f, tap, channel-in-group, g)      -> an F x (K*cpg) matrix of G-vectors
///   output  (f, application, g)                -> an F x A matrix of G-vectors
/// The input operand is the (K*cpg) x A matrix whose element (t*cpg + ch, a) is the vector
/// signal(a + t, ch, :). It is Toeplitz, so it is addressed in place rather than copied.
/// Element products are lane-wise, accumulation is vector addition.
template <typename T>
void grouped_conv1d_batched(std::span<const T> signal, std::size_t length, const GroupedConvSpec& spec,
                            std::span<const T> weights, std::span<T> output) {
  detail::check_grouped(signal.size(), length, spec, weights.size());
  const std::size_t apps = spec.applications(length);
  if (output.size() != spec.output_size(length)) throw DimensionError("grouped conv: output size mismatch");
  const std::size_t lanes = spec.groups;
  const std::size_t inner = spec.filter_len * spec.channels_per_group;
  const std::size_t pos_stride = spec.channels_per_group * lanes;
  for (std::size_t f = 0; f < spec.filters_per_group; ++f) {
    const T* w_row = weights.data() + f * inner * lanes;
    T* out_row = output.data() + f * apps * lanes;
    for (std::size_t r = 0; r < inner; ++r) {
      const std::size_t t = r / spec.channels_per_group;
      const std::size_t ch = r % spec.channels_per_group;
      const T* w = w_row + r * lanes;
      for (std::size_t a = 0; a < apps; ++a) {
        const T* x = signal.data() + (a + t) * pos_stride + ch * lanes;
        T* o = out_row + a * lanes;
        if (r == 0) {
          for (std::size_t g = 0; g < lanes; ++g) o[g] = w[g] * x[g];
        } else {
          for (std::size_t g = 0; g < lanes; ++g) o[g] += w[g] * x[g];
        }
      }
    }
  }
}

template <typename T>
std::vector<T> grouped_conv1d_batched(std::span<const T> signal, std::size_t length,
                                      const GroupedConvSpec& spec, std::span<const T> weights) {
  detail::check_grouped(signal.size(), length, spec, weights.size());
  std::vector<T> out(spec.output_size(length), T{});
  grouped_conv1d_batched<T>(signal, length, spec, weights, out);
  return out;
}

/// Reference semantics for grouped_conv1d_batched: one scalar loop nest per output value.
template <typename T>
std::vector<T> grouped_conv1d_naive(std::span<const T> signal, std::size_t length, const GroupedConvSpec& spec,
                                    std::span<const T> weights) {
  detail::check_grouped(signal.size(), length, spec, weights.size());
  const std::size_t apps = spec.applications(length);
  const std::size_t G = spec.groups;
  const std::size_t cpg = spec.channels_per_group;
  std::vector<T> out(spec.output_size(length), T{});
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t f = 0; f < spec.filters_per_group; ++f) {
      for (std::size_t a = 0; a < apps; ++a) {
        T acc{};
        bool first = true;
        for (std::size_t t = 0; t < spec.filter_len; ++t) {
          for (std::size_t ch = 0; ch < cpg; ++ch) {
            const T w = weights[((f * spec.filter_len + t) * cpg + ch) * G + g];
            const T x = signal[((a + t) * cpg + ch) * G + g];
            if (first) {
              acc = w * x;
              first = false;
            } else {
              acc += w * x;
            }
          }
        }
        out[(f * apps + a) * G + g] = acc;
      }
    }
  }
  return out;
}

/// Intermediate results of one separated forward pass.
template <typename T>
struct SeparatedStages {
  BasicTensor3<T> vertical;    // (N-K+1) x M x L
  BasicTensor3<T> horizontal;  // (N-K+1) x (M-K+1) x L
  BasicTensor3<T> fused;       // pre-activation, same spatial size
};

template <typename T>
SeparatedStages<T> sep_forward_stages(const BasicTensor3<T>& image, const BasicSeparatedConvParams<T>& p) {
  p.validate();
  const Shape3 out_shape = p.output_shape(image.shape());
  const std::size_t L = p.count;
  const std::size_t K = p.k;
  SeparatedStages<T> st;

  // Step 1: K x 1 filters over all channels, as im2col + GEMM.
  const Shape3 v_shape{image.height() - K + 1, image.width(), L};
  {
    const auto cols = im2col_lower(image, K, 1);
    const BasicMatrix2<T> v_mat(L, K * p.in_channels, p.vertical);
    st.vertical = to_tensor(matmul(cols, transpose(v_mat)), v_shape);
  }

  // Step 2: each channel is its own group with one 1 x K filter; every image row is
  // a G = L lane signal in the tensor's native channel-minor layout.
  st.horizontal = BasicTensor3<T>(out_shape);
  {
    const GroupedConvSpec spec{L, 1, K, 1};
    std::vector<T> taps(K * L);
    for (std::size_t g = 0; g < L; ++g) {
      for (std::size_t t = 0; t < K; ++t) taps[t * L + g] = p.h(g, t);
    }
    const std::size_t in_row = v_shape.width * L;
    const std::size_t out_row = out_shape.width * L;
    for (std::size_t y = 0; y < out_shape.height; ++y) {
      grouped_conv1d_batched<T>(st.vertical.data().subspan(y * in_row, in_row), v_shape.width, spec,
                                std::span<const T>(taps), st.horizontal.data().subspan(y * out_row, out_row));
    }
  }

  // Step 3: L x L pointwise fusion plus bias.
  {
    const BasicMatrix2<T> a_mat(L, L, p.fusion);
    auto fused = matmul(to_matrix(BasicTensor3<T>(st.horizontal)), transpose(a_mat));
    for (std::size_t r = 0; r < fused.rows(); ++r) {
      auto row = fused.row(r);
      for (std::size_t l = 0; l < L; ++l) row[l] += p.bias[l];
    }
    st.fused = to_tensor(std::move(fused), out_shape);
  }
  return st;
}

template <typename T>
BasicTensor3<T> sep_forward(const BasicTensor3<T>& image, const BasicSeparatedConvParams<T>& p,
                            bool pre_activation = false) {
  auto fused = std::move(sep_forward_stages(image, p).fused);
  return pre_activation ? fused : apply_activation(std::move(fused), p.activation);
}

/// The K x K x C filters the separated layer is equivalent to, together with its bias.
template <typename T>
BasicClassicConvLayer<T> equivalent_classic_layer(const BasicSeparatedConvParams<T>& p) {
  p.validate();
  BasicClassicConvLayer<T> layer;
  layer.filters = BasicFilterBank<T>(p.k, p.k, p.in_channels, p.count);
  for (std::size_t l = 0; l < p.count; ++l) {
    for (std::size_t dy = 0; dy < p.k; ++dy) {
      for (std::size_t dx = 0; dx < p.k; ++dx) {
        for (std::size_t c = 0; c < p.in_channels; ++c) {
          T acc{};
          for (std::size_t j = 0; j < p.count; ++j) acc += p.a(l, j) * p.v(j, dy, c) * p.h(j, dx);
          layer.filters.at(l, dy, dx, c) = acc;
        }
      }
    }
  }
  layer.bias = p.bias;
  layer.activation = p.activation;
  return layer;
}

template <typename T>
BasicFilterBank<T> compose_effective_filters(const BasicSeparatedConvParams<T>& p) {
  return equivalent_classic_layer(p).filters;
}

}  // namespace sepconv

#endif  // SEPCONV_CONV_SEPARATED_HPP_
