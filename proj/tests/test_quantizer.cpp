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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "sepconv/quantizer.hpp"
#include "sepconv/trainer.hpp"
#include "support/fixtures.hpp"

using namespace sepconv;
using namespace sepconv::testing;

namespace {

// A float activation map paired with an elementwise bound on |fixed - float|.
struct Interval {
  Shape3 shape;
  std::vector<double> value;
  std::vector<double> err;

  std::size_t at(std::size_t y, std::size_t x, std::size_t c) const { return (y * shape.width + x) * shape.channels + c; }
};

// Error of one dot product b + sum w_i x_i evaluated as b' + sum w'_i x'_i:
// |w'x' - wx| <= |w'| |x' - x| + |x| |w' - w|, plus half a unit of the bias grid.
struct DotBound {
  double value = 0.0;
  double err = 0.0;
  void add(double w, double w_deq, double w_half, double x, double x_err) {
    value += w * x;
    err += std::abs(w_deq) * x_err + std::abs(x) * w_half;
  }
};

// Requantization: the activation is 1-Lipschitz and rounding adds half an output step.
// Saturation only pulls values back toward the calibrated range, so it cannot add error.
void emit(Interval& out, std::size_t i, const DotBound& d, Activation act, double out_scale,
          std::vector<double>& pre_value, std::vector<double>& pre_err) {
  pre_value[i] = d.value;
  pre_err[i] = d.err;
  out.value[i] = activate(d.value, act);
  out.err[i] = d.err + out_scale / 2.0;
}

double deq(const FixedTensor& t, std::size_t i) { return t.values[i] * t.scale; }

struct OracleLayer {
  std::vector<double> pre_value;
  std::vector<double> pre_err;
};

std::vector<OracleLayer> interval_oracle(const Network& net, const QuantizedNetwork& q, const Tensor3& image) {
  Interval cur{image.shape(), {image.data().begin(), image.data().end()}, std::vector<double>(image.size(), q.input_scale / 2)};
  std::vector<OracleLayer> layers;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    if (std::holds_alternative<SoftmaxLayer>(net.layers[li])) break;
    OracleLayer ol;
    if (const auto* c = std::get_if<ClassicConvLayer>(&net.layers[li])) {
      const auto& qc = std::get<QuantizedClassicConv>(q.layers[li]);
      const auto& f = c->filters;
      Interval out{{cur.shape.height - f.kh + 1, cur.shape.width - f.kw + 1, f.count}, {}, {}};
      out.value.resize(out.shape.size());
      out.err.resize(out.shape.size());
      ol.pre_value.resize(out.shape.size());
      ol.pre_err.resize(out.shape.size());
      for (std::size_t y = 0; y < out.shape.height; ++y) {
        for (std::size_t x = 0; x < out.shape.width; ++x) {
          for (std::size_t l = 0; l < f.count; ++l) {
            DotBound d{c->bias[l], qc.in_scale * qc.weights.scale / 2};
            for (std::size_t dy = 0; dy < f.kh; ++dy) {
              for (std::size_t dx = 0; dx < f.kw; ++dx) {
                for (std::size_t ch = 0; ch < f.in_channels; ++ch) {
                  const std::size_t wi = f.index(l, dy, dx, ch);
                  const std::size_t xi = cur.at(y + dy, x + dx, ch);
                  d.add(f.weights[wi], deq(qc.weights, wi), qc.weights.scale / 2, cur.value[xi], cur.err[xi]);
                }
              }
            }
            emit(out, out.at(y, x, l), d, c->activation, qc.out_scale, ol.pre_value, ol.pre_err);
          }
        }
      }
      cur = std::move(out);
    } else if (const auto* p = std::get_if<SeparatedConvParams>(&net.layers[li])) {
      const auto& qs = std::get<QuantizedSeparatedConv>(q.layers[li]);
      const std::size_t K = p->k, L = p->count;
      std::vector<double> scratch_v, scratch_e;
      Interval v{{cur.shape.height - K + 1, cur.shape.width, L}, {}, {}};
      v.value.resize(v.shape.size());
      v.err.resize(v.shape.size());
      scratch_v.resize(v.shape.size());
      scratch_e.resize(v.shape.size());
      for (std::size_t y = 0; y < v.shape.height; ++y) {
        for (std::size_t x = 0; x < v.shape.width; ++x) {
          for (std::size_t j = 0; j < L; ++j) {
            DotBound d;
            for (std::size_t dy = 0; dy < K; ++dy) {
              for (std::size_t ch = 0; ch < p->in_channels; ++ch) {
                const std::size_t wi = (j * K + dy) * p->in_channels + ch;
                const std::size_t xi = cur.at(y + dy, x, ch);
                d.add(p->vertical[wi], deq(qs.vertical, wi), qs.vertical.scale / 2, cur.value[xi], cur.err[xi]);
              }
            }
            emit(v, v.at(y, x, j), d, Activation::identity, qs.vertical_scale, scratch_v, scratch_e);
          }
        }
      }
      Interval h{{v.shape.height, v.shape.width - K + 1, L}, {}, {}};
      h.value.resize(h.shape.size());
      h.err.resize(h.shape.size());
      scratch_v.assign(h.shape.size(), 0.0);
      scratch_e.assign(h.shape.size(), 0.0);
      for (std::size_t y = 0; y < h.shape.height; ++y) {
        for (std::size_t x = 0; x < h.shape.width; ++x) {
          for (std::size_t g = 0; g < L; ++g) {
            DotBound d;
            for (std::size_t t = 0; t < K; ++t) {
              const std::size_t xi = v.at(y, x + t, g);
              d.add(p->horizontal[g * K + t], deq(qs.horizontal, g * K + t), qs.horizontal.scale / 2, v.value[xi],
                    v.err[xi]);
            }
            emit(h, h.at(y, x, g), d, Activation::identity, qs.horizontal_scale, scratch_v, scratch_e);
          }
        }
      }
      Interval out{h.shape, std::vector<double>(h.shape.size()), std::vector<double>(h.shape.size())};
      ol.pre_value.resize(out.shape.size());
      ol.pre_err.resize(out.shape.size());
      for (std::size_t px = 0; px < out.shape.height * out.shape.width; ++px) {
        for (std::size_t f = 0; f < L; ++f) {
          DotBound d{p->bias[f], qs.horizontal_scale * qs.fusion.scale / 2};
          for (std::size_t j = 0; j < L; ++j) {
            d.add(p->fusion[f * L + j], deq(qs.fusion, f * L + j), qs.fusion.scale / 2, h.value[px * L + j],
                  h.err[px * L + j]);
          }
          emit(out, px * L + f, d, p->activation, qs.out_scale, ol.pre_value, ol.pre_err);
        }
      }
      cur = std::move(out);
    } else {
      const auto& dl = std::get<DenseLayer>(net.layers[li]);
      const auto& qd = std::get<QuantizedDense>(q.layers[li]);
      Interval out{{1, 1, dl.outputs}, std::vector<double>(dl.outputs), std::vector<double>(dl.outputs)};
      ol.pre_value.resize(dl.outputs);
      ol.pre_err.resize(dl.outputs);
      for (std::size_t o = 0; o < dl.outputs; ++o) {
        DotBound d{dl.bias[o], qd.in_scale * qd.weights.scale / 2};
        for (std::size_t i = 0; i < dl.inputs; ++i) {
          d.add(dl.weights[o * dl.inputs + i], deq(qd.weights, o * dl.inputs + i), qd.weights.scale / 2, cur.value[i],
                cur.err[i]);
        }
        emit(out, o, d, Activation::identity, qd.out_scale, ol.pre_value, ol.pre_err);
      }
      cur = std::move(out);
    }
    layers.push_back(std::move(ol));
  }
  return layers;
}

Dataset small_digits(std::size_t n, std::uint64_t seed, Shape3 shape = {14, 20, 1}) {
  Dataset d = make_synthetic_digits(n, seed);
  return shape == d.shape() ? d : resize_dataset(d, shape.height, shape.width);
}

Network trained(Structure s, const Dataset& data, std::size_t epochs) {
  Topology topo;
  topo.input = data.shape();
  TrainConfig cfg;
  cfg.epochs = epochs;
  return sgd_train(make_network(s, topo, 11), data, nullptr, cfg).network;
}

double mean_logit_error(const Network& net, const QuantizedNetwork& q, const Dataset& data) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& img : data.images) {
    const auto ref = network_logits(net, img);
    const auto got = forward_fixed(q, img).logits;
    for (std::size_t i = 0; i < ref.size(); ++i, ++n) total += std::abs(ref[i] - got[i]);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("quantizer") {
  TEST_CASE("all-zero tensor quantizes to zeros with unit scale") {
    const std::vector<double> zeros(17, 0.0);
    const FixedTensor t = quantize_tensor(zeros, {17});
    CHECK(t.scale == 1.0);
    CHECK(std::all_of(t.values.begin(), t.values.end(), [](std::int16_t v) { return v == 0; }));
  }

  TEST_CASE("the largest magnitude maps to the end of the integer range") {
    const std::vector<double> w{0.25, -1.5, 0.75, 1.5e-3};
    const FixedTensor t = quantize_tensor(w, {4});
    CHECK(t.values[1] == -32767);
    CHECK(t.scale == 1.5 / 32767.0);
    const std::vector<double> p{0.1, 3.0};
    CHECK(quantize_tensor(p, {2}).values[1] == 32767);
    CHECK(qmax_for_bits(16) == 32767);
    CHECK(qmax_for_bits(8) == 127);
    CHECK_THROWS(qmax_for_bits(17));
    CHECK_THROWS(qmax_for_bits(1));
  }

  TEST_CASE("round to nearest even and saturation") {
    CHECK(quantize_value(2.5, 1.0, 32767) == 2);
    CHECK(quantize_value(3.5, 1.0, 32767) == 4);
    CHECK(quantize_value(-2.5, 1.0, 32767) == -2);
    CHECK(quantize_value(1e9, 1.0, 32767) == 32767);
    CHECK(quantize_value(-1e9, 1.0, 32767) == -32767);
  }

  TEST_CASE("roundtrip error is at most half a step") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      const double mag = std::pow(10.0, static_cast<double>(random_int(rng, 0, 12)) - 6.0);
      const auto w = random_vector(rng, static_cast<std::size_t>(random_int(rng, 1, 300)), -mag, mag);
      for (int bits : {4, 8, 12, 16}) {
        const FixedTensor q = quantize_tensor(w, {w.size()}, bits);
        const auto back = dequantize(q);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(back[i] - w[i]) <= q.scale / 2 * (1 + 1e-12));
      }
    }
  }

  TEST_CASE("checked_mac refuses to overflow") {
    constexpr auto big = std::numeric_limits<std::int64_t>::max();
    CHECK(checked_mac(5, 3, -4) == -7);
    CHECK_THROWS_AS(checked_mac(big, 1, 1), AccumulatorOverflow);
    CHECK_THROWS_AS(checked_mac(-big, -1, 2), AccumulatorOverflow);
    CHECK(checked_mac(big - 6, 2, 3) == big);
  }

  TEST_CASE("overflowing bias aborts the fixed forward pass") {
    Network net;
    net.input = {1, 1, 2};
    DenseLayer d(2, 2);
    d.weights = {1, 0, 0, 1};
    net.layers = {d, SoftmaxLayer{}};
    const std::vector<Tensor3> calib{Tensor3({1, 1, 2}, std::vector<double>{0.5, 1.0})};
    QuantizedNetwork q = quantize_network(net, calib);
    std::get<QuantizedDense>(q.layers[0]).bias[0] = std::numeric_limits<std::int64_t>::max() - 1;
    CHECK_THROWS_AS(forward_fixed(q, calib[0]), AccumulatorOverflow);
  }

  TEST_CASE("identity 1x1 layer predicts exactly as the float path") {
    constexpr std::size_t Q = 6;
    Network net;
    net.input = {1, 1, Q};
    ClassicConvLayer id;
    id.filters = FilterBank(1, 1, Q, Q);
    for (std::size_t l = 0; l < Q; ++l) id.filters.at(l, 0, 0, l) = 1.0;
    id.bias.assign(Q, 0.0);
    id.activation = Activation::identity;
    net.layers = {id, SoftmaxLayer{}};
    Rng rng(8);
    std::vector<Tensor3> images;
    for (int i = 0; i < 300; ++i) {
      Tensor3 t(1, 1, Q);
      // Distinct grid values keep the argmax unambiguous after rounding.
      std::vector<int> grid{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
      std::shuffle(grid.begin(), grid.end(), rng);
      for (std::size_t c = 0; c < Q; ++c) t.data()[c] = grid[c] / 15.0;
      images.push_back(t);
    }
    const QuantizedNetwork q = quantize_network(net, images);
    for (const auto& img : images) CHECK(forward_fixed(q, img).prediction == predict(net, img));
  }

  TEST_CASE("pre-activation errors stay inside the propagated interval bound") {
    const Dataset data = small_digits(40, 3, {10, 12, 1});
    for (Structure s : {Structure::classic, Structure::separated, Structure::separated_nofuse}) {
      for (Activation act : {Activation::rectifier, Activation::tanh}) {
        Topology topo;
        topo.input = data.shape();
        topo.filters = 4;
        topo.kernel = 3;
        topo.activation = act;
        const Network net = make_network(s, topo, 21);
        for (int bits : {8, 16}) {
          const QuantizedNetwork q = quantize_network(net, data.images, {bits});
          for (const auto& img : data.images) {
            const auto oracle = interval_oracle(net, q, img);
            const auto fixed = forward_fixed(q, img);
            REQUIRE(oracle.size() == fixed.preactivations.size());
            for (std::size_t li = 0; li < oracle.size(); ++li) {
              for (std::size_t i = 0; i < oracle[li].pre_value.size(); ++i) {
                const double gap = std::abs(fixed.preactivations[li][i] - oracle[li].pre_value[i]);
                CHECK(gap <= oracle[li].pre_err[i] * (1 + 1e-9) + 1e-12);
              }
            }
          }
        }
      }
    }
  }

  TEST_CASE("more bits never increase the logit error") {
    const Dataset data = small_digits(300, 4);
    for (Structure s : {Structure::classic, Structure::separated}) {
      const Network net = trained(s, data, 2);
      double prev = std::numeric_limits<double>::infinity();
      for (int bits = 6; bits <= 16; bits += 2) {
        const double e = mean_logit_error(net, quantize_network(net, data.images, {bits}), data);
        CHECK(e <= prev);
        prev = e;
      }
    }
  }

  TEST_CASE("trained networks keep their decisions under 16-bit inference") {
    const Dataset data = small_digits(1200, 9);
    const auto [train, test] = split_dataset(data, 0.9, 1);
    for (Structure s : {Structure::classic, Structure::separated, Structure::separated_nofuse}) {
      const Network net = trained(s, train, 3);
      const QuantizedNetwork q = quantize_network(net, train.images);
      CHECK(prediction_agreement(net, q, test) >= 0.99);
      CHECK(evaluate_error_rate(q, test) == doctest::Approx(evaluate_error_rate(net, test)).epsilon(0.02));
    }
  }

  TEST_CASE("quantization rejects bad inputs") {
    const Network net = make_network(Structure::classic, Topology{}, 1);
    CHECK_THROWS_AS(quantize_network(net, {}), std::invalid_argument);
    const std::vector<Tensor3> wrong{Tensor3(5, 5, 1)};
    CHECK_THROWS_AS(quantize_network(net, wrong), DimensionError);
    const QuantizedNetwork q = quantize_network(net, std::vector<Tensor3>{Tensor3(14, 20, 1)});
    CHECK_THROWS_AS(forward_fixed(q, Tensor3(5, 5, 1)), DimensionError);
  }
}
