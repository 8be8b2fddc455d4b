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

#include <Eigen/SVD>

#include "support/fixtures.hpp"

using namespace sepconv;
using namespace sepconv::testing;

namespace {

Tensor3 composed_reference(const Tensor3& img, const SeparatedConvParams& p) {
  ClassicConvLayer layer;
  layer.filters = compose_effective_filters(p);
  layer.bias = p.bias;
  layer.activation = p.activation;
  return conv2d_direct(img, layer, true);
}

// Direct valid correlation of each group's own channels with its own filters.
std::vector<double> grouped_reference(const std::vector<double>& signal, std::size_t length,
                                      const GroupedConvSpec& s, const std::vector<double>& w) {
  const std::size_t apps = length - s.filter_len + 1;
  std::vector<double> out(s.filters_per_group * apps * s.groups);
  for (std::size_t g = 0; g < s.groups; ++g) {
    for (std::size_t f = 0; f < s.filters_per_group; ++f) {
      for (std::size_t a = 0; a < apps; ++a) {
        double acc = 0.0;
        for (std::size_t t = 0; t < s.filter_len; ++t) {
          for (std::size_t ch = 0; ch < s.channels_per_group; ++ch) {
            acc += w[((f * s.filter_len + t) * s.channels_per_group + ch) * s.groups + g] *
                   signal[((a + t) * s.channels_per_group + ch) * s.groups + g];
          }
        }
        out[(f * apps + a) * s.groups + g] = acc;
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("conv_separated") {
  TEST_CASE("all-identity composition with K=1 returns the input") {
    Rng rng(31);
    const Tensor3 img = random_tensor(rng, {5, 7, 1});
    SeparatedConvParams p(1, 1, 1);
    p.vertical = {1.0};
    p.horizontal = {1.0};
    p.fusion = {1.0};
    p.bias = {0.0};
    p.activation = Activation::identity;
    const Tensor3 out = sep_forward(img, p);
    REQUIRE(out.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.data()[i] == img.data()[i]);
  }

  TEST_CASE("composition on a 10x10 image with K=5, L=8") {
    Rng rng(32);
    const Tensor3 img = random_tensor(rng, {10, 10, 1});
    const SeparatedConvParams p = random_separated(rng, 5, 1, 8);
    CHECK(rel_error(sep_forward(img, p, true).data(), composed_reference(img, p).data()) <= 1e-8);
  }

  TEST_CASE("composition theorem on 200 random draws") {
    Rng rng(33);
    for (int draw = 0; draw < 200; ++draw) {
      const std::size_t k = random_int(rng, 1, 6), c = random_int(rng, 1, 3), l = random_int(rng, 1, 8);
      const std::size_t n = random_int(rng, k, 12), m = random_int(rng, k, 12);
      const Tensor3 img = random_tensor(rng, {n, m, c});
      const SeparatedConvParams p = random_separated(rng, k, c, l, Activation::tanh);
      CHECK(rel_error(sep_forward(img, p, true).data(), composed_reference(img, p).data()) <= 1e-8);
    }
  }

  TEST_CASE("the 14x20x1 input with K=5, L=8 gives 10x16x8") {
    Rng rng(34);
    CHECK(sep_forward(Tensor3(14, 20, 1), random_separated(rng, 5, 1, 8)).shape() == Shape3{10, 16, 8});
  }

  TEST_CASE("stage shapes") {
    Rng rng(35);
    const auto st = sep_forward_stages(random_tensor(rng, {9, 11, 2}), random_separated(rng, 3, 2, 4));
    CHECK(st.vertical.shape() == Shape3{7, 11, 4});
    CHECK(st.horizontal.shape() == Shape3{7, 9, 4});
    CHECK(st.fused.shape() == Shape3{7, 9, 4});
  }

  TEST_CASE("outer product with L=1") {
    SeparatedConvParams p(2, 1, 1);
    p.vertical = {1.0, 2.0};
    p.horizontal = {3.0, 4.0};
    p.fusion = {1.0};
    const FilterBank f = compose_effective_filters(p);
    CHECK(f.at(0, 0, 0, 0) == 3.0);
    CHECK(f.at(0, 0, 1, 0) == 4.0);
    CHECK(f.at(0, 1, 0, 0) == 6.0);
    CHECK(f.at(0, 1, 1, 0) == 8.0);
  }

  TEST_CASE("zero fusion gives the bias everywhere") {
    Rng rng(36);
    SeparatedConvParams p = random_separated(rng, 3, 2, 3);
    for (auto& a : p.fusion) a = 0.0;
    for (double w : compose_effective_filters(p).weights) CHECK(w == 0.0);
    const Tensor3 out = sep_forward(random_tensor(rng, {6, 6, 2}), p, true);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == p.bias[i % 3]);
  }

  TEST_CASE("each composed K x K slice has rank at most L") {
    Rng rng(37);
    for (int draw = 0; draw < 60; ++draw) {
      const std::size_t k = random_int(rng, 2, 7), c = random_int(rng, 1, 3), l = random_int(rng, 1, k - 1);
      const SeparatedConvParams p = random_separated(rng, k, c, l);
      const FilterBank f = compose_effective_filters(p);
      for (std::size_t out = 0; out < l; ++out) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          Eigen::MatrixXd slice(k, k);
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) slice(dy, dx) = f.at(out, dy, dx, ch);
          }
          const Eigen::JacobiSVD<Eigen::MatrixXd> svd(slice);
          const auto& sv = svd.singularValues();
          std::size_t rank = 0;
          for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-9 ? 1 : 0;
          CHECK(rank <= l);
        }
      }
    }
  }

  TEST_CASE("identity fusion keeps channels separate and separable") {
    Rng rng(38);
    SeparatedConvParams p = random_separated(rng, 4, 1, 3);
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t j = 0; j < 3; ++j) p.fusion[l * 3 + j] = l == j ? 1.0 : 0.0;
    }
    const FilterBank f = compose_effective_filters(p);
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t dy = 0; dy < 4; ++dy) {
        for (std::size_t dx = 0; dx < 4; ++dx) CHECK(f.at(l, dy, dx, 0) == p.v(l, dy, 0) * p.h(l, dx));
      }
    }
  }

  TEST_CASE("parameter count is KCL + KL + L^2") {
    const SeparatedConvParams p(5, 1, 8);
    CHECK(p.weight_count() == 5 * 1 * 8 + 5 * 8 + 64);
    CHECK(p.vertical.size() + p.horizontal.size() + p.fusion.size() == p.weight_count());
  }

  TEST_CASE("grouped kernel, G=4, F=2, K=5 over 10 samples gives 2 x 6 x 4") {
    const GroupedConvSpec spec{4, 2, 5, 1};
    CHECK(spec.applications(10) == 6);
    Rng rng(39);
    const auto signal = random_vector(rng, spec.signal_size(10));
    const auto w = random_vector(rng, spec.weight_size());
    const auto out = grouped_conv1d_batched<double>(signal, 10, spec, w);
    CHECK(out.size() == 2 * 6 * 4);
    CHECK(rel_error(out, grouped_reference(signal, 10, spec, w)) <= 1e-12);
  }

  TEST_CASE("grouped kernel with unit taps is the identity") {
    Rng rng(40);
    const GroupedConvSpec spec{5, 1, 1, 1};
    const auto signal = random_vector(rng, spec.signal_size(7));
    const std::vector<double> w(5, 1.0);
    CHECK(grouped_conv1d_batched<double>(signal, 7, spec, w) == signal);
    CHECK(grouped_conv1d_naive<double>(signal, 7, spec, w) == signal);
  }

  TEST_CASE("one group and one set is plain 1D valid correlation") {
    const GroupedConvSpec spec{1, 1, 3, 1};
    const std::vector<double> signal{1, 2, 3, 4, 5};
    const std::vector<double> w{1, 0, -1};
    const std::vector<double> expected{-2, -2, -2};
    CHECK(grouped_conv1d_batched<double>(signal, 5, spec, w) == expected);
    CHECK(grouped_conv1d_naive<double>(signal, 5, spec, w) == expected);
  }

  TEST_CASE("batched equals naive on random G, F, K configurations") {
    Rng rng(41);
    for (int draw = 0; draw < 100; ++draw) {
      GroupedConvSpec spec{random_int(rng, 1, 8), random_int(rng, 1, 4), random_int(rng, 1, 7),
                           random_int(rng, 1, 3)};
      std::size_t length = spec.filter_len + random_int(rng, 0, 10);
      if (draw == 0) {
        spec = {4, 2, 5, 1};
        length = 10;
      } else if (draw == 1) {
        spec = {3, 2, 3, 1};
        length = 8;
      }
      const auto signal = random_vector(rng, spec.signal_size(length));
      const auto w = random_vector(rng, spec.weight_size());
      const auto batched = grouped_conv1d_batched<double>(signal, length, spec, w);
      CHECK(rel_error(batched, grouped_conv1d_naive<double>(signal, length, spec, w)) <= 1e-12);
      CHECK(rel_error(batched, grouped_reference(signal, length, spec, w)) <= 1e-12);
    }
  }

  TEST_CASE("grouped kernel rejects short signals and wrong buffer sizes") {
    const GroupedConvSpec spec{2, 1, 4, 1};
    CHECK_THROWS_AS(grouped_conv1d_batched<double>(std::vector<double>(6), 3, spec, std::vector<double>(8)),
                    DimensionError);
    CHECK_THROWS_AS(grouped_conv1d_batched<double>(std::vector<double>(10), 5, spec, std::vector<double>(7)),
                    DimensionError);
  }

  TEST_CASE("separated layer rejects a filter larger than the image") {
    Rng rng(42);
    CHECK_THROWS_AS(sep_forward(Tensor3(4, 9, 1), random_separated(rng, 5, 1, 2)), DimensionError);
  }
}
