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

#include "sepconv/cost_model.hpp"
#include "support/counted_layers.hpp"

using namespace sepconv;
using namespace sepconv::testing;

TEST_SUITE("cost_model") {
  TEST_CASE("classic counts at the 14x20, K=5, L=8 configuration") {
    const ConvShape s{5, 14, 20, 1, 8};
    CHECK(classic_cost(s, CountingMode::paper_asymptotic).multiplications == 14 * 20 * 25 * 8);
    CHECK(classic_cost(s, CountingMode::exact_valid).multiplications == 10 * 16 * 25 * 8);
    CHECK(separated_cost(s, CountingMode::paper_asymptotic).multiplications == 280 * 8 * (5 + 5 + 8));
  }

  TEST_CASE("per-pixel counts 200 vs 144 and the 1.3889 ratio") {
    const ConvShape s{5, 14, 20, 1, 8};
    const auto cl = classic_cost(s, CountingMode::paper_asymptotic);
    const auto sp = separated_cost(s, CountingMode::paper_asymptotic);
    CHECK(cl.multiplications / (cl.output_h * cl.output_w) == 200);
    CHECK(sp.multiplications / (sp.output_h * sp.output_w) == 144);
    CHECK(speedup_ratio(s, CountingMode::paper_asymptotic) == doctest::Approx(200.0 / 144.0).epsilon(1e-12));
    CHECK(std::abs(speedup_ratio(s, CountingMode::paper_asymptotic) - 1.3889) <= 1e-4);
  }

  TEST_CASE("pointwise layer: K=C=L=1") {
    const ConvShape s{1, 7, 9, 1, 1};
    for (auto mode : {CountingMode::exact_valid, CountingMode::paper_asymptotic}) {
      CHECK(classic_cost(s, mode).multiplications == 63);
      CHECK(separated_cost(s, mode).multiplications == 3 * 63);
      CHECK(speedup_ratio(s, mode) == doctest::Approx(1.0 / 3.0));
    }
    CHECK_FALSE(separation_pays_off(s));
  }

  TEST_CASE("K=3, C=8, L=8 follows K^2 C L / (KCL + KL + L^2)") {
    const ConvShape s{3, 14, 20, 8, 8};
    const double expected = (9.0 * 8 * 8) / (3.0 * 8 * 8 + 3.0 * 8 + 8.0 * 8);
    CHECK(speedup_ratio(s, CountingMode::paper_asymptotic) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(72.0 / 35.0));
  }

  TEST_CASE("weights, quoted weights and biases") {
    const ConvShape s{5, 14, 20, 1, 8};
    const auto cl = classic_cost(s, CountingMode::exact_valid);
    const auto sp = separated_cost(s, CountingMode::exact_valid);
    CHECK(cl.weights == 200);
    CHECK(sp.weights == 40 + 40 + 64);
    CHECK(sp.quoted_weights == 40 + 40 + 8);
    CHECK(cl.biases == 8);
    CHECK(sp.biases == 8);
  }

  TEST_CASE("instrumented forward passes match exact-mode counts on 50 random shapes") {
    Rng rng(51);
    for (int draw = 0; draw < 50; ++draw) {
      const ConvShape s = random_shape(rng);
      CAPTURE(s.k);
      CAPTURE(s.n);
      CAPTURE(s.m);
      CAPTURE(s.c);
      CAPTURE(s.l);
      const auto img = counted_image(rng, {s.n, s.m, s.c});
      const auto act = draw % 2 == 0 ? Activation::rectifier : Activation::tanh;
      const auto cl_expected = classic_cost(s, CountingMode::exact_valid);
      const auto sp_expected = separated_cost(s, CountingMode::exact_valid);

      const auto classic = counted_classic(rng, s, act);
      reset_op_counts();
      (void)conv2d_direct(img, classic);
      CHECK(op_counts().mul == cl_expected.multiplications);
      CHECK(op_counts().add == cl_expected.additions);

      reset_op_counts();
      (void)conv2d_matrix(img, classic);
      CHECK(op_counts().mul == cl_expected.multiplications);
      CHECK(op_counts().add == cl_expected.additions);

      const auto sep = counted_separated(rng, s, act);
      reset_op_counts();
      (void)sep_forward(img, sep);
      CHECK(op_counts().mul == sp_expected.multiplications);
      CHECK(op_counts().add == sp_expected.additions);
    }
  }

  TEST_CASE("counted forward values equal the double forward") {
    Rng rng(52);
    const ConvShape s{3, 6, 7, 2, 3};
    const auto img = counted_image(rng, {s.n, s.m, s.c});
    const auto sep = counted_separated(rng, s, Activation::identity);
    Tensor3 dimg(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) dimg.data()[i] = img.data()[i].value();
    SeparatedConvParams dp(s.k, s.c, s.l);
    for (std::size_t i = 0; i < dp.vertical.size(); ++i) dp.vertical[i] = sep.vertical[i].value();
    for (std::size_t i = 0; i < dp.horizontal.size(); ++i) dp.horizontal[i] = sep.horizontal[i].value();
    for (std::size_t i = 0; i < dp.fusion.size(); ++i) dp.fusion[i] = sep.fusion[i].value();
    for (std::size_t i = 0; i < dp.bias.size(); ++i) dp.bias[i] = sep.bias[i].value();
    dp.activation = Activation::identity;
    CHECK(values(sep_forward(img, sep)) == values(sep_forward(dimg, dp)));
  }

  TEST_CASE("speedup ratio increases with K for fixed C, L") {
    for (std::uint64_t c : {1, 2, 3, 8}) {
      for (std::uint64_t l : {1, 4, 8, 16}) {
        for (auto mode : {CountingMode::paper_asymptotic, CountingMode::exact_valid}) {
          double prev = 0.0;
          for (std::uint64_t k = 1; k <= 11; ++k) {
            const double r = speedup_ratio({k, 32, 32, c, l}, mode);
            CHECK(r > prev);
            prev = r;
          }
        }
      }
    }
  }

  TEST_CASE("break-even predicate agrees with counts and weights") {
    for (std::uint64_t k = 1; k <= 9; ++k) {
      for (std::uint64_t c = 1; c <= 6; ++c) {
        for (std::uint64_t l = 1; l <= 24; ++l) {
          const ConvShape s{k, 20, 20, c, l};
          const bool pays = separation_pays_off(s);
          CHECK(pays == (k * k * c > k * c + k + l));
          CHECK(pays == (speedup_ratio(s, CountingMode::paper_asymptotic) > 1.0));
          CHECK(pays == (separated_cost(s, CountingMode::exact_valid).weights <
                         classic_cost(s, CountingMode::exact_valid).weights));
        }
      }
    }
  }

  TEST_CASE("invalid shapes are rejected") {
    CHECK_THROWS_AS(classic_cost({0, 5, 5, 1, 1}, CountingMode::exact_valid), DimensionError);
    CHECK_THROWS_AS(separated_cost({6, 5, 9, 1, 1}, CountingMode::exact_valid), DimensionError);
    CHECK_THROWS_AS(speedup_ratio({3, 5, 5, 0, 1}, CountingMode::paper_asymptotic), DimensionError);
    CHECK(parse_counting_mode("paper") == CountingMode::paper_asymptotic);
    CHECK_THROWS(parse_counting_mode("fast"));
  }
}
