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


#ifndef SEPCONV_TESTS_FIXTURES_HPP_
#define SEPCONV_TESTS_FIXTURES_HPP_

#include "oracles.hpp"
#include "sepconv/conv_classic.hpp"
#include "sepconv/conv_separated.hpp"
#include "sepconv/tensor.hpp"

namespace sepconv::testing {

inline Tensor3 random_tensor(Rng& rng, Shape3 shape, double lo = -1.0, double hi = 1.0) {
  return Tensor3(shape, random_vector(rng, shape.size(), lo, hi));
}

inline ClassicConvLayer random_classic(Rng& rng, std::size_t kh, std::size_t kw, std::size_t c, std::size_t l,
                                       Activation act = Activation::identity) {
  ClassicConvLayer layer;
  layer.filters = FilterBank(kh, kw, c, l);
  layer.filters.weights = random_vector(rng, kh * kw * c * l);
  layer.bias = random_vector(rng, l);
  layer.activation = act;
  return layer;
}

inline SeparatedConvParams random_separated(Rng& rng, std::size_t k, std::size_t c, std::size_t l,
                                            Activation act = Activation::identity) {
  SeparatedConvParams p(k, c, l);
  p.vertical = random_vector(rng, p.vertical.size());
  p.horizontal = random_vector(rng, p.horizontal.size());
  p.fusion = random_vector(rng, p.fusion.size());
  p.bias = random_vector(rng, p.bias.size());
  p.activation = act;
  return p;
}

template <typename T>
std::vector<double> values(const BasicTensor3<T>& t) {
  std::vector<double> out;
  out.reserve(t.size());
  for (const auto& v : t.data()) {
    if constexpr (std::is_same_v<T, double>) {
      out.push_back(v);
    } else {
      out.push_back(v.value());
    }
  }
  return out;
}

}  // namespace sepconv::testing

#endif  // SEPCONV_TESTS_FIXTURES_HPP_
