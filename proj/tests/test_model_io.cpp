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

#include <cstring>
#include <fstream>

#include "sepconv/model_io.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace sepconv;
using namespace sepconv::testing;

namespace {

// Every trainable value perturbed so zero biases and identity fusions do not hide
// misplaced tensors.
Network sample_network(Structure s) {
  Topology topo;
  topo.input = {9, 11, 2};
  topo.filters = 3;
  topo.kernel = 3;
  topo.activation = Activation::tanh;
  Network net = make_network(s, topo, 77);
  Rng rng(3);
  std::visit(detail::Overloaded{[&](ClassicConvLayer& l) { l.bias = random_vector(rng, l.bias.size()); },
                        [&](SeparatedConvParams& p) { p.bias = random_vector(rng, p.bias.size()); },
                        [](auto&) {}},
             net.layers[0]);
  auto& dense = std::get<DenseLayer>(net.layers[1]);
  dense.bias = random_vector(rng, dense.bias.size());
  return net;
}

template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

bool same_network(const Network& a, const Network& b) {
  if (a.input != b.input || a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].index() != b.layers[i].index()) return false;
    if (const auto* c = std::get_if<ClassicConvLayer>(&a.layers[i])) {
      const auto& d = std::get<ClassicConvLayer>(b.layers[i]);
      if (c->filters.kh != d.filters.kh || c->filters.kw != d.filters.kw || c->activation != d.activation ||
          !same_bits(c->filters.weights, d.filters.weights) || !same_bits(c->bias, d.bias)) {
        return false;
      }
    } else if (const auto* p = std::get_if<SeparatedConvParams>(&a.layers[i])) {
      const auto& q = std::get<SeparatedConvParams>(b.layers[i]);
      if (p->k != q.k || p->count != q.count || p->activation != q.activation || p->fusion_frozen != q.fusion_frozen ||
          !same_bits(p->vertical, q.vertical) || !same_bits(p->horizontal, q.horizontal) ||
          !same_bits(p->fusion, q.fusion) || !same_bits(p->bias, q.bias)) {
        return false;
      }
    } else if (const auto* d = std::get_if<DenseLayer>(&a.layers[i])) {
      const auto& e = std::get<DenseLayer>(b.layers[i]);
      if (d->inputs != e.inputs || !same_bits(d->weights, e.weights) || !same_bits(d->bias, e.bias)) return false;
    }
  }
  return true;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

QuantizedNetwork sample_quantized(Structure s) {
  const Network net = sample_network(s);
  Rng rng(4);
  std::vector<Tensor3> calib;
  for (int i = 0; i < 4; ++i) calib.push_back(random_tensor(rng, net.input, 0.0, 1.0));
  return quantize_network(net, calib);
}

}  // namespace

TEST_SUITE("model_io") {
  TEST_CASE("f64 round-trip is bit-identical") {
    TempDir dir;
    for (Structure s : {Structure::classic, Structure::separated, Structure::separated_nofuse}) {
      const Network net = sample_network(s);
      save_model(dir / "m.sepc", net);
      const ModelFile mf = load_model(dir / "m.sepc");
      CHECK(mf.version == kModelVersion);
      CHECK(mf.dtype == Dtype::f64);
      CHECK(same_network(std::get<Network>(mf.model), net));
      CHECK(serialize_model(std::get<Network>(mf.model)) == read_all(dir / "m.sepc"));
    }
  }

  TEST_CASE("f32 stores single-precision values and round-trips them exactly") {
    const Network net = sample_network(Structure::separated);
    const auto bytes = serialize_model(net, Dtype::f32);
    const ModelFile mf = deserialize_model(bytes);
    CHECK(mf.dtype == Dtype::f32);
    const auto& a = std::get<SeparatedConvParams>(net.layers[0]);
    const auto& b = std::get<SeparatedConvParams>(std::get<Network>(mf.model).layers[0]);
    for (std::size_t i = 0; i < a.vertical.size(); ++i) {
      CHECK(b.vertical[i] == static_cast<double>(static_cast<float>(a.vertical[i])));
    }
    CHECK(serialize_model(std::get<Network>(mf.model), Dtype::f32) == bytes);
    CHECK(bytes.size() < serialize_model(net).size());
  }

  TEST_CASE("q16 round-trip is bit-identical and predicts the same") {
    for (Structure s : {Structure::classic, Structure::separated}) {
      const QuantizedNetwork q = sample_quantized(s);
      const auto bytes = serialize_model(q);
      const ModelFile mf = deserialize_model(bytes);
      CHECK(mf.dtype == Dtype::q16);
      const auto& back = std::get<QuantizedNetwork>(mf.model);
      CHECK(serialize_model(back) == bytes);
      CHECK(back.input_scale == q.input_scale);
      Rng rng(9);
      const Tensor3 img = random_tensor(rng, q.input, 0.0, 1.0);
      CHECK(forward_fixed(back, img).logits == forward_fixed(q, img).logits);
    }
  }

  TEST_CASE("header layout is little-endian") {
    const auto bytes = serialize_model(sample_network(Structure::classic));
    REQUIRE(bytes.size() > 28);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SEPC");
    CHECK(bytes[4] == kModelVersion);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == static_cast<std::uint8_t>(Dtype::f64));
    CHECK(bytes[12] == 9);
    CHECK(bytes[16] == 11);
    CHECK(bytes[20] == 2);
    CHECK(bytes[24] == 3);
  }

  TEST_CASE("bad magic, newer version and truncation raise distinct errors") {
    const auto good = serialize_model(sample_network(Structure::separated));
    auto magic = good;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(magic), BadMagicError);
    CHECK_THROWS_WITH(deserialize_model(magic), doctest::Contains("bad magic"));

    auto version = good;
    version[4] = kModelVersion + 1;
    CHECK_THROWS_AS(deserialize_model(version), UnsupportedVersionError);
    CHECK_THROWS_WITH(deserialize_model(version), doctest::Contains("unsupported version"));

    for (std::size_t cut : {std::size_t{2}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
      const std::vector<std::uint8_t> part(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK_THROWS_AS(deserialize_model(part), TruncatedModelError);
    }

    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(deserialize_model(trailing), ModelFormatError);
    CHECK_THROWS_AS(deserialize_model(std::vector<std::uint8_t>{}), TruncatedModelError);
    CHECK_THROWS_AS(deserialize_model(std::vector<std::uint8_t>{0x7F, 0x45}), BadMagicError);
  }

  TEST_CASE("load_network refuses quantized files and missing paths") {
    TempDir dir;
    save_model(dir / "q.sepc", sample_quantized(Structure::classic));
    CHECK_THROWS_AS(load_network(dir / "q.sepc"), ModelFormatError);
    CHECK_THROWS(load_model(dir / "absent.sepc"));
    CHECK(parse_dtype("q16") == Dtype::q16);
    CHECK(to_string(Dtype::f32) == "f32");
    CHECK_THROWS(parse_dtype("f16"));
  }
}
