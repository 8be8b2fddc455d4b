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

#include "sepconv/model_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace sepconv {

using detail::Overloaded;

std::string_view to_string(Dtype d) {
  switch (d) {
    case Dtype::f32:
      return "f32";
    case Dtype::f64:
      return "f64";
    case Dtype::q16:
      return "q16";
  }
  return "unknown";
}

Dtype parse_dtype(std::string_view name) {
  if (name == "f32") return Dtype::f32;
  if (name == "f64") return Dtype::f64;
  if (name == "q16") return Dtype::q16;
  throw std::invalid_argument("unknown dtype '" + std::string(name) + "'");
}

namespace {

enum class Tag : std::uint8_t { classic = 1, separated = 2, dense = 3, softmax = 4 };

class Writer {
 public:
  template <typename U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    std::array<std::uint8_t, sizeof(U)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::size_t v) {
    if (v > UINT32_MAX) throw ModelFormatError("dimension too large for the model format");
    put(static_cast<std::uint32_t>(v));
  }
  void floats(std::span<const double> values, Dtype dtype) {
    put(static_cast<std::uint64_t>(values.size()));
    for (double v : values) {
      if (dtype == Dtype::f32) {
        put(static_cast<float>(v));
      } else {
        put(v);
      }
    }
  }
  void fixed(const FixedTensor& t) {
    put(static_cast<std::uint64_t>(t.values.size()));
    put(t.scale);
    for (auto q : t.values) put(q);
  }
  void ints(std::span<const std::int64_t> values) {
    put(static_cast<std::uint64_t>(values.size()));
    for (auto v : values) put(v);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::array<std::uint8_t, sizeof(U)> b;
    std::memcpy(b.data(), bytes_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, b.data(), sizeof(U));
    return v;
  }
  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::size_t u32() { return get<std::uint32_t>(); }
  std::size_t count(std::size_t elem_size) {
    const auto n = get<std::uint64_t>();
    if (elem_size != 0 && n > remaining() / elem_size) throw TruncatedModelError();
    return static_cast<std::size_t>(n);
  }
  std::vector<double> floats(Dtype dtype, std::size_t expected) {
    const std::size_t n = count(dtype == Dtype::f32 ? 4 : 8);
    if (n != expected) throw ModelFormatError("tensor length " + std::to_string(n) + " does not match its layer");
    std::vector<double> out(n);
    for (auto& v : out) v = dtype == Dtype::f32 ? static_cast<double>(get<float>()) : get<double>();
    return out;
  }
  FixedTensor fixed(std::vector<std::size_t> shape) {
    std::size_t expected = 1;
    for (auto d : shape) expected *= d;
    const std::size_t n = count(2);
    if (n != expected) throw ModelFormatError("tensor length " + std::to_string(n) + " does not match its layer");
    FixedTensor t;
    t.shape = std::move(shape);
    t.scale = get<double>();
    t.values.resize(n);
    for (auto& q : t.values) q = get<std::int16_t>();
    return t;
  }
  std::vector<std::int64_t> ints(std::size_t expected) {
    const std::size_t n = count(8);
    if (n != expected) throw ModelFormatError("bias length does not match its layer");
    std::vector<std::int64_t> out(n);
    for (auto& v : out) v = get<std::int64_t>();
    return out;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (n > remaining()) throw TruncatedModelError();
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, Dtype dtype, const Shape3& input, std::size_t layers) {
  for (char ch : {'S', 'E', 'P', 'C'}) w.u8(static_cast<std::uint8_t>(ch));
  w.put(kModelVersion);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u32(input.height);
  w.u32(input.width);
  w.u32(input.channels);
  w.u32(layers);
}

void layer_head(Writer& w, Tag tag, Activation act, std::uint8_t flags) {
  w.u8(static_cast<std::uint8_t>(tag));
  w.u8(static_cast<std::uint8_t>(act));
  w.u8(flags);
  w.u8(0);
}

Activation read_activation(std::uint8_t v) {
  if (v > static_cast<std::uint8_t>(Activation::tanh)) throw ModelFormatError("unknown activation tag");
  return static_cast<Activation>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Network& net, Dtype dtype) {
  if (dtype == Dtype::q16) throw std::invalid_argument("float networks are stored as f32 or f64");
  net.validate();
  Writer w;
  write_header(w, dtype, net.input, net.layers.size());
  for (const auto& layer : net.layers) {
    std::visit(Overloaded{
                   [&](const ClassicConvLayer& l) {
                     layer_head(w, Tag::classic, l.activation, 0);
                     w.u32(l.filters.kh);
                     w.u32(l.filters.kw);
                     w.u32(l.filters.in_channels);
                     w.u32(l.filters.count);
                     w.floats(l.filters.weights, dtype);
                     w.floats(l.bias, dtype);
                   },
                   [&](const SeparatedConvParams& p) {
                     layer_head(w, Tag::separated, p.activation, p.fusion_frozen ? 1 : 0);
                     w.u32(p.k);
                     w.u32(p.in_channels);
                     w.u32(p.count);
                     w.floats(p.vertical, dtype);
                     w.floats(p.horizontal, dtype);
                     w.floats(p.fusion, dtype);
                     w.floats(p.bias, dtype);
                   },
                   [&](const DenseLayer& l) {
                     layer_head(w, Tag::dense, Activation::identity, 0);
                     w.u32(l.inputs);
                     w.u32(l.outputs);
                     w.floats(l.weights, dtype);
                     w.floats(l.bias, dtype);
                   },
                   [&](const SoftmaxLayer&) { layer_head(w, Tag::softmax, Activation::identity, 0); },
               },
               layer);
  }
  return w.take();
}

std::vector<std::uint8_t> serialize_model(const QuantizedNetwork& q) {
  Writer w;
  write_header(w, Dtype::q16, q.input, q.layers.size());
  w.put(static_cast<std::uint32_t>(q.bits));
  w.put(q.input_scale);
  for (const auto& layer : q.layers) {
    std::visit(Overloaded{
                   [&](const QuantizedClassicConv& l) {
                     layer_head(w, Tag::classic, l.activation, 0);
                     w.u32(l.kh);
                     w.u32(l.kw);
                     w.u32(l.in_channels);
                     w.u32(l.count);
                     w.fixed(l.weights);
                     w.ints(l.bias);
                     w.put(l.in_scale);
                     w.put(l.out_scale);
                   },
                   [&](const QuantizedSeparatedConv& l) {
                     layer_head(w, Tag::separated, l.activation, l.fusion_frozen ? 1 : 0);
                     w.u32(l.k);
                     w.u32(l.in_channels);
                     w.u32(l.count);
                     w.fixed(l.vertical);
                     w.fixed(l.horizontal);
                     w.fixed(l.fusion);
                     w.ints(l.bias);
                     w.put(l.in_scale);
                     w.put(l.vertical_scale);
                     w.put(l.horizontal_scale);
                     w.put(l.out_scale);
                   },
                   [&](const QuantizedDense& l) {
                     layer_head(w, Tag::dense, Activation::identity, 0);
                     w.u32(l.inputs);
                     w.u32(l.outputs);
                     w.fixed(l.weights);
                     w.ints(l.bias);
                     w.put(l.in_scale);
                     w.put(l.out_scale);
                   },
                   [&](const SoftmaxLayer&) { layer_head(w, Tag::softmax, Activation::identity, 0); },
               },
               layer);
  }
  return w.take();
}

namespace {

Layer read_float_layer(Reader& r, Tag tag, Activation act, std::uint8_t flags, Dtype dtype) {
  switch (tag) {
    case Tag::classic: {
      ClassicConvLayer l;
      const std::size_t kh = r.u32(), kw = r.u32(), c = r.u32(), count = r.u32();
      l.filters = FilterBank(kh, kw, c, count);
      l.filters.weights = r.floats(dtype, kh * kw * c * count);
      l.bias = r.floats(dtype, count);
      l.activation = act;
      return l;
    }
    case Tag::separated: {
      const std::size_t k = r.u32(), c = r.u32(), count = r.u32();
      SeparatedConvParams p(k, c, count);
      p.vertical = r.floats(dtype, count * k * c);
      p.horizontal = r.floats(dtype, count * k);
      p.fusion = r.floats(dtype, count * count);
      p.bias = r.floats(dtype, count);
      p.activation = act;
      p.fusion_frozen = (flags & 1) != 0;
      return p;
    }
    case Tag::dense: {
      const std::size_t in = r.u32(), out = r.u32();
      DenseLayer l(in, out);
      l.weights = r.floats(dtype, in * out);
      l.bias = r.floats(dtype, out);
      return l;
    }
    case Tag::softmax:
      return SoftmaxLayer{};
  }
  throw ModelFormatError("unknown layer tag");
}

QuantizedLayer read_fixed_layer(Reader& r, Tag tag, Activation act, std::uint8_t flags) {
  switch (tag) {
    case Tag::classic: {
      QuantizedClassicConv l;
      l.kh = r.u32();
      l.kw = r.u32();
      l.in_channels = r.u32();
      l.count = r.u32();
      l.weights = r.fixed({l.count, l.kh, l.kw, l.in_channels});
      l.bias = r.ints(l.count);
      l.in_scale = r.get<double>();
      l.out_scale = r.get<double>();
      l.activation = act;
      return l;
    }
    case Tag::separated: {
      QuantizedSeparatedConv l;
      l.k = r.u32();
      l.in_channels = r.u32();
      l.count = r.u32();
      l.vertical = r.fixed({l.count, l.k, l.in_channels});
      l.horizontal = r.fixed({l.count, l.k});
      l.fusion = r.fixed({l.count, l.count});
      l.bias = r.ints(l.count);
      l.in_scale = r.get<double>();
      l.vertical_scale = r.get<double>();
      l.horizontal_scale = r.get<double>();
      l.out_scale = r.get<double>();
      l.activation = act;
      l.fusion_frozen = (flags & 1) != 0;
      return l;
    }
    case Tag::dense: {
      QuantizedDense l;
      l.inputs = r.u32();
      l.outputs = r.u32();
      l.weights = r.fixed({l.outputs, l.inputs});
      l.bias = r.ints(l.outputs);
      l.in_scale = r.get<double>();
      l.out_scale = r.get<double>();
      return l;
    }
    case Tag::softmax:
      return SoftmaxLayer{};
  }
  throw ModelFormatError("unknown layer tag");
}

}  // namespace

ModelFile deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  // A short file that still matches the magic prefix is a truncated model.
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (head > 0 && std::memcmp(bytes.data(), "SEPC", head) != 0) throw BadMagicError();
  if (head < 4) throw TruncatedModelError();
  for (int i = 0; i < 4; ++i) r.u8();
  ModelFile file;
  file.version = r.get<std::uint32_t>();
  if (file.version != kModelVersion) throw UnsupportedVersionError(file.version);
  const std::uint8_t dtype = r.u8();
  if (dtype > static_cast<std::uint8_t>(Dtype::q16)) throw ModelFormatError("unknown dtype tag");
  file.dtype = static_cast<Dtype>(dtype);
  for (int i = 0; i < 3; ++i) r.u8();
  Shape3 input;
  input.height = r.u32();
  input.width = r.u32();
  input.channels = r.u32();
  const std::size_t layer_count = r.u32();

  if (file.dtype == Dtype::q16) {
    QuantizedNetwork q;
    q.input = input;
    q.bits = static_cast<int>(r.get<std::uint32_t>());
    q.input_scale = r.get<double>();
    for (std::size_t i = 0; i < layer_count; ++i) {
      const auto tag = static_cast<Tag>(r.u8());
      const Activation act = read_activation(r.u8());
      const std::uint8_t flags = r.u8();
      r.u8();
      q.layers.push_back(read_fixed_layer(r, tag, act, flags));
    }
    file.model = std::move(q);
  } else {
    Network net;
    net.input = input;
    for (std::size_t i = 0; i < layer_count; ++i) {
      const auto tag = static_cast<Tag>(r.u8());
      const Activation act = read_activation(r.u8());
      const std::uint8_t flags = r.u8();
      r.u8();
      net.layers.push_back(read_float_layer(r, tag, act, flags, file.dtype));
    }
    try {
      net.validate();
    } catch (const DimensionError& e) {
      throw ModelFormatError(std::string("inconsistent network: ") + e.what());
    }
    file.model = std::move(net);
  }
  if (r.remaining() != 0) throw ModelFormatError("trailing bytes after the last layer");
  return file;
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void save_model(const std::filesystem::path& path, const Network& net, Dtype dtype) {
  write_bytes(path, serialize_model(net, dtype));
}

void save_model(const std::filesystem::path& path, const QuantizedNetwork& qnet) {
  write_bytes(path, serialize_model(qnet));
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

Network load_network(const std::filesystem::path& path) {
  auto file = load_model(path);
  if (auto* net = std::get_if<Network>(&file.model)) return std::move(*net);
  throw ModelFormatError(path.string() + " holds a quantized model; a float model is required");
}

}  // namespace sepconv
