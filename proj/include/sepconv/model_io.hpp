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

// Model container, little-endian throughout:
//
//   "SEPC" | u32 version | u8 dtype | 3 x u8 zero | u32 height, width, channels | u32 layer count
//   q16 only: u32 bits | f64 input scale
//   per layer: u8 tag | u8 activation | u8 flags | u8 zero | u32 dims... | tensors...
//
// Layer tags: 1 classic conv (dims kh kw C L; weights, bias), 2 separated conv
// (dims k C L; vertical, horizontal, fusion, bias; flag bit 0 = frozen fusion),
// 3 dense (dims in out; weights, bias), 4 softmax (no dims).
// Float tensor: u64 count, then count f32 or f64 values.
// q16 weight tensor: u64 count, f64 scale, count i16 values. q16 bias: u64 count, i64 values.
// q16 layers append their activation scales as f64: classic and dense (in, out),
// separated (in, vertical, horizontal, out).

#ifndef SEPCONV_MODEL_IO_HPP_
#define SEPCONV_MODEL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "sepconv/network.hpp"
#include "sepconv/quantizer.hpp"

namespace sepconv {

inline constexpr std::uint32_t kModelVersion = 1;

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, q16 = 2 };

std::string_view to_string(Dtype d);
Dtype parse_dtype(std::string_view name);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public ModelFormatError {
 public:
  BadMagicError() : ModelFormatError("bad magic: not a SEPC model file") {}
};
class UnsupportedVersionError : public ModelFormatError {
 public:
  explicit UnsupportedVersionError(std::uint32_t v)
      : ModelFormatError("unsupported version " + std::to_string(v) + " (this build reads version " +
                         std::to_string(kModelVersion) + ")") {}
};
class TruncatedModelError : public ModelFormatError {
 public:
  TruncatedModelError() : ModelFormatError("truncated model file") {}
};

struct ModelFile {
  std::uint32_t version = kModelVersion;
  Dtype dtype = Dtype::f64;
  std::variant<Network, QuantizedNetwork> model;
};

/// dtype must be f32 or f64; f32 rounds every parameter to single precision.
std::vector<std::uint8_t> serialize_model(const Network& net, Dtype dtype = Dtype::f64);
std::vector<std::uint8_t> serialize_model(const QuantizedNetwork& qnet);
ModelFile deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const Network& net, Dtype dtype = Dtype::f64);
void save_model(const std::filesystem::path& path, const QuantizedNetwork& qnet);
ModelFile load_model(const std::filesystem::path& path);
/// Throws ModelFormatError if the file holds a quantized model.
Network load_network(const std::filesystem::path& path);

}  // namespace sepconv

#endif  // SEPCONV_MODEL_IO_HPP_
