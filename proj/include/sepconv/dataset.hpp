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

#ifndef SEPCONV_DATASET_HPP_
#define SEPCONV_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sepconv/tensor.hpp"

namespace sepconv {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<Tensor3> images;
  std::vector<std::uint32_t> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  Shape3 shape() const { return images.empty() ? Shape3{} : images.front().shape(); }
  /// Throws DatasetError on ragged shapes, length mismatch or out-of-range labels.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Seeded shuffle, then the first round(fraction * n) samples become the training part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed);

/// IDX image file (ubyte, float32 or float64 element type; dims count x rows x cols
/// [x channels]) plus a ubyte label file. ubyte pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
/// Writes pixels as ubyte (values clamped to [0, 1], scaled by 255 and rounded).
void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

/// One sample per line: label, then height*width*channels pixel values in tensor order.
/// An optional header line is skipped when its first field is not a number.
Dataset load_csv(const std::filesystem::path& path, Shape3 shape);

/// Bilinear resampling of every image to height x width (channels unchanged).
Dataset resize_dataset(const Dataset& data, std::size_t height, std::size_t width);

/// Balanced 10-class synthetic digits: stroke-rendered glyphs with random placement,
/// size, slant, stroke width, clutter and pixel noise. Pixel values are multiples of
/// 1/255 so the set survives an IDX round-trip unchanged.
Dataset make_synthetic_digits(std::size_t count, std::uint64_t seed, Shape3 shape = {14, 20, 1});

}  // namespace sepconv

#endif  // SEPCONV_DATASET_HPP_
