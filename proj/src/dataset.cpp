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

#include "sepconv/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "sepconv/random.hpp"

namespace sepconv {

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw DatasetError("dataset has " + std::to_string(images.size()) + " images but " +
                       std::to_string(labels.size()) + " labels");
  }
  const Shape3 s = shape();
  for (const auto& img : images) {
    if (img.shape() != s) throw DatasetError("dataset images do not share one shape");
  }
  for (auto l : labels) {
    if (l >= class_count) {
      throw DatasetError("label " + std::to_string(l) + " outside " + std::to_string(class_count) + " classes");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_count = class_count;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
  if (data.empty()) throw DatasetError("cannot split an empty dataset");
  data.validate();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  const std::span<const std::size_t> all(order);
  return {data.subset(all.first(n_train)), data.subset(all.subspan(n_train))};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint8_t kIdxUbyte = 0x08;
constexpr std::uint8_t kIdxFloat32 = 0x0D;
constexpr std::uint8_t kIdxFloat64 = 0x0E;

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<char>& buf, std::size_t offset) {
  if (offset + 4 > buf.size()) throw DatasetError("IDX header truncated");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(buf[offset + i]);
  return v;
}

struct IdxHeader {
  std::uint8_t type = 0;
  std::vector<std::uint32_t> dims;
  std::size_t payload_offset = 0;
};

IdxHeader parse_idx_header(const std::vector<char>& buf, const std::filesystem::path& path) {
  if (buf.size() < 4 || buf[0] != 0 || buf[1] != 0) throw DatasetError(path.string() + ": not an IDX file");
  IdxHeader h;
  h.type = static_cast<std::uint8_t>(buf[2]);
  const auto ndims = static_cast<std::uint8_t>(buf[3]);
  for (std::size_t i = 0; i < ndims; ++i) h.dims.push_back(read_be32(buf, 4 + 4 * i));
  h.payload_offset = 4 + 4 * static_cast<std::size_t>(ndims);
  return h;
}

template <typename U>
U read_be(const char* p) {
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), p, sizeof(U));
  if constexpr (std::endian::native == std::endian::little) std::reverse(bytes.begin(), bytes.end());
  U v;
  std::memcpy(&v, bytes.data(), sizeof(U));
  return v;
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto ibuf = read_file(images_path);
  const auto lbuf = read_file(labels_path);
  const IdxHeader ih = parse_idx_header(ibuf, images_path);
  const IdxHeader lh = parse_idx_header(lbuf, labels_path);
  if (ih.dims.size() != 3 && ih.dims.size() != 4) {
    throw DatasetError(images_path.string() + ": expected 3 or 4 dimensions");
  }
  if (lh.type != kIdxUbyte || lh.dims.size() != 1) throw DatasetError(labels_path.string() + ": expected ubyte vector");
  const std::size_t count = ih.dims[0];
  if (lh.dims[0] != count) throw DatasetError("image and label counts differ");
  const Shape3 shape{ih.dims[1], ih.dims[2], ih.dims.size() == 4 ? ih.dims[3] : 1u};
  std::size_t elem = 0;
  switch (ih.type) {
    case kIdxUbyte:
      elem = 1;
      break;
    case kIdxFloat32:
      elem = 4;
      break;
    case kIdxFloat64:
      elem = 8;
      break;
    default:
      throw DatasetError(images_path.string() + ": unsupported IDX element type");
  }
  if (ibuf.size() < ih.payload_offset + count * shape.size() * elem) throw DatasetError(images_path.string() + ": truncated");
  if (lbuf.size() < lh.payload_offset + count) throw DatasetError(labels_path.string() + ": truncated");

  Dataset d;
  d.images.reserve(count);
  d.labels.reserve(count);
  const char* p = ibuf.data() + ih.payload_offset;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor3 img(shape);
    for (auto& v : img.data()) {
      if (ih.type == kIdxUbyte) {
        v = static_cast<std::uint8_t>(*p) / 255.0;
      } else if (ih.type == kIdxFloat32) {
        v = read_be<float>(p);
      } else {
        v = read_be<double>(p);
      }
      p += elem;
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(static_cast<std::uint8_t>(lbuf[lh.payload_offset + i]));
  }
  d.class_count = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  d.validate();
  return d;
}

void save_idx(const Dataset& data, const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  data.validate();
  if (data.class_count > 256) throw DatasetError("IDX labels are single bytes; at most 256 classes");
  const Shape3 s = data.shape();
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw DatasetError("cannot write IDX files");
  const bool has_channels = s.channels != 1;
  img.put(0).put(0).put(static_cast<char>(kIdxUbyte)).put(static_cast<char>(has_channels ? 4 : 3));
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(s.height));
  write_be32(img, static_cast<std::uint32_t>(s.width));
  if (has_channels) write_be32(img, static_cast<std::uint32_t>(s.channels));
  for (const auto& t : data.images) {
    for (double v : t.data()) {
      const double q = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0);
      img.put(static_cast<char>(static_cast<std::uint8_t>(q)));
    }
  }
  lab.put(0).put(0).put(static_cast<char>(kIdxUbyte)).put(1);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (auto l : data.labels) lab.put(static_cast<char>(l));
  if (!img || !lab) throw DatasetError("failed writing IDX files");
}

// ---------------------------------------------------------------------------
// CSV

Dataset load_csv(const std::filesystem::path& path, Shape3 shape) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
      } catch (const std::exception&) {
        if (line_no == 1 && values.empty()) break;  // header
        throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      }
    }
    if (values.empty()) continue;
    if (values.size() != 1 + shape.size()) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(1 + shape.size()) + " fields, got " + std::to_string(values.size()));
    }
    if (values[0] < 0 || values[0] != std::floor(values[0])) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    d.labels.push_back(static_cast<std::uint32_t>(values[0]));
    d.images.emplace_back(shape, std::vector<double>(values.begin() + 1, values.end()));
  }
  d.class_count = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  d.validate();
  return d;
}

Dataset resize_dataset(const Dataset& data, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DimensionError("resize target must be positive");
  Dataset out;
  out.class_count = data.class_count;
  out.labels = data.labels;
  out.images.reserve(data.size());
  for (const auto& src : data.images) {
    Tensor3 dst(height, width, src.channels());
    const double sy = static_cast<double>(src.height()) / static_cast<double>(height);
    const double sx = static_cast<double>(src.width()) / static_cast<double>(width);
    for (std::size_t y = 0; y < height; ++y) {
      const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
      const auto y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, src.height() - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t x = 0; x < width; ++x) {
        const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
        const auto x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, src.width() - 1);
        const double wx = fx - static_cast<double>(x0);
        for (std::size_t c = 0; c < src.channels(); ++c) {
          const double top = src(y0, x0, c) * (1 - wx) + src(y0, x1, c) * wx;
          const double bottom = src(y1, x0, c) * (1 - wx) + src(y1, x1, c) * wx;
          dst(y, x, c) = top * (1 - wy) + bottom * wy;
        }
      }
    }
    out.images.push_back(std::move(dst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic digits

namespace {

struct Point {
  double x;
  double y;
};
using Stroke = std::vector<Point>;

Stroke ellipse(double cx, double cy, double rx, double ry, double from = 0.0, double to = 2 * std::numbers::pi,
               int steps = 14) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double t = from + (to - from) * i / steps;
    s.push_back({cx + rx * std::sin(t), cy - ry * std::cos(t)});
  }
  return s;
}

// Glyphs in a unit box, x to the right and y downwards.
std::vector<Stroke> glyph(int digit) {
  using std::numbers::pi;
  switch (digit) {
    case 0:
      return {ellipse(0.5, 0.5, 0.5, 0.5)};
    case 1:
      return {{{0.2, 0.25}, {0.6, 0.0}, {0.6, 1.0}}};
    case 2:
      return {ellipse(0.5, 0.28, 0.48, 0.28, -0.45 * pi, 0.55 * pi, 8), {{0.95, 0.36}, {0.0, 1.0}, {1.0, 1.0}}};
    case 3:
      return {ellipse(0.48, 0.26, 0.42, 0.26, -0.4 * pi, 0.95 * pi, 8), ellipse(0.48, 0.74, 0.5, 0.26, 0.05 * pi, 1.4 * pi, 8)};
    case 4:
      return {{{0.72, 1.0}, {0.72, 0.0}, {0.0, 0.68}, {1.0, 0.68}}};
    case 5:
      return {{{0.95, 0.0}, {0.12, 0.0}, {0.05, 0.45}}, ellipse(0.45, 0.7, 0.5, 0.3, -0.25 * pi, 1.3 * pi, 8)};
    case 6:
      return {{{0.85, 0.02}, {0.35, 0.2}, {0.05, 0.62}}, ellipse(0.5, 0.7, 0.45, 0.3)};
    case 7:
      return {{{0.0, 0.0}, {1.0, 0.0}, {0.35, 1.0}}};
    case 8:
      return {ellipse(0.5, 0.25, 0.38, 0.25), ellipse(0.5, 0.73, 0.48, 0.27)};
    case 9:
      return {ellipse(0.5, 0.3, 0.45, 0.3), {{0.95, 0.3}, {0.85, 0.75}, {0.35, 1.0}}};
    default:
      return {};
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

void draw(Tensor3& img, const std::vector<Stroke>& strokes, double thickness, double intensity) {
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const Point p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
      double d = 1e9;
      for (const auto& s : strokes) {
        for (std::size_t i = 0; i + 1 < s.size(); ++i) d = std::min(d, segment_distance(p, s[i], s[i + 1]));
      }
      const double ink = std::clamp(thickness + 0.5 - d, 0.0, 1.0) * intensity;
      for (std::size_t c = 0; c < img.channels(); ++c) img(y, x, c) = std::max(img(y, x, c), ink);
    }
  }
}

}  // namespace

Dataset make_synthetic_digits(std::size_t count, std::uint64_t seed, Shape3 shape) {
  if (shape.height < 8 || shape.width < 8 || shape.channels == 0) {
    throw DimensionError("synthetic digits need at least 8x8 images");
  }
  Rng rng(seed);
  Dataset d;
  d.class_count = 10;
  d.images.reserve(count);
  d.labels.reserve(count);
  const double H = static_cast<double>(shape.height);
  const double W = static_cast<double>(shape.width);
  for (std::size_t i = 0; i < count; ++i) {
    const int digit = static_cast<int>(i % 10);
    const double gh = H * uniform(rng, 0.62, 0.85);
    const double gw = gh * uniform(rng, 0.5, 0.78);
    const double cx = W / 2 + uniform(rng, -0.3, 0.3) * (W - gw);
    const double cy = H / 2 + uniform(rng, -0.35, 0.35) * (H - gh);
    const double slant = uniform(rng, -0.3, 0.3);
    const double jitter = 0.05;
    auto strokes = glyph(digit);
    for (auto& s : strokes) {
      for (auto& p : s) {
        const double ux = p.x + uniform(rng, -jitter, jitter) - 0.5;
        const double uy = p.y + uniform(rng, -jitter, jitter) - 0.5;
        p = {cx + ux * gw - slant * uy * gh, cy + uy * gh};
      }
    }
    Tensor3 img(shape);
    draw(img, strokes, uniform(rng, 0.35, 0.9), uniform(rng, 0.7, 1.0));
    if (uniform01(rng) < 0.4) {
      // clutter: a short faint stroke somewhere in the frame
      const Point a{uniform(rng, 0, W), uniform(rng, 0, H)};
      const Point b{a.x + uniform(rng, -4, 4), a.y + uniform(rng, -4, 4)};
      draw(img, {{a, b}}, 0.3, uniform(rng, 0.2, 0.5));
    }
    const double sigma = uniform(rng, 0.03, 0.12);
    for (auto& v : img.data()) {
      v = std::clamp(v + sigma * gaussian(rng), 0.0, 1.0);
      v = std::nearbyint(v * 255.0) / 255.0;
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(static_cast<std::uint32_t>(digit));
  }
  return d;
}

}  // namespace sepconv
