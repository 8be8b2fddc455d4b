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

#ifndef SEPCONV_TENSOR_HPP_
#define SEPCONV_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sepconv {

/// Thrown whenever operand shapes do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape3 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

/// Multichannel image. Row-major, channel-minor: index = (y * width + x) * channels + c.
template <typename T>
class BasicTensor3 {
 public:
  BasicTensor3() = default;
  BasicTensor3(std::size_t height, std::size_t width, std::size_t channels)
      : shape_{height, width, channels}, data_(shape_.size(), T{}) {}
  explicit BasicTensor3(Shape3 shape) : shape_(shape), data_(shape.size(), T{}) {}
  BasicTensor3(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape_));
    }
  }

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  const Shape3& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const {
    return (y * shape_.width + x) * shape_.channels + c;
  }
  T& operator()(std::size_t y, std::size_t x, std::size_t c) { return data_[index(y, x, c)]; }
  const T& operator()(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[index(y, x, c)];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }
  std::vector<T> release() && { return std::move(data_); }

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

/// Dense row-major matrix.
template <typename T>
class BasicMatrix2 {
 public:
  BasicMatrix2() = default;
  BasicMatrix2(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}
  BasicMatrix2(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols_, cols_); }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T> release() && { return std::move(data_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Tensor3 = BasicTensor3<double>;
using Matrix2 = BasicMatrix2<double>;

/// Reinterprets an image as a (height*width) x channels matrix. No copy.
template <typename T>
BasicMatrix2<T> to_matrix(BasicTensor3<T> t) {
  const std::size_t rows = t.height() * t.width();
  const std::size_t cols = t.channels();
  return BasicMatrix2<T>(rows, cols, std::move(t).release());
}

template <typename T>
BasicTensor3<T> to_tensor(BasicMatrix2<T> m, Shape3 shape) {
  if (m.rows() != shape.height * shape.width || m.cols() != shape.channels) {
    throw DimensionError("matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         " cannot be viewed as tensor " + to_string(shape));
  }
  return BasicTensor3<T>(shape, std::move(m).release());
}

template <typename T>
BasicMatrix2<T> transpose(const BasicMatrix2<T>& m) {
  BasicMatrix2<T> out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  }
  return out;
}

/// Lowers valid stride-1 patches into rows. Row r is output pixel r (row-major),
/// columns ordered (dy, dx, c) with c fastest.
template <typename T>
BasicMatrix2<T> im2col_lower(const BasicTensor3<T>& image, std::size_t kh, std::size_t kw) {
  if (kh == 0 || kw == 0 || kh > image.height() || kw > image.width()) {
    throw DimensionError("im2col: filter " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " does not fit image " + to_string(image.shape()));
  }
  const std::size_t out_h = image.height() - kh + 1;
  const std::size_t out_w = image.width() - kw + 1;
  const std::size_t c = image.channels();
  const std::size_t run = kw * c;  // one filter row is contiguous in the image
  BasicMatrix2<T> cols(out_h * out_w, kh * run);
  const auto src = image.data();
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      auto dst = cols.row(y * out_w + x);
      for (std::size_t dy = 0; dy < kh; ++dy) {
        const std::size_t base = image.index(y + dy, x, 0);
        for (std::size_t i = 0; i < run; ++i) dst[dy * run + i] = src[base + i];
      }
    }
  }
  return cols;
}

/// Adjoint of im2col_lower: scatter-adds every patch entry back onto its source pixel.
template <typename T>
BasicTensor3<T> col2im_accumulate(const BasicMatrix2<T>& cols, Shape3 shape, std::size_t kh,
                                  std::size_t kw) {
  if (kh == 0 || kw == 0 || kh > shape.height || kw > shape.width) {
    throw DimensionError("col2im: filter does not fit shape " + to_string(shape));
  }
  const std::size_t out_h = shape.height - kh + 1;
  const std::size_t out_w = shape.width - kw + 1;
  const std::size_t run = kw * shape.channels;
  if (cols.rows() != out_h * out_w || cols.cols() != kh * run) {
    throw DimensionError("col2im: column matrix " + std::to_string(cols.rows()) + "x" +
                         std::to_string(cols.cols()) + " does not match shape " + to_string(shape));
  }
  BasicTensor3<T> image(shape);
  auto dst = image.data();
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto src = cols.row(y * out_w + x);
      for (std::size_t dy = 0; dy < kh; ++dy) {
        const std::size_t base = image.index(y + dy, x, 0);
        for (std::size_t i = 0; i < run; ++i) dst[base + i] += src[dy * run + i];
      }
    }
  }
  return image;
}

/// Matrix product with a fixed (i, k, j) loop order. The first inner term initialises
/// each output entry, so an n-term dot product costs n multiplications and n-1 additions.
template <typename T>
BasicMatrix2<T> matmul(const BasicMatrix2<T>& a, const BasicMatrix2<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  BasicMatrix2<T> out(n, m);
  if (inner == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(i);
    const auto lhs = a.row(i);
    {
      const auto rhs = b.row(0);
      const T s = lhs[0];
      for (std::size_t j = 0; j < m; ++j) dst[j] = s * rhs[j];
    }
    for (std::size_t k = 1; k < inner; ++k) {
      const auto rhs = b.row(k);
      const T s = lhs[k];
      for (std::size_t j = 0; j < m; ++j) dst[j] += s * rhs[j];
    }
  }
  return out;
}

inline bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace sepconv

#endif  // SEPCONV_TENSOR_HPP_
