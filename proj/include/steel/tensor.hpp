#pragma once
/*
 * Dense 4-D tensors (n, c, h, w) and row-major matrices.
 *
 * Storage is row-major with w fastest. Reductions and matrix products
 * accumulate in double regardless of the storage type.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "steel/error.hpp"

namespace steel {

struct Shape4 {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  constexpr std::size_t count() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

template <typename T>
class BasicTensor4 {
 public:
  using value_type = T;

  BasicTensor4() : data_(1, T(0)) {}

  explicit BasicTensor4(Shape4 shape, T fill = T(0)) : shape_(shape) {
    check_dims(shape);
    data_.assign(shape.count(), fill);
  }

  BasicTensor4(Shape4 shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    check_dims(shape);
    if (data_.size() != shape.count()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape.str());
    }
  }

  const Shape4& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data_[index(n, c, y, x)]; }
  T at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(n, c, y, x)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  template <typename U>
  BasicTensor4<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return BasicTensor4<U>(shape_, std::move(out));
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const BasicTensor4&, const BasicTensor4&) = default;

 private:
  static void check_dims(const Shape4& s) {
    if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
      throw ShapeError("tensor dims must all be >= 1, got " + s.str());
    }
  }

  Shape4 shape_{};
  std::vector<T> data_;
};

template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() : rows_(0), cols_(0) {}
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  template <typename U>
  BasicMatrix<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return BasicMatrix<U>(rows_, cols_, std::move(out));
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> data_;
};

using Tensor4 = BasicTensor4<float>;
using Matrix = BasicMatrix<float>;

namespace detail {

using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
RowMajorXd to_double(std::span<const T> values, std::size_t rows, std::size_t cols) {
  RowMajorXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

inline void require_same(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace detail

// Views a single-image tensor as C x (H*W): row i is channel i in raster order.
template <typename T>
BasicMatrix<T> reshape_to_matrix(const BasicTensor4<T>& t) {
  if (t.n() != 1) {
    throw ShapeError("reshape_to_matrix requires batch size 1, got " + std::to_string(t.n()));
  }
  return BasicMatrix<T>(t.c(), t.h() * t.w(), t.values());
}

template <typename T>
BasicTensor4<T> matrix_to_tensor(const BasicMatrix<T>& m, std::size_t h, std::size_t w) {
  if (h * w != m.cols()) {
    throw ShapeError("matrix_to_tensor: " + std::to_string(m.cols()) + " columns cannot form " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  return BasicTensor4<T>(Shape4{1, m.rows(), h, w}, std::vector<T>(m.data().begin(), m.data().end()));
}

// f * f^T with double accumulation. Only the upper triangle is computed, so
// the result is exactly symmetric.
template <typename T>
BasicMatrix<T> matmul_transposed(const BasicMatrix<T>& f) {
  const auto fd = detail::to_double(f.data(), f.rows(), f.cols());
  detail::RowMajorXd g = detail::RowMajorXd::Zero(fd.rows(), fd.rows());
  g.template selfadjointView<Eigen::Upper>().rankUpdate(fd);
  BasicMatrix<T> out(f.rows(), f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = i; j < f.rows(); ++j) {
      const auto v = static_cast<T>(g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// y += a * x
template <typename T>
void axpy(double a, const BasicTensor4<T>& x, BasicTensor4<T>& y) {
  detail::require_same(x.shape(), y.shape(), "axpy");
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) {
    ys[i] = static_cast<T>(static_cast<double>(ys[i]) + a * static_cast<double>(xs[i]));
  }
}

template <typename T>
BasicTensor4<T> scale(const BasicTensor4<T>& x, double a) {
  BasicTensor4<T> out = x;
  for (auto& v : out.data()) v = static_cast<T>(a * static_cast<double>(v));
  return out;
}

template <typename T>
BasicTensor4<T> sub(const BasicTensor4<T>& a, const BasicTensor4<T>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  BasicTensor4<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
T sum_squares(const BasicTensor4<T>& t) {
  double acc = 0.0;
  for (T v : t.data()) acc += static_cast<double>(v) * static_cast<double>(v);
  return static_cast<T>(acc);
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_finite(const BasicTensor4<T>& t, const std::string& what) {
  if (!all_finite(t.data())) throw NumericError(what + " contains non-finite values");
}

}  // namespace steel
