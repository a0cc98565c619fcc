#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "propspan/error.hpp"

namespace propspan::nn {

/// Dense row-major tensor of doubles. Most of the library only uses rank 1
/// (vectors) and rank 2 (matrices).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)),
        data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                              std::multiplies<>()),
              fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    const auto expected = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                          std::multiplies<>());
    if (expected != data_.size()) {
      throw InternalError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape product " + std::to_string(expected));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
  static Tensor vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n}, std::move(values));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline std::string shape_string(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

inline void require_finite(const Tensor& t, std::string_view where) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + std::string(where));
  }
}

inline void require_finite(double v, std::string_view where) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in " + std::string(where));
}

/// Horizontal concatenation of matrices with equal row counts.
inline Tensor concat_cols(std::span<const Tensor* const> parts) {
  if (parts.empty()) return {};
  const auto n = parts.front()->rows();
  std::size_t width = 0;
  for (const auto* p : parts) {
    if (p->rows() != n) throw DataError("concat_cols: row count mismatch");
    width += p->cols();
  }
  auto out = Tensor::matrix(n, width);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t off = 0;
    for (const auto* p : parts) {
      const auto src = p->row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
      off += p->cols();
    }
  }
  return out;
}

/// Column block [col_begin, col_begin + width) of a matrix.
inline Tensor slice_cols(const Tensor& m, std::size_t col_begin, std::size_t width) {
  auto out = Tensor::matrix(m.rows(), width);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = m(r, col_begin + c);
  }
  return out;
}

}  // namespace propspan::nn
