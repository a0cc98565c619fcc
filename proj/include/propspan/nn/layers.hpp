#pragma once

// Stateless layer kernels with explicit backward passes. Backward functions
// accumulate (+=) into parameter gradients and overwrite input gradients.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "propspan/error.hpp"
#include "propspan/nn/tensor.hpp"

namespace propspan::nn {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// y = x W + b for x [n x d], W [d x k], b [k].
inline Tensor fc_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || x.cols() != w.rows() || b.size() != w.cols()) {
    throw DataError("fc_forward: shape mismatch x" + shape_string(x) + " W" + shape_string(w) +
                    " b" + shape_string(b));
  }
  const auto n = x.rows();
  const auto d = w.rows();
  const auto k = w.cols();
  auto y = Tensor::matrix(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    auto out = y.row(r);
    for (std::size_t j = 0; j < k; ++j) out[j] = b[j];
    const auto in = x.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const auto wrow = w.row(i);
      for (std::size_t j = 0; j < k; ++j) out[j] += xi * wrow[j];
    }
  }
  require_finite(y, "fc_forward");
  return y;
}

/// Given dy [n x k]: dW += x^T dy, db += colsum(dy), dx = dy W^T (if dx).
inline void fc_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx,
                        Tensor& dw, Tensor& db) {
  const auto n = x.rows();
  const auto d = w.rows();
  const auto k = w.cols();
  if (dy.rows() != n || dy.cols() != k || !dw.same_shape(w) || db.size() != k) {
    throw DataError("fc_backward: shape mismatch");
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto g = dy.row(r);
    const auto in = x.row(r);
    for (std::size_t j = 0; j < k; ++j) db[j] += g[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      auto dwrow = dw.row(i);
      for (std::size_t j = 0; j < k; ++j) dwrow[j] += xi * g[j];
    }
  }
  if (dx != nullptr) {
    *dx = Tensor::matrix(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      const auto g = dy.row(r);
      auto out = dx->row(r);
      for (std::size_t i = 0; i < d; ++i) {
        const auto wrow = w.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += wrow[j] * g[j];
        out[i] = s;
      }
    }
  }
}

inline Tensor embedding_lookup(std::span<const std::size_t> ids, const Tensor& table) {
  const auto d = table.cols();
  auto out = Tensor::matrix(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= table.rows()) {
      throw DataError("embedding id " + std::to_string(ids[r]) + " out of range for table of " +
                      std::to_string(table.rows()) + " rows");
    }
    const auto src = table.row(ids[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

/// Scatter-add dy rows into the table gradient; repeated ids accumulate.
inline void embedding_backward(std::span<const std::size_t> ids, const Tensor& dy,
                               Tensor& dtable) {
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto dst = dtable.row(ids[r]);
    const auto g = dy.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) dst[c] += g[c];
  }
}

inline Tensor mean_pool(const Tensor& x) {
  if (x.rows() == 0) throw DataError("mean_pool of zero rows");
  auto out = Tensor::vector(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) out[c] += in[c];
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (auto& v : out.values()) v *= inv;
  return out;
}

inline Tensor mean_pool_backward(const Tensor& dy, std::size_t n) {
  auto dx = Tensor::matrix(n, dy.size());
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dy.size(); ++c) dx(r, c) = dy[c] * inv;
  }
  return dx;
}

}  // namespace propspan::nn
