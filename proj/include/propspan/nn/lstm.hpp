#pragma once

#include <cmath>
#include <cstddef>

#include "propspan/error.hpp"
#include "propspan/nn/layers.hpp"
#include "propspan/nn/tensor.hpp"

namespace propspan::nn {

/// One LSTM direction. Gate blocks in the 4h columns are ordered
/// [input | forget | cell | output]. Zero initial state.
struct LstmWeights {
  const Tensor& wx;  // [d x 4h]
  const Tensor& wh;  // [h x 4h]
  const Tensor& b;   // [4h]

  std::size_t hidden() const { return wh.rows(); }
};

struct LstmGrads {
  Tensor& wx;
  Tensor& wh;
  Tensor& b;
};

/// Per-position activations, indexed by token position (not step order).
struct LstmCache {
  Tensor x;
  Tensor i, f, g, o, c, tanh_c, h;
  bool reverse = false;
};

inline void check_lstm_shapes(const Tensor& x, const LstmWeights& w) {
  const auto h = w.hidden();
  if (w.wh.cols() != 4 * h || w.wx.cols() != 4 * h || w.b.size() != 4 * h ||
      w.wx.rows() != x.cols()) {
    throw DataError("lstm: shape mismatch x" + shape_string(x) + " wx" + shape_string(w.wx) +
                    " wh" + shape_string(w.wh) + " b" + shape_string(w.b));
  }
}

inline Tensor lstm_forward(const Tensor& x, const LstmWeights& w, bool reverse,
                           LstmCache& cache) {
  check_lstm_shapes(x, w);
  const auto n = x.rows();
  const auto d = x.cols();
  const auto h = w.hidden();
  cache.x = x;
  cache.reverse = reverse;
  for (Tensor* t : {&cache.i, &cache.f, &cache.g, &cache.o, &cache.c, &cache.tanh_c, &cache.h}) {
    *t = Tensor::matrix(n, h);
  }
  std::vector<double> a(4 * h);
  std::vector<double> h_prev(h, 0.0);
  std::vector<double> c_prev(h, 0.0);
  for (std::size_t step = 0; step < n; ++step) {
    const auto t = reverse ? n - 1 - step : step;
    for (std::size_t j = 0; j < 4 * h; ++j) a[j] = w.b[j];
    const auto xt = x.row(t);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = xt[k];
      if (v == 0.0) continue;
      const auto wrow = w.wx.row(k);
      for (std::size_t j = 0; j < 4 * h; ++j) a[j] += v * wrow[j];
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double v = h_prev[k];
      if (v == 0.0) continue;
      const auto wrow = w.wh.row(k);
      for (std::size_t j = 0; j < 4 * h; ++j) a[j] += v * wrow[j];
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double ig = sigmoid(a[k]);
      const double fg = sigmoid(a[h + k]);
      const double gg = std::tanh(a[2 * h + k]);
      const double og = sigmoid(a[3 * h + k]);
      const double ct = fg * c_prev[k] + ig * gg;
      const double tc = std::tanh(ct);
      cache.i(t, k) = ig;
      cache.f(t, k) = fg;
      cache.g(t, k) = gg;
      cache.o(t, k) = og;
      cache.c(t, k) = ct;
      cache.tanh_c(t, k) = tc;
      cache.h(t, k) = og * tc;
    }
    for (std::size_t k = 0; k < h; ++k) {
      h_prev[k] = cache.h(t, k);
      c_prev[k] = cache.c(t, k);
    }
  }
  require_finite(cache.h, "lstm_forward");
  return cache.h;
}

/// Backpropagation through time. Returns dx [n x d].
inline Tensor lstm_backward(const LstmCache& cache, const Tensor& dh_out, const LstmWeights& w,
                            LstmGrads& grads) {
  const auto n = cache.x.rows();
  const auto d = cache.x.cols();
  const auto h = w.hidden();
  auto dx = Tensor::matrix(n, d);
  std::vector<double> dh_next(h, 0.0);
  std::vector<double> dc_next(h, 0.0);
  std::vector<double> da(4 * h);
  for (std::size_t step = n; step-- > 0;) {
    const auto t = cache.reverse ? n - 1 - step : step;
    const bool has_prev = step > 0;
    const auto prev = cache.reverse ? t + 1 : t - 1;
    for (std::size_t k = 0; k < h; ++k) {
      const double dh = dh_out(t, k) + dh_next[k];
      const double og = cache.o(t, k);
      const double tc = cache.tanh_c(t, k);
      const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
      const double ig = cache.i(t, k);
      const double fg = cache.f(t, k);
      const double gg = cache.g(t, k);
      const double c_prev = has_prev ? cache.c(prev, k) : 0.0;
      da[k] = dc * gg * ig * (1.0 - ig);
      da[h + k] = dc * c_prev * fg * (1.0 - fg);
      da[2 * h + k] = dc * ig * (1.0 - gg * gg);
      da[3 * h + k] = dh * tc * og * (1.0 - og);
      dc_next[k] = dc * fg;
    }
    for (std::size_t j = 0; j < 4 * h; ++j) grads.b[j] += da[j];
    const auto xt = cache.x.row(t);
    for (std::size_t k = 0; k < d; ++k) {
      auto grow = grads.wx.row(k);
      const auto wrow = w.wx.row(k);
      const double v = xt[k];
      double s = 0.0;
      for (std::size_t j = 0; j < 4 * h; ++j) {
        grow[j] += v * da[j];
        s += wrow[j] * da[j];
      }
      dx(t, k) = s;
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double hp = has_prev ? cache.h(prev, k) : 0.0;
      auto grow = grads.wh.row(k);
      const auto wrow = w.wh.row(k);
      double s = 0.0;
      for (std::size_t j = 0; j < 4 * h; ++j) {
        grow[j] += hp * da[j];
        s += wrow[j] * da[j];
      }
      dh_next[k] = s;
    }
  }
  return dx;
}

struct BiLstmCache {
  LstmCache forward;
  LstmCache backward;
};

/// Left-to-right and right-to-left passes, concatenated per token: [n x 2h].
inline Tensor bilstm_forward(const Tensor& x, const LstmWeights& fw, const LstmWeights& bw,
                             BiLstmCache& cache) {
  if (x.rows() == 0) throw DataError("bilstm_forward: empty sequence");
  const auto hf = lstm_forward(x, fw, false, cache.forward);
  const auto hb = lstm_forward(x, bw, true, cache.backward);
  const Tensor* parts[] = {&hf, &hb};
  return concat_cols(parts);
}

inline Tensor bilstm_backward(const BiLstmCache& cache, const Tensor& dh, const LstmWeights& fw,
                              const LstmWeights& bw, LstmGrads& gfw, LstmGrads& gbw) {
  const auto h = fw.hidden();
  const auto dx_f = lstm_backward(cache.forward, slice_cols(dh, 0, h), fw, gfw);
  const auto dx_b = lstm_backward(cache.backward, slice_cols(dh, h, bw.hidden()), bw, gbw);
  auto dx = dx_f;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_b[i];
  return dx;
}

}  // namespace propspan::nn
