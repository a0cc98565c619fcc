#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "propspan/error.hpp"
#include "propspan/nn/params.hpp"

namespace propspan::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-4;  // decoupled weight decay coefficient
};

inline void check_gradients(const ParamStore& store) {
  for (const auto& [name, p] : store) {
    for (double g : p.grad.values()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + name + "'");
    }
  }
}

/// Adam with decoupled L2 decay:
///   w <- w (1 - lr * l2) - lr * m_hat / (sqrt(v_hat) + eps)
/// Gradients are zeroed after every step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::size_t steps() const { return t_; }

  void step(ParamStore& store) {
    check_gradients(store);
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const double decay = 1.0 - config_.lr * config_.l2;
    for (auto& [name, p] : store) {
      auto& state = state_[name];
      if (state.m.size() != p.value.size()) {
        state.m.assign(p.value.size(), 0.0);
        state.v.assign(p.value.size(), 0.0);
      }
      auto w = p.value.values();
      auto g = p.grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        state.m[i] = config_.beta1 * state.m[i] + (1.0 - config_.beta1) * g[i];
        state.v[i] = config_.beta2 * state.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        w[i] = w[i] * decay - config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      }
      p.grad.fill(0.0);
    }
  }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> state_;
};

struct SgdConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  double l2 = 1e-4;
};

/// Heavy-ball momentum with the same decoupled decay as Adam:
///   v <- momentum * v + g;  w <- w (1 - lr * l2) - lr * v
class Sgd {
 public:
  explicit Sgd(SgdConfig config = {}) : config_(config) {}

  void step(ParamStore& store) {
    check_gradients(store);
    const double decay = 1.0 - config_.lr * config_.l2;
    for (auto& [name, p] : store) {
      auto& vel = velocity_[name];
      if (vel.size() != p.value.size()) vel.assign(p.value.size(), 0.0);
      auto w = p.value.values();
      auto g = p.grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        vel[i] = config_.momentum * vel[i] + g[i];
        w[i] = w[i] * decay - config_.lr * vel[i];
      }
      p.grad.fill(0.0);
    }
  }

 private:
  SgdConfig config_;
  std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace propspan::nn
