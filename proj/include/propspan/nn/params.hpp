#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "propspan/error.hpp"
#include "propspan/nn/rng.hpp"
#include "propspan/nn/tensor.hpp"

namespace propspan::nn {

struct Parameter {
  Tensor value;
  Tensor grad;
};

/// Named parameters with matching gradient accumulators. Iteration order is
/// the lexicographic name order, which keeps serialization and optimizer
/// updates deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init) {
    if (params_.count(name)) throw InternalError("duplicate parameter '" + name + "'");
    Tensor grad(init.shape(), 0.0);
    auto [it, _] = params_.emplace(name, Parameter{std::move(init), std::move(grad)});
    return it->second.value;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw InternalError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw InternalError("unknown parameter '" + name + "'");
    return it->second;
  }

  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }
  const Tensor& grad(const std::string& name) const { return at(name).grad; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad.fill(0.0);
  }

  void scale_grad(double factor) {
    for (auto& [_, p] : params_) {
      for (auto& g : p.grad.values()) g *= factor;
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Parameter> params_;
};

inline Tensor uniform_init(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
  auto t = Tensor::matrix(rows, cols);
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init(fan_in, fan_out, limit, rng);
}

}  // namespace propspan::nn
