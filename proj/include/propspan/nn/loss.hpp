#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "propspan/error.hpp"
#include "propspan/nn/layers.hpp"

namespace propspan::nn {

inline constexpr double kDefaultLogitClamp = 30.0;

struct ScalarLoss {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d logit
};

struct VectorLoss {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

/// Weighted binary cross-entropy on a single logit; target in {0, 1}.
inline ScalarLoss sigmoid_bce(double logit, int target, double weight,
                              double clamp = kDefaultLogitClamp) {
  if (weight < 0) throw DataError("sigmoid_bce: negative weight");
  const double z = std::clamp(logit, -clamp, clamp);
  // softplus(z) - t z, computed without overflow
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  ScalarLoss out;
  out.loss = weight * (softplus - target * z);
  out.grad = weight * (sigmoid(z) - target);
  return out;
}

/// Weighted softmax cross-entropy; the sample weight is class_weights[target].
inline VectorLoss softmax_ce(std::span<const double> logits, std::size_t target,
                             std::span<const double> class_weights,
                             double clamp = kDefaultLogitClamp) {
  const auto k = logits.size();
  if (target >= k || class_weights.size() != k) {
    throw DataError("softmax_ce: target " + std::to_string(target) + " or weights out of range");
  }
  const double w = class_weights[target];
  if (w < 0) throw DataError("softmax_ce: negative class weight");
  std::vector<double> z(k);
  double zmax = -clamp;
  for (std::size_t j = 0; j < k; ++j) {
    z[j] = std::clamp(logits[j], -clamp, clamp);
    zmax = std::max(zmax, z[j]);
  }
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  VectorLoss out;
  out.loss = w * (lse - z[target]);
  out.grad.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    out.grad[j] = w * (std::exp(z[j] - lse) - (j == target ? 1.0 : 0.0));
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  double zmax = logits.empty() ? 0.0 : logits[0];
  for (double v : logits) zmax = std::max(zmax, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) sum += (p[j] = std::exp(logits[j] - zmax));
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace propspan::nn
