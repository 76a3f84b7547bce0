#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "i2i/core/parameter_set.hpp"

namespace i2i {

struct AdamConfig {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments for the trainable entries of one ParameterSet.
struct AdamState {
  std::map<std::string, Tensor, std::less<>> m;
  std::map<std::string, Tensor, std::less<>> v;
  std::uint64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

/// Zero moments for every trainable parameter; frozen ones get no state.
AdamState init_adam(const ParameterSet& params);

/// One bias-corrected Adam update of every trainable parameter:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
/// A trainable parameter without a gradient entry is treated as g = 0.
/// Throws StructuralError if a gradient names a frozen or unknown parameter.
void adam_step(ParameterSet& params, AdamState& state, const std::map<std::string, Tensor>& grads,
               const AdamConfig& config);

}  // namespace i2i
