#include "i2i/training/adam.hpp"

#include <cmath>

#include "i2i/core/errors.hpp"

namespace i2i {

AdamState init_adam(const ParameterSet& params) {
  AdamState s;
  for (const auto& [name, p] : params) {
    if (!p.trainable) continue;
    s.m.emplace(name, Tensor(p.value.shape()));
    s.v.emplace(name, Tensor(p.value.shape()));
  }
  return s;
}

void adam_step(ParameterSet& params, AdamState& state, const std::map<std::string, Tensor>& grads,
               const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name) || !params.at(name).trainable) {
      throw StructuralError("gradient supplied for non-trainable parameter " + name);
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    auto mi = state.m.find(name);
    auto vi = state.v.find(name);
    if (mi == state.m.end() || vi == state.v.end()) {
      throw StructuralError("optimizer state missing for trainable parameter " + name);
    }
    const auto gi = grads.find(name);
    auto pv = p.value.values();
    auto mv = mi->second.values();
    auto vv = vi->second.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double g = gi == grads.end() ? 0.0 : gi->second.data()[i];
      mv[i] = config.beta1 * mv[i] + (1.0 - config.beta1) * g;
      vv[i] = config.beta2 * vv[i] + (1.0 - config.beta2) * g * g;
      const double mhat = mv[i] / c1;
      const double vhat = vv[i] / c2;
      pv[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

}  // namespace i2i
