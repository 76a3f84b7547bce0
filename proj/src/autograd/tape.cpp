#include "i2i/autograd/tape.hpp"

#include "i2i/core/errors.hpp"

namespace i2i::ag {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(std::string name, Tensor value, bool trainable) {
  nodes_.push_back(Node{std::move(value), {}, grad_enabled_ && trainable, {}, std::move(name)});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (auto in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}, {}});
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad(Var v) {
  auto& n = nodes_.at(v.id);
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!requires_grad(v)) return;
  auto& dst = grad(v);
  if (dst.shape() != g.shape()) {
    throw ShapeError("gradient shape " + shape_to_string(g.shape()) + " does not match value " +
                     shape_to_string(dst.shape()));
  }
  double* d = dst.data();
  const double* s = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) d[i] += s[i];
}

void Tape::backward(Var output, double seed) {
  if (!grad_enabled_) throw StructuralError("backward() on a tape recorded without gradients");
  if (value(output).size() != 1) {
    throw ShapeError("backward() needs a single-element output, got " + shape_to_string(value(output).shape()));
  }
  if (!requires_grad(output)) return;
  grad(output)[0] += seed;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

std::map<std::string, Tensor> Tape::parameter_gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& n : nodes_) {
    if (n.param_name.empty() || !n.requires_grad) continue;
    // A parameter bound more than once (e.g. one discriminator applied to
    // several images) contributes the sum over its nodes.
    auto it = out.try_emplace(n.param_name, Tensor(n.value.shape())).first;
    if (n.grad.empty()) continue;
    if (it->second.shape() != n.value.shape()) {
      throw StructuralError("parameter " + n.param_name + " bound with two different shapes");
    }
    auto dst = it->second.values();
    const auto src = n.grad.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

Var ParamBinder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  const auto full = prefix_ + name;
  const auto& p = params_.at(full);
  auto v = tape_.parameter(full, p.value, p.trainable);
  bound_.emplace(name, v);
  return v;
}

}  // namespace i2i::ag
