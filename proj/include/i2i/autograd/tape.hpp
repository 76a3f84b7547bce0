#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>

#include "i2i/core/parameter_set.hpp"
#include "i2i/core/tensor.hpp"

namespace i2i::ag {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode differentiation tape.
///
/// Every op appends a node holding its value and a closure that pushes the
/// node's gradient into its inputs. Nodes are only ever appended, so node
/// order is a valid topological order and backward() simply walks it in
/// reverse. A node requires a gradient when any of its inputs does; frozen
/// parameters and constants never do, so no gradient can reach them.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  /// With grad_enabled = false no closures are stored and backward() is an error.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Trainable parameters require gradients; frozen ones behave like constants.
  Var parameter(std::string name, Tensor value, bool trainable);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// Zero-initialized gradient buffer of v, allocated on first use.
  Tensor& grad(Var v);
  void accumulate(Var v, const Tensor& g);

  /// Seeds d(output)/d(output) = seed (output must hold a single element)
  /// and propagates to every node that requires a gradient.
  void backward(Var output, double seed = 1.0);

  /// Gradients of trainable parameters keyed by name; parameters the output
  /// does not depend on get zero tensors.
  std::map<std::string, Tensor> parameter_gradients() const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string param_name;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

/// Binds a ParameterSet onto a tape on demand, one node per name.
///
/// With a prefix, a request for "x" binds the entry named prefix + "x"; this
/// lets a sub-network reuse its usual names inside a larger parameter set.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const ParameterSet& params, std::string prefix = {})
      : tape_(tape), params_(params), prefix_(std::move(prefix)) {}

  /// The bound node for name (created on first request).
  Var operator()(const std::string& name);
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  const ParameterSet& params_;
  std::string prefix_;
  std::map<std::string, Var, std::less<>> bound_;
};

}  // namespace i2i::ag
