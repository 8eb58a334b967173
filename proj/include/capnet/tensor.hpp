#pragma once

// Dense float tensors recorded on a per-forward-pass tape for reverse-mode
// differentiation.
//
// A Tape owns every value produced during one forward pass. Var is a cheap
// handle (tape pointer + node index). Parameters live outside the tape and are
// pulled in with Tape::param(); after Tape::backward() their gradients are
// accumulated into Parameter::grad. A tape and its Vars must stay on the
// thread that created them.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace capnet::num {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Trainable weight tensor with persistent gradient storage.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Shape shape);

  std::string name;
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;

  std::size_t size() const { return value.size(); }
  void zero_grad();
};

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

  const Shape& shape() const;
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::span<const float> value() const;
  /// Empty until a backward pass reached this node.
  std::span<const float> grad() const;
  bool requires_grad() const;
  float item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient of the node being processed and must accumulate
  /// into the gradients of its parents.
  using BackwardFn = std::function<void(Tape&, std::span<const float>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Shape shape, std::vector<float> values);
  /// Differentiable leaf that is not bound to a Parameter (used by checks).
  Var variable(Shape shape, std::vector<float> values);
  Var param(Parameter& p);
  /// Frozen binding; only allowed while gradients are disabled.
  Var param(const Parameter& p);

  /// Record an op result. `backward` is dropped when no parent requires grad.
  Var record(Shape shape, std::vector<float> values,
             std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Shape shape, std::vector<float> values,
             const std::vector<Var>& parents, BackwardFn backward);

  /// Reverse sweep from a scalar. Parameter leaves accumulate into
  /// Parameter::grad unless `accumulate` is false, in which case the caller
  /// adds them later with accumulate_param_grads() (deterministic reduction
  /// of shards computed on other threads). May be called once per tape.
  void backward(Var loss, bool accumulate = true);
  void accumulate_param_grads() const;

  /// Inference mode: param() returns constants and no backward closures are kept.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  std::size_t node_count() const { return nodes_.size(); }

  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  std::span<const float> value(std::size_t id) const { return nodes_[id].value; }
  std::span<const float> grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, zero-allocated on first use.
  std::span<float> grad_buffer(std::size_t id);

 private:
  struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  bool grad_enabled_ = true;
};

}  // namespace capnet::num
