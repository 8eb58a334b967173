#include "capnet/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace capnet::num {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Parameter::Parameter(std::string n, Shape s)
    : name(std::move(n)), shape(std::move(s)) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("parameter " + name + ": zero-sized dimension");
  }
  value.assign(element_count(shape), 0.0f);
  grad.assign(value.size(), 0.0f);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

const Shape& Var::shape() const { return tape_->shape(id_); }
std::size_t Var::size() const { return tape_->value(id_).size(); }
std::span<const float> Var::value() const { return tape_->value(id_); }
std::span<const float> Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

float Var::item() const {
  if (size() != 1) {
    throw ShapeError("item() on non-scalar tensor " + shape_string(shape()));
  }
  return value()[0];
}

Var Tape::push(Node node) {
  if (element_count(node.shape) != node.value.size()) {
    throw ShapeError("tensor shape " + shape_string(node.shape) + " holds " +
                     std::to_string(element_count(node.shape)) +
                     " elements, got " + std::to_string(node.value.size()));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Shape shape, std::vector<float> values) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  return push(std::move(n));
}

Var Tape::variable(Shape shape, std::vector<float> values) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.shape = p.shape;
  n.value = p.value;
  if (grad_enabled_) {
    n.requires_grad = true;
    n.param = &p;
  }
  return push(std::move(n));
}

Var Tape::param(const Parameter& p) {
  if (grad_enabled_) {
    throw std::logic_error("parameter " + p.name + " bound read-only on a tape that records gradients");
  }
  return constant(p.shape, p.value);
}

Var Tape::record(Shape shape, std::vector<float> values,
                 std::initializer_list<Var> parents, BackwardFn backward) {
  return record(std::move(shape), std::move(values), std::vector<Var>(parents),
                std::move(backward));
}

Var Tape::record(Shape shape, std::vector<float> values,
                 const std::vector<Var>& parents, BackwardFn backward) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  for (const Var& p : parents) {
    if (p.tape() != this) {
      throw std::invalid_argument("op mixes tensors from different tapes");
    }
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

std::span<float> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0f);
  return n.grad;
}

void Tape::backward(Var loss, bool accumulate) {
  if (loss.tape() != this) throw std::invalid_argument("loss is not on this tape");
  if (loss.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     shape_string(loss.shape()));
  }
  if (backward_done_) throw std::logic_error("backward() already ran on this tape");
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;

  grad_buffer(loss.id())[0] = 1.0f;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    // The callback may allocate parent gradient buffers but never adds nodes,
    // so `n` stays valid.
    n.backward(*this, n.grad);
  }
  if (accumulate) accumulate_param_grads();
}

void Tape::accumulate_param_grads() const {
  for (const Node& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    auto& dst = n.param->grad;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad[j];
  }
}

}  // namespace capnet::num
