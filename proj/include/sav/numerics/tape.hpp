#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "sav/numerics/grid.hpp"

namespace sav {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const FloatGrid& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recorder. Each primitive pushes its primal value together with
/// a closure that scatters the node's gradient into its parents. A node only
/// stores a closure when some ancestor requires a gradient, so inference
/// passes record values only.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const FloatGrid& grad_out)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(FloatGrid value, bool requires_grad = true) {
    require_finite(value, "tape input");
    nodes_.push_back(Node{std::move(value), {}, requires_grad, {}});
    return Var(this, nodes_.size() - 1);
  }

  Var constant(FloatGrid value) { return input(std::move(value), false); }

  const FloatGrid& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  bool requires_grad(const Var& v) const { return requires_grad(v.id()); }

  // Records an op result. `backward` is dropped when no parent needs a gradient.
  Var push(FloatGrid value, std::initializer_list<Var> parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_.at(p.id()).requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
    return Var(this, nodes_.size() - 1);
  }

  Var push(FloatGrid value, const std::vector<Var>& parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_.at(p.id()).requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
    return Var(this, nodes_.size() - 1);
  }

  // Gradient accumulator for a node, allocated on first touch.
  FloatGrid& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = FloatGrid(n.value.shape());
    return n.grad;
  }

  // Seeds d(root)/d(root) = 1 and walks the tape in reverse.
  void backward(const Var& root) {
    require(value(root.id()).size() == 1, "Tape::backward: root must be a scalar");
    for (auto& n : nodes_) n.grad = FloatGrid();
    grad_buffer(root.id())[0] = 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      const FloatGrid g = n.grad;
      n.backward(*this, g);
    }
  }

  // Gradient of the last backward root w.r.t. `v`; zeros when unreachable.
  FloatGrid grad(const Var& v) const {
    const Node& n = nodes_.at(v.id());
    return n.grad.empty() ? FloatGrid(n.value.shape()) : n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    FloatGrid value;
    FloatGrid grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const FloatGrid& Var::value() const { return tape_->value(id_); }

}  // namespace sav
