#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "eeg2text/numcore/parameter.hpp"
#include "eeg2text/numcore/rng.hpp"
#include "eeg2text/numcore/tensor.hpp"

namespace eeg2text::numcore {

template <class T>
class Tape;

// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Recorded forward computation. A tape is also the forward context: it knows
// whether it runs in training mode and owns the dropout stream, so inference
// over frozen parameters only needs a fresh local tape.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(bool training, std::uint64_t dropout_seed) : training_(training), rng_(dropout_seed) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const noexcept { return training_; }
  Rng& rng() noexcept { return rng_; }

  Var<T> constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, false});
    return {this, nodes_.size() - 1};
  }

  // Leaf bound to a parameter. Repeated calls within one tape reuse the leaf.
  Var<T> param(const Parameter<T>& p) {
    auto it = param_leaf_.find(&p);
    if (it != param_leaf_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, nullptr, const_cast<Parameter<T>*>(&p), true});
    param_leaf_.emplace(&p, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
  }

  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : nullptr, nullptr, needs});
    return {this, nodes_.size() - 1};
  }

  Var<T> push(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : nullptr, nullptr, needs});
    return {this, nodes_.size() - 1};
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient slot of a node, allocated as zeros on first touch.
  Tensor<T>& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar loss; parameter gradients are added to
  // Parameter::grad. Calling twice accumulates twice.
  void backward(Var<T> loss) {
    sweep(loss, [](Parameter<T>& p) -> Tensor<T>& { return p.grad; });
  }

  // Same sweep, but parameter gradients are added to `sink[param.slot]`.
  void backward(Var<T> loss, GradBuffer<T>& sink) {
    sweep(loss, [&sink](Parameter<T>& p) -> Tensor<T>& { return sink[p.slot]; });
  }

  // Same sweep with a caller-chosen destination per parameter; used when one
  // tape spans parameters of several stores.
  using SinkFn = std::function<Tensor<T>&(Parameter<T>&)>;
  void backward(Var<T> loss, const SinkFn& sink) { sweep(loss, sink); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param;
    bool needs_grad;
  };

  template <class Sink>
  void sweep(Var<T> loss, const Sink& sink) {
    if (loss.tape != this) throw std::invalid_argument("loss belongs to a different tape");
    if (nodes_[loss.id].value.size() != 1) {
      throw ShapeError("backward requires a scalar loss, got " +
                       shape_to_string(nodes_[loss.id].value.shape()));
    }
    for (auto& n : nodes_) n.grad = Tensor<T>();
    grad(loss.id)[0] = T{1};
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, id);
      } else if (n.param) {
        Tensor<T>& dst = sink(*n.param);
        const Tensor<T>& g = n.grad;
        for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
      }
    }
  }

  std::deque<Node> nodes_;  // deque keeps value references stable across pushes
  std::unordered_map<const Parameter<T>*, std::size_t> param_leaf_;
  bool training_ = false;
  Rng rng_{0};
};

}  // namespace eeg2text::numcore
