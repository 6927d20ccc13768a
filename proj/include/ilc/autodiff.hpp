// Copyright 2026 The ILC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over Tensor values.
//
// A Tape records every op in creation order, so replaying the recorded
// adjoints back to front visits the graph in reverse topological order.
// A tape is single-threaded and meant to live for one training step.
// Tapes created with record=false compute values only and keep nothing.

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ilc/errors.hpp"
#include "ilc/tensor.hpp"

namespace ilc {

struct ParamId {
  int group = 0;
  int index = 0;
  friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  std::uint64_t version = 0;  // bumped on every write; caches key on it
};

// Ordered, named parameter blocks belonging to one model component.
template <class T>
class ParamStore {
 public:
  explicit ParamStore(int group = 0) : group_(group) {}

  int add(std::string name, Tensor<T> init) {
    params_.push_back(Param<T>{std::move(name), std::move(init), 0});
    return static_cast<int>(params_.size()) - 1;
  }

  [[nodiscard]] int group() const { return group_; }
  [[nodiscard]] int size() const { return static_cast<int>(params_.size()); }
  [[nodiscard]] ParamId id(int i) const { return {group_, i}; }

  Param<T>& operator[](int i) { return params_.at(static_cast<std::size_t>(i)); }
  const Param<T>& operator[](int i) const { return params_.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] const Tensor<T>& value(int i) const { return (*this)[i].value; }

  // Replace a block's contents; shape must not change.
  void set(int i, Tensor<T> v) {
    auto& p = (*this)[i];
    require_same_shape(p.value.shape(), v.shape(), ("ParamStore::set " + p.name).c_str());
    p.value = std::move(v);
    ++p.version;
  }
  void touch(int i) { ++(*this)[i].version; }

  [[nodiscard]] std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  template <class U>
  [[nodiscard]] ParamStore<U> cast() const {
    ParamStore<U> out(group_);
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  int group_;
  std::vector<Param<T>> params_;
};

template <class T>
class Tape;

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool grad_ready = false;
  bool requires_grad = false;
  std::optional<ParamId> param;
  std::function<void()> backward;

  // Gradient accumulator, zero-initialized on first touch.
  Tensor<T>& grad_buf() {
    if (!grad_ready) {
      grad = Tensor<T>(value.shape(), T(0));
      grad_ready = true;
    }
    return grad;
  }
};

template <class T>
class Var {
 public:
  Var() = default;
  Var(std::shared_ptr<Node<T>> node, Tape<T>* tape) : node_(std::move(node)), tape_(tape) {}

  [[nodiscard]] const Tensor<T>& value() const { return node_->value; }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] Tape<T>& tape() const { return *tape_; }
  [[nodiscard]] Node<T>* node() const { return node_.get(); }
  [[nodiscard]] bool valid() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
  Tape<T>* tape_ = nullptr;
};

template <class T>
using GradMap = std::map<ParamId, Tensor<T>>;

template <class T>
class Tape {
 public:
  explicit Tape(bool record = true) : recording_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] bool recording() const { return recording_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return keep(std::move(n));
  }

  Var<T> param(const ParamStore<T>& store, int index) {
    auto n = std::make_shared<Node<T>>();
    n->value = store.value(index);
    n->param = store.id(index);
    n->requires_grad = recording_;
    return keep(std::move(n));
  }

  // Emit a derived node. `adjoint(out)` runs during the reverse sweep with
  // out.grad populated and must accumulate into each input's grad_buf().
  Var<T> emit(Tensor<T> value, std::initializer_list<const Var<T>*> inputs,
              std::function<void(Node<T>&)> adjoint) {
    return emit(std::move(value), std::vector<const Var<T>*>(inputs), std::move(adjoint));
  }

  Var<T> emit(Tensor<T> value, const std::vector<const Var<T>*>& inputs,
              std::function<void(Node<T>&)> adjoint) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    bool needs = false;
    for (const Var<T>* in : inputs) needs = needs || in->requires_grad();
    n->requires_grad = recording_ && needs;
    if (n->requires_grad) {
      Node<T>* raw = n.get();
      n->backward = [raw, fn = std::move(adjoint)]() { fn(*raw); };
    }
    return keep(std::move(n));
  }

  // Reverse sweep from a scalar root. Every parameter leaf on the tape gets
  // an entry (zeros if unreached); constants get none.
  GradMap<T> backward(const Var<T>& root) {
    if (!root.shape().is_scalar()) {
      throw ShapeError("backward: root must be scalar, got " + root.shape().str());
    }
    if (!root.requires_grad()) {
      std::cerr << "warning: backward on a graph with no parameter dependence\n";
      return {};
    }
    for (auto& n : nodes_) n->grad_ready = false;
    root.node()->grad_buf()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.backward && n.grad_ready) n.backward();
    }
    GradMap<T> grads;
    for (auto& n : nodes_) {
      if (!n->param) continue;
      auto [slot, inserted] = grads.try_emplace(*n->param, n->value.shape(), T(0));
      if (n->grad_ready) slot->second += n->grad;
    }
    return grads;
  }

  void clear() { nodes_.clear(); }

 private:
  Var<T> keep(std::shared_ptr<Node<T>> n) {
    if (recording_) nodes_.push_back(n);
    return Var<T>(std::move(n), this);
  }

  bool recording_;
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

}  // namespace ilc
