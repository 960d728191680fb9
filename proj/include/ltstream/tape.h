// ltstream/tape.h
//
// Copyright 2026 The ltstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// \file
// Reverse-mode gradient tape. Every operation appends a node holding its
// value and, when recording, a closure that pushes the output gradient back
// onto its inputs. Node ids are a topological order by construction, so
// backward() is a single reverse sweep.
//
// The same operations run on a non-recording tape for inference, which is
// what makes batch (training) and streaming (inference) evaluation produce
// bit-identical values: there is only one arithmetic path.

#ifndef LTSTREAM_TAPE_H_
#define LTSTREAM_TAPE_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "ltstream/tensor.h"

namespace ltstream {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t size() const { return value().size(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Called during backward() with the node's own id; reads grad(self) and
  // accumulates into the inputs via accumulate().
  using Backward = std::function<void(Tape& tape, std::size_t self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  // References `value` without copying; it must outlive the tape.
  Var constant_ref(const Tensor& value);
  // Leaf whose gradient is tracked. References `value` without copying.
  Var param(const Tensor& value);

  Var push(Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() target w.r.t. var; zeros if untouched.
  Tensor grad(const Var& var) const;
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  // Adds `delta` (same size as the node value) into the node's gradient.
  void accumulate(std::size_t id, std::span<const double> delta);
  // Mutable gradient buffer, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

  // Seeds d(loss)/d(loss) = 1 and sweeps backwards. Rejects non-scalars.
  void backward(const Var& loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool record_;
  std::deque<Node> nodes_;  // deque: references stay valid on push_back
};

// Operations. All inputs must live on the same tape.
Var matvec(Var weights, Var x);  // [m x n] * [n] -> [m]
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
Var concat(Var a, Var b);
Var slice(Var a, std::size_t offset, std::size_t length);
Var log_softmax(Var logits);
Var sum(Var a);                  // -> [1]
Var pick(Var a, std::size_t i);  // -> [1]
Var dot(Var a, Var b);           // -> [1]
Var add_scalars(std::span<const Var> scalars);  // sum of [1]-vars -> [1]

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// Numerically stable softmax of a 1-D tensor (max subtraction).
Tensor softmax(const Tensor& logits);

}  // namespace ltstream

#endif  // LTSTREAM_TAPE_H_
