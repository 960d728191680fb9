// ltstream/src/tape.cc
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

#include "ltstream/tape.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ltstream {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Tensor& value) {
  Node n;
  n.ref = &value;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.owned = std::move(value);
  if (record_) {
    for (const Var& v : inputs) {
      if (&v.tape() != this) throw std::invalid_argument("operands on different tapes");
      if (nodes_[v.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.owned;
}

Tensor Tape::grad(const Var& var) const {
  const Node& n = nodes_[var.id()];
  if (n.grad.empty()) return Tensor::zeros_like(value(var.id()));
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(value(id));
  return n.grad;
}

void Tape::accumulate(std::size_t id, std::span<const double> delta) {
  if (!nodes_[id].requires_grad) return;
  Tensor& g = grad_buffer(id);
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

void Tape::backward(const Var& loss) {
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  if (loss.size() != 1) {
    throw ShapeError("loss must be scalar, got shape " +
                     shape_string(loss.value().shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

namespace {

void same_size(const Var& a, const Var& b, const char* op) {
  if (a.value().shape() != b.value().shape()) {
    throw ShapeError(std::string(op) + ": operand shapes " +
                     shape_string(a.value().shape()) + " and " +
                     shape_string(b.value().shape()) + " differ");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matvec(Var weights, Var x) {
  const Tensor& w = weights.value();
  const Tensor& v = x.value();
  if (w.rank() != 2) throw ShapeError("matvec: weights must be a matrix, got " + shape_string(w.shape()));
  const std::size_t m = w.shape()[0], n = w.shape()[1];
  if (v.size() != n) {
    throw ShapeError("matvec: input length " + std::to_string(v.size()) +
                     " does not match weight columns " + std::to_string(n));
  }
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* wr = w.data().data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * v[j];
    out[i] = acc;
  }
  const std::size_t wid = weights.id(), xid = x.id();
  const Var in[] = {weights, x};
  return weights.tape().push(std::move(out), in, [wid, xid, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    if (t.requires_grad(wid)) {
      const Tensor& xv = t.value(xid);
      Tensor& gw = t.grad_buffer(wid);
      for (std::size_t i = 0; i < m; ++i) {
        if (g[i] == 0.0) continue;
        double* row = gw.data().data() + i * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += g[i] * xv[j];
      }
    }
    if (t.requires_grad(xid)) {
      const Tensor& wv = t.value(wid);
      Tensor& gx = t.grad_buffer(xid);
      for (std::size_t i = 0; i < m; ++i) {
        if (g[i] == 0.0) continue;
        const double* row = wv.data().data() + i * n;
        for (std::size_t j = 0; j < n; ++j) gx[j] += g[i] * row[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  same_size(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape().push(std::move(out), in, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    t.accumulate(ia, g.data());
    t.accumulate(ib, g.data());
  });
}

Var sub(Var a, Var b) {
  same_size(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape().push(std::move(out), in, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    t.accumulate(ia, g.data());
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_size(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape().push(std::move(out), in, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    if (t.requires_grad(ia)) {
      const Tensor& bv = t.value(ib);
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      const Tensor& av = t.value(ia);
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return a.tape().push(std::move(out), in, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return a.tape().push(std::move(out), in, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return a.tape().push(std::move(out), in, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var concat(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  std::vector<double> v(av.values());
  v.insert(v.end(), bv.values().begin(), bv.values().end());
  const std::size_t ia = a.id(), ib = b.id(), na = av.size();
  const Var in[] = {a, b};
  return a.tape().push(Tensor::vector(std::move(v)), in, [ia, ib, na](Tape& t, std::size_t self) {
    std::span<const double> g = t.out_grad(self).data();
    t.accumulate(ia, g.subspan(0, na));
    t.accumulate(ib, g.subspan(na));
  });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& av = a.value();
  if (length == 0 || offset + length > av.size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " +
                     std::to_string(offset + length) + ") out of range for length " +
                     std::to_string(av.size()));
  }
  std::vector<double> v(av.values().begin() + offset, av.values().begin() + offset + length);
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return a.tape().push(Tensor::vector(std::move(v)), in, [ia, offset](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.out_grad(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Tensor softmax(const Tensor& logits) {
  if (logits.empty()) throw ShapeError("softmax: empty input");
  if (logits.rank() != 1) throw ShapeError("softmax: expected 1-D logits, got " + shape_string(logits.shape()));
  const double mx = *std::max_element(logits.data().begin(), logits.data().end());
  Tensor out = logits;
  double z = 0.0;
  for (double& v : out.data()) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : out.data()) v /= z;
  return out;
}

Var log_softmax(Var logits) {
  const Tensor& x = logits.value();
  if (x.empty()) throw ShapeError("log_softmax: empty input");
  const double mx = *std::max_element(x.data().begin(), x.data().end());
  double z = 0.0;
  for (double v : x.data()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Tensor out = x;
  for (double& v : out.data()) v -= lse;
  const std::size_t ia = logits.id();
  const Var in[] = {logits};
  return logits.tape().push(std::move(out), in, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    double gs = 0.0;
    for (double v : g.data()) gs += v;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(y[i]) * gs;
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return a.tape().push(Tensor::vector({s}), in, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const double g = t.out_grad(self)[0];
    Tensor& ga = t.grad_buffer(ia);
    for (double& v : ga.data()) v += g;
  });
}

Var pick(Var a, std::size_t i) {
  if (i >= a.value().size()) {
    throw ShapeError("pick: index " + std::to_string(i) + " out of range for length " +
                     std::to_string(a.value().size()));
  }
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return a.tape().push(Tensor::vector({a.value()[i]}), in, [ia, i](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    t.grad_buffer(ia)[i] += t.out_grad(self)[0];
  });
}

Var dot(Var a, Var b) {
  same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i] * b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape().push(Tensor::vector({s}), in, [ia, ib](Tape& t, std::size_t self) {
    const double g = t.out_grad(self)[0];
    if (t.requires_grad(ia)) {
      const Tensor& bv = t.value(ib);
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    }
    if (t.requires_grad(ib)) {
      const Tensor& av = t.value(ia);
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
    }
  });
}

Var add_scalars(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("add_scalars: no operands");
  double s = 0.0;
  std::vector<std::size_t> ids;
  ids.reserve(scalars.size());
  for (const Var& v : scalars) {
    if (v.size() != 1) throw ShapeError("add_scalars: operand is not scalar");
    s += v.value()[0];
    ids.push_back(v.id());
  }
  return scalars[0].tape().push(Tensor::vector({s}), scalars, [ids](Tape& t, std::size_t self) {
    const double g = t.out_grad(self)[0];
    for (std::size_t id : ids)
      if (t.requires_grad(id)) t.grad_buffer(id)[0] += g;
  });
}

}  // namespace ltstream
