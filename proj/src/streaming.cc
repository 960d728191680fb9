// ltstream/src/streaming.cc
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

#include "ltstream/streaming.h"

#include <algorithm>
#include <stdexcept>

namespace ltstream {

namespace {

Tensor affine(const OutputLayer& out, const Tensor& x) {
  Tape tape(false);
  return add(matvec(tape.constant_ref(out.weights), tape.constant_ref(x)),
             tape.constant_ref(out.bias))
      .value();
}

}  // namespace

StreamingTimeStack::StreamingTimeStack(const TimeLstmStack& stack) : stack_(&stack) {
  if (stack.layers.empty()) throw ShapeError("empty time stack");
  for (const LstmpParams& p : stack.layers) {
    p.validate();
    state_.push_back(CellState::zeros(p.hidden_dim, p.proj_dim));
  }
  stored_.resize(stack.layers.size());
}

const std::vector<Tensor>& StreamingTimeStack::push(const Tensor& frame) {
  expect_shape(frame, {stack_->layers[0].input_dim}, "frame");
  Tape tape(false);
  BoundTimeStack bound = ltstream::bind(*stack_, "time.", [&tape](const std::string&, const Tensor& t) {
    return tape.constant_ref(t);
  });
  std::vector<BoundCell> prev;
  for (const CellState& s : state_)
    prev.push_back(BoundCell{tape.constant_ref(s.cell), tape.constant_ref(s.output)});
  std::vector<BoundCell> next = time_step(bound, prev, tape.constant_ref(frame));
  last_.clear();
  for (std::size_t l = 0; l < next.size(); ++l) {
    state_[l] = CellState{next[l].cell.value(), next[l].output.value()};
    last_.push_back(next[l].output.value());
    stored_[l].push_back(last_.back());
  }
  ++frames_;
  ++evaluations_;
  return last_;
}

std::vector<Tensor> StreamingTimeStack::stored_matrices() const {
  std::vector<Tensor> out;
  for (const auto& layer : stored_) {
    if (layer.empty()) throw ShapeError("no frames stored");
    Tensor m(Shape{layer.size(), layer[0].size()});
    for (std::size_t t = 0; t < layer.size(); ++t)
      std::copy(layer[t].data().begin(), layer[t].data().end(), m.row(t).begin());
    out.push_back(std::move(m));
  }
  return out;
}

StreamingHead::StreamingHead(const DepthHead& head) : head_(&head) {
  layers_.resize(head.layers.size());
}

std::vector<Emission> StreamingHead::push(const std::vector<Tensor>& h) {
  if (finished_) throw std::logic_error("StreamingHead: push after finish");
  if (h.empty()) throw ShapeError("StreamingHead: no layers");
  std::vector<Emission> out;
  const std::size_t frame = frames_in_++;
  if (head_->layers.empty()) {
    out.push_back(Emission{frame, affine(head_->output, h.back())});
    frames_out_ = frames_in_;
    return out;
  }
  if (h.size() != layers_.size()) throw ShapeError("StreamingHead: layer count mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].pending_h.push_back(h[l]);
  advance(false, out);
  return out;
}

std::vector<Emission> StreamingHead::finish() {
  if (finished_) throw std::logic_error("StreamingHead: finish called twice");
  finished_ = true;
  std::vector<Emission> out;
  if (!head_->layers.empty()) advance(true, out);
  return out;
}

StreamingHead::Partner StreamingHead::embed(Layer& layer, std::size_t l, std::size_t last_frame) {
  Tape tape(false);
  std::vector<Var> window(head_->tau + 1), context;
  for (std::size_t d = 0; d <= head_->tau; ++d) {
    const std::size_t f = std::min(layer.g_base + d, last_frame);
    window[d] = tape.constant_ref(layer.g[f - layer.g_base]);
  }
  for (const Tensor& g : head_->context[l]) context.push_back(tape.constant_ref(g));
  Partner p{layer.c.front(),
            lookahead_embedding(window, context, head_->learn_current_context).value()};
  return p;
}

void StreamingHead::advance(bool at_end, std::vector<Emission>& out) {
  const std::size_t num_layers = layers_.size();
  const std::size_t tau = head_->tau;
  for (std::size_t l = 0; l < num_layers; ++l) {
    Layer& layer = layers_[l];
    while (!layer.pending_h.empty()) {
      const std::size_t f = layer.next_step;
      Tensor below_cell, below_out;
      if (l == 0) {
        below_cell = Tensor(Shape{head_->layers[0].hidden_dim});
        below_out = Tensor(Shape{head_->layers[0].proj_dim});
      } else {
        Layer& below = layers_[l - 1];
        if (below.ready.empty() || below.ready_base != f) break;
        below_cell = std::move(below.ready.front().cell);
        below_out = std::move(below.ready.front().embedding);
        below.ready.pop_front();
        ++below.ready_base;
      }
      Tape tape(false);
      BoundCell next = lstmp_step(bind_constant(tape, head_->layers[l]),
                                  BoundCell{tape.constant_ref(below_cell), tape.constant_ref(below_out)},
                                  tape.constant_ref(layer.pending_h.front()));
      layer.g.push_back(next.output.value());
      layer.c.push_back(next.cell.value());
      layer.pending_h.pop_front();
      ++layer.next_step;
      peak_buffer_ = std::max(peak_buffer_, layer.g.size());
    }
    const bool layer_done = at_end && layer.next_step == frames_in_;
    while (!layer.g.empty()) {
      const std::size_t have_last = layer.g_base + layer.g.size() - 1;
      Partner p;
      if (!head_->contextual) {
        p = Partner{layer.c.front(), layer.g.front()};
      } else {
        if (layer.g_base + tau > have_last && !layer_done) break;
        p = embed(layer, l, have_last);
      }
      layer.g.pop_front();
      layer.c.pop_front();
      ++layer.g_base;
      layer.ready.push_back(std::move(p));
    }
  }
  Layer& top = layers_.back();
  while (!top.ready.empty()) {
    out.push_back(Emission{top.ready_base, affine(head_->output, top.ready.front().embedding)});
    top.ready.pop_front();
    ++top.ready_base;
    ++frames_out_;
  }
}

StreamingModel::StreamingModel(const LayerTrajectoryModel& model)
    : time_(model.time), head_(model.head) {
  model.validate();
}

std::vector<Emission> StreamingModel::push(const Tensor& frame) {
  return head_.push(time_.push(frame));
}

std::vector<Emission> StreamingModel::finish() { return head_.finish(); }

Tensor stream_logits(const LayerTrajectoryModel& model, const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("features must be [T x dim]");
  StreamingModel sm(model);
  std::vector<Emission> all;
  for (std::size_t t = 0; t < features.rows(); ++t) {
    auto r = features.row(t);
    for (Emission& e : sm.push(Tensor::vector(std::vector<double>(r.begin(), r.end()))))
      all.push_back(std::move(e));
  }
  for (Emission& e : sm.finish()) all.push_back(std::move(e));
  Tensor out(Shape{features.rows(), model.config.num_senones});
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].frame != i) throw std::logic_error("stream_logits: out-of-order emission");
    std::copy(all[i].logits.data().begin(), all[i].logits.data().end(), out.row(i).begin());
  }
  return out;
}

}  // namespace ltstream
