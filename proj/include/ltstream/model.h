// ltstream/model.h
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
// Layer-trajectory model family.
//
// A time-LSTM stack runs along frames (layer 1 reads the feature frame,
// layer l > 1 reads h^{l-1}). A depth head then sweeps the layers at each
// frame with its own LSTMP cells: layer l takes h_t^l as input and the
// output of layer l-1 as its recurrent partner, starting from a zero state
// below layer 1.
//
//   plain_lstm : logits_t = W h_t^L + b            (no depth head)
//   ltlstm     : logits_t = W g_t^L + b
//   cltlstm    : the recurrent partner of layer l is the look-ahead
//                embedding z_t^{l-1} = sum_d G_d^{l-1} g_{t+d}^{l-1}, and
//                logits_t = W z_t^L + b, so each of the L layers waits tau
//                frames: L * tau look-ahead frames in total. Depth outputs
//                past the last frame repeat the last real frame.
//
// The current-frame context matrix G_0 is either learned or fixed to the
// identity (the default; see ModelConfig::learn_current_context).

#ifndef LTSTREAM_MODEL_H_
#define LTSTREAM_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ltstream/lstmp.h"

namespace ltstream {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Not enough future depth outputs buffered to form a look-ahead embedding.
class LookaheadError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class Variant { kPlainLstm, kLtLstm, kCltLstm };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 16;
  std::size_t proj_dim = 8;
  std::size_t input_dim = 8;
  std::size_t num_senones = 61;
  std::size_t tau = 0;
  Variant variant = Variant::kLtLstm;
  bool learn_current_context = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::size_t lookahead_frames(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);

struct TimeLstmStack {
  std::vector<LstmpParams> layers;
};

struct OutputLayer {
  Tensor weights;  // [senones x proj]
  Tensor bias;     // [senones]
};

struct DepthHead {
  std::size_t tau = 0;
  bool contextual = false;
  bool learn_current_context = false;
  std::vector<LstmpParams> layers;            // empty for plain_lstm
  std::vector<std::vector<Tensor>> context;   // [layer][delta - first_delta()]
  OutputLayer output;

  std::size_t first_delta() const { return learn_current_context ? 0 : 1; }
};

struct LayerTrajectoryModel {
  ModelConfig config;
  TimeLstmStack time;
  DepthHead head;

  static LayerTrajectoryModel random(const ModelConfig& config, std::uint64_t seed,
                                     double init_range = kInitRange);
  static LayerTrajectoryModel zeros(const ModelConfig& config);
  void validate() const;
};

TimeLstmStack random_time_stack(const ModelConfig& config, Rng& rng,
                                double init_range = kInitRange);
DepthHead random_head(const ModelConfig& config, Rng& rng, double init_range = kInitRange);
DepthHead zero_head(const ModelConfig& config);

// Parameter traversal in canonical order. Names look like
// "time.0.gate_w", "depth.1.proj_w", "context.0.1", "output.w"; the text
// before the first dot is the parameter group.
template <class Stack, class F>
void for_each_stack_param(Stack& stack, const std::string& prefix, F&& f) {
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    auto& p = stack.layers[l];
    const std::string base = prefix + std::to_string(l) + ".";
    f(base + "gate_w", p.gate_weights);
    f(base + "gate_b", p.gate_biases);
    f(base + "proj_w", p.proj_weights);
  }
}

template <class Head, class F>
void for_each_head_param(Head& head, const std::string& prefix, F&& f) {
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    auto& p = head.layers[l];
    const std::string base = prefix + "depth." + std::to_string(l) + ".";
    f(base + "gate_w", p.gate_weights);
    f(base + "gate_b", p.gate_biases);
    f(base + "proj_w", p.proj_weights);
  }
  for (std::size_t l = 0; l < head.context.size(); ++l)
    for (std::size_t d = 0; d < head.context[l].size(); ++d)
      f(prefix + "context." + std::to_string(l) + "." + std::to_string(d + head.first_delta()),
        head.context[l][d]);
  f(prefix + "output.w", head.output.weights);
  f(prefix + "output.b", head.output.bias);
}

template <class Model, class F>
void for_each_param(Model& model, F&& f) {
  for_each_stack_param(model.time, "time.", f);
  for_each_head_param(model.head, "", f);
}

std::vector<Tensor> flatten(const LayerTrajectoryModel& model);
std::vector<std::string> param_names(const LayerTrajectoryModel& model);
void unflatten(LayerTrajectoryModel& model, std::span<const Tensor> params);
std::size_t allocated_params(const LayerTrajectoryModel& model);
std::uint64_t checksum(const TimeLstmStack& stack);

// ---- tape-level evaluation -------------------------------------------------

using Binder = std::function<Var(const std::string& name, const Tensor& value)>;

struct BoundTimeStack {
  std::vector<BoundLstmp> layers;
  std::size_t hidden_dim = 0;
  std::size_t proj_dim = 0;
};

struct BoundHead {
  std::vector<BoundLstmp> layers;
  std::vector<std::vector<Var>> context;
  Var out_weights;
  Var out_bias;
  std::size_t tau = 0;
  bool contextual = false;
  bool learn_current_context = false;
  std::size_t hidden_dim = 0;
  std::size_t proj_dim = 0;
};

struct BoundModel {
  BoundTimeStack time;
  BoundHead head;
};

// Binding visits tensors in for_each_param order.
BoundTimeStack bind(const TimeLstmStack& stack, const std::string& prefix, const Binder& binder);
BoundHead bind(const DepthHead& head, const std::string& prefix, const Binder& binder);
BoundModel bind(const LayerTrajectoryModel& model, const Binder& binder);
BoundModel bind_constant(Tape& tape, const LayerTrajectoryModel& model);
// Binds vars positionally (vars[i] for the i-th tensor in canonical order).
BoundModel bind_vars(const LayerTrajectoryModel& model, std::span<const Var> vars);

using VarSeq = std::vector<Var>;

std::vector<Var> frame_vars(Tape& tape, const Tensor& features);
// [layer][t]
std::vector<VarSeq> forward_time(const BoundTimeStack& stack, Tape& tape,
                                 std::span<const Var> frames);
// One time step over all layers; returns the new states (h is .output).
std::vector<BoundCell> time_step(const BoundTimeStack& stack,
                                 std::span<const BoundCell> prev, Var frame);
// Per-frame logits from per-layer h sequences.
VarSeq forward_head(const BoundHead& head, Tape& tape, const std::vector<VarSeq>& h);
VarSeq forward(const BoundModel& model, Tape& tape, const Tensor& features);

// Look-ahead embedding over window g_t .. g_{t+tau}.
Var lookahead_embedding(std::span<const Var> window, std::span<const Var> context,
                        bool learn_current_context);
Tensor lookahead_embedding(std::span<const Tensor> window, std::span<const Tensor> context,
                           bool learn_current_context = true);

// ---- batch inference ---------------------------------------------------------

// features: [T x input_dim]; returns [layer] of [T x proj_dim].
std::vector<Tensor> forward_time_lstm(const TimeLstmStack& stack, const Tensor& features);
// Any variant; [T x senones].
Tensor forward_logits(const LayerTrajectoryModel& model, const Tensor& features);
Tensor forward_ltlstm(const LayerTrajectoryModel& model, const Tensor& features);
Tensor forward_cltlstm(const LayerTrajectoryModel& model, const Tensor& features);
// Head applied to stored time-LSTM outputs ([layer] of [T x proj]).
Tensor forward_head_logits(const DepthHead& head, const std::vector<Tensor>& stored_h);

Tensor stack_rows(std::span<const Var> rows);

// ---- two-head model -----------------------------------------------------------

struct TwoHeadModel {
  ModelConfig config;  // configuration of the contextual head
  TimeLstmStack shared;
  DepthHead head_lt;
  DepthHead head_clt;
  bool frozen_shared = true;

  LayerTrajectoryModel lt_model() const;
  LayerTrajectoryModel clt_model() const;
  ModelConfig lt_config() const;
};

template <class Model, class F>
void for_each_two_head_param(Model& model, F&& f) {
  for_each_stack_param(model.shared, "shared.time.", f);
  for_each_head_param(model.head_lt, "lt.", f);
  for_each_head_param(model.head_clt, "clt.", f);
}

TwoHeadModel build_second_head(const LayerTrajectoryModel& trained_clt, std::uint64_t seed,
                               double init_range = kInitRange);

struct TwoHeadOutput {
  Tensor lt_logits;
  Tensor clt_logits;
  std::vector<Tensor> stored_h;  // [layer] of [T x proj]
};

TwoHeadOutput forward_two_head(const TwoHeadModel& model, const Tensor& features);

}  // namespace ltstream

#endif  // LTSTREAM_MODEL_H_
