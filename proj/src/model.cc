// ltstream/src/model.cc
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

#include "ltstream/model.h"

#include <algorithm>

namespace ltstream {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kPlainLstm: return "lstm";
    case Variant::kLtLstm: return "ltlstm";
    case Variant::kCltLstm: return "cltlstm";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "lstm" || name == "plain_lstm") return Variant::kPlainLstm;
  if (name == "ltlstm") return Variant::kLtLstm;
  if (name == "cltlstm") return Variant::kCltLstm;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (num_layers == 0 || hidden_dim == 0 || proj_dim == 0 || input_dim == 0 ||
      num_senones == 0)
    throw ConfigError("model dimensions must all be >= 1");
  if (variant != Variant::kCltLstm && tau != 0)
    throw ConfigError(std::string(to_string(variant)) + " requires tau == 0");
}

std::size_t lookahead_frames(const ModelConfig& config) {
  return config.num_layers * config.tau;
}

std::size_t param_count(const ModelConfig& c) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < c.num_layers; ++l)
    n += LstmpParams::count(l == 0 ? c.input_dim : c.proj_dim, c.hidden_dim, c.proj_dim);
  if (c.variant != Variant::kPlainLstm)
    n += c.num_layers * LstmpParams::count(c.proj_dim, c.hidden_dim, c.proj_dim);
  if (c.variant == Variant::kCltLstm) {
    const std::size_t mats = c.learn_current_context ? c.tau + 1 : c.tau;
    n += c.num_layers * mats * c.proj_dim * c.proj_dim;
  }
  n += c.num_senones * c.proj_dim + c.num_senones;
  return n;
}

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double range) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-range, range);
  return t;
}

std::size_t context_mats(const ModelConfig& c) {
  if (c.variant != Variant::kCltLstm) return 0;
  return c.learn_current_context ? c.tau + 1 : c.tau;
}

}  // namespace

TimeLstmStack random_time_stack(const ModelConfig& c, Rng& rng, double init_range) {
  TimeLstmStack s;
  for (std::size_t l = 0; l < c.num_layers; ++l)
    s.layers.push_back(LstmpParams::random(l == 0 ? c.input_dim : c.proj_dim,
                                           c.hidden_dim, c.proj_dim, rng, init_range));
  return s;
}

DepthHead random_head(const ModelConfig& c, Rng& rng, double init_range) {
  DepthHead h;
  h.tau = c.tau;
  h.contextual = c.variant == Variant::kCltLstm;
  h.learn_current_context = h.contextual && c.learn_current_context;
  if (c.variant != Variant::kPlainLstm)
    for (std::size_t l = 0; l < c.num_layers; ++l)
      h.layers.push_back(LstmpParams::random(c.proj_dim, c.hidden_dim, c.proj_dim, rng, init_range));
  if (h.contextual) {
    h.context.resize(c.num_layers);
    for (auto& per_layer : h.context)
      for (std::size_t d = 0; d < context_mats(c); ++d)
        per_layer.push_back(uniform_tensor({c.proj_dim, c.proj_dim}, rng, init_range));
  }
  h.output.weights = uniform_tensor({c.num_senones, c.proj_dim}, rng, init_range);
  h.output.bias = uniform_tensor({c.num_senones}, rng, init_range);
  return h;
}

DepthHead zero_head(const ModelConfig& c) {
  DepthHead h;
  h.tau = c.tau;
  h.contextual = c.variant == Variant::kCltLstm;
  h.learn_current_context = h.contextual && c.learn_current_context;
  if (c.variant != Variant::kPlainLstm)
    for (std::size_t l = 0; l < c.num_layers; ++l)
      h.layers.push_back(LstmpParams::zeros(c.proj_dim, c.hidden_dim, c.proj_dim));
  if (h.contextual) {
    h.context.resize(c.num_layers);
    for (auto& per_layer : h.context)
      for (std::size_t d = 0; d < context_mats(c); ++d)
        per_layer.push_back(Tensor(Shape{c.proj_dim, c.proj_dim}));
  }
  h.output.weights = Tensor(Shape{c.num_senones, c.proj_dim});
  h.output.bias = Tensor(Shape{c.num_senones});
  return h;
}

LayerTrajectoryModel LayerTrajectoryModel::random(const ModelConfig& config,
                                                  std::uint64_t seed, double init_range) {
  config.validate();
  Rng rng(seed);
  LayerTrajectoryModel m;
  m.config = config;
  m.time = random_time_stack(config, rng, init_range);
  m.head = random_head(config, rng, init_range);
  return m;
}

LayerTrajectoryModel LayerTrajectoryModel::zeros(const ModelConfig& config) {
  config.validate();
  LayerTrajectoryModel m;
  m.config = config;
  for (std::size_t l = 0; l < config.num_layers; ++l)
    m.time.layers.push_back(LstmpParams::zeros(
        l == 0 ? config.input_dim : config.proj_dim, config.hidden_dim, config.proj_dim));
  m.head = zero_head(config);
  return m;
}

void LayerTrajectoryModel::validate() const {
  config.validate();
  if (time.layers.size() != config.num_layers)
    throw ShapeError("time stack has " + std::to_string(time.layers.size()) + " layers, config says " +
                     std::to_string(config.num_layers));
  for (std::size_t l = 0; l < time.layers.size(); ++l) {
    const LstmpParams& p = time.layers[l];
    p.validate();
    if (p.input_dim != (l == 0 ? config.input_dim : config.proj_dim) ||
        p.hidden_dim != config.hidden_dim || p.proj_dim != config.proj_dim)
      throw ShapeError("time layer " + std::to_string(l) + " dims disagree with config");
  }
  const bool has_depth = config.variant != Variant::kPlainLstm;
  if (head.layers.size() != (has_depth ? config.num_layers : 0))
    throw ShapeError("depth head layer count disagrees with variant");
  for (const LstmpParams& p : head.layers) p.validate();
  const bool contextual = config.variant == Variant::kCltLstm;
  if (head.contextual != contextual) throw ShapeError("context matrices present iff cltlstm");
  if (contextual) {
    if (head.context.size() != config.num_layers) throw ShapeError("context layer count");
    for (const auto& per_layer : head.context) {
      if (per_layer.size() != context_mats(config)) throw ShapeError("context matrix count");
      for (const Tensor& g : per_layer)
        expect_shape(g, {config.proj_dim, config.proj_dim}, "context matrix");
    }
  } else if (!head.context.empty()) {
    throw ShapeError("context matrices present iff cltlstm");
  }
  expect_shape(head.output.weights, {config.num_senones, config.proj_dim}, "output.w");
  expect_shape(head.output.bias, {config.num_senones}, "output.b");
}

std::vector<Tensor> flatten(const LayerTrajectoryModel& model) {
  std::vector<Tensor> out;
  for_each_param(model, [&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

std::vector<std::string> param_names(const LayerTrajectoryModel& model) {
  std::vector<std::string> out;
  for_each_param(model, [&](const std::string& n, const Tensor&) { out.push_back(n); });
  return out;
}

void unflatten(LayerTrajectoryModel& model, std::span<const Tensor> params) {
  std::size_t i = 0;
  for_each_param(model, [&](const std::string& name, Tensor& t) {
    if (i >= params.size()) throw ShapeError("unflatten: too few tensors");
    expect_shape(params[i], t.shape(), name);
    t = params[i++];
  });
  if (i != params.size()) throw ShapeError("unflatten: too many tensors");
}

std::size_t allocated_params(const LayerTrajectoryModel& model) {
  std::size_t n = 0;
  for_each_param(model, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

std::uint64_t checksum(const TimeLstmStack& stack) {
  std::uint64_t h = 0;
  for_each_stack_param(stack, "", [&](const std::string&, const Tensor& t) {
    h = h * 1099511628211ULL ^ checksum(t);
  });
  return h;
}

// ---- binding ------------------------------------------------------------------

BoundTimeStack bind(const TimeLstmStack& stack, const std::string& prefix, const Binder& binder) {
  BoundTimeStack b;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const LstmpParams& p = stack.layers[l];
    const std::string base = prefix + std::to_string(l) + ".";
    BoundLstmp bl;
    bl.gate_weights = binder(base + "gate_w", p.gate_weights);
    bl.gate_biases = binder(base + "gate_b", p.gate_biases);
    bl.proj_weights = binder(base + "proj_w", p.proj_weights);
    bl.hidden_dim = p.hidden_dim;
    b.layers.push_back(bl);
    b.hidden_dim = p.hidden_dim;
    b.proj_dim = p.proj_dim;
  }
  return b;
}

BoundHead bind(const DepthHead& head, const std::string& prefix, const Binder& binder) {
  BoundHead b;
  b.tau = head.tau;
  b.contextual = head.contextual;
  b.learn_current_context = head.learn_current_context;
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    const LstmpParams& p = head.layers[l];
    const std::string base = prefix + "depth." + std::to_string(l) + ".";
    BoundLstmp bl;
    bl.gate_weights = binder(base + "gate_w", p.gate_weights);
    bl.gate_biases = binder(base + "gate_b", p.gate_biases);
    bl.proj_weights = binder(base + "proj_w", p.proj_weights);
    bl.hidden_dim = p.hidden_dim;
    b.layers.push_back(bl);
    b.hidden_dim = p.hidden_dim;
  }
  b.context.resize(head.context.size());
  for (std::size_t l = 0; l < head.context.size(); ++l)
    for (std::size_t d = 0; d < head.context[l].size(); ++d)
      b.context[l].push_back(binder(
          prefix + "context." + std::to_string(l) + "." + std::to_string(d + head.first_delta()),
          head.context[l][d]));
  b.out_weights = binder(prefix + "output.w", head.output.weights);
  b.out_bias = binder(prefix + "output.b", head.output.bias);
  b.proj_dim = head.output.weights.shape()[1];
  return b;
}

BoundModel bind(const LayerTrajectoryModel& model, const Binder& binder) {
  BoundModel b;
  b.time = ltstream::bind(model.time, "time.", binder);
  b.head = ltstream::bind(model.head, "", binder);
  return b;
}

BoundModel bind_constant(Tape& tape, const LayerTrajectoryModel& model) {
  return ltstream::bind(model, [&tape](const std::string&, const Tensor& t) { return tape.constant_ref(t); });
}

BoundModel bind_vars(const LayerTrajectoryModel& model, std::span<const Var> vars) {
  std::size_t i = 0;
  BoundModel b = ltstream::bind(model, [&](const std::string& name, const Tensor& t) {
    if (i >= vars.size()) throw ShapeError("bind_vars: too few vars");
    expect_shape(vars[i].value(), t.shape(), name);
    return vars[i++];
  });
  if (i != vars.size()) throw ShapeError("bind_vars: too many vars");
  return b;
}

// ---- forward ------------------------------------------------------------------

std::vector<Var> frame_vars(Tape& tape, const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("features must be [T x dim], got " + shape_string(features.shape()));
  std::vector<Var> out;
  out.reserve(features.rows());
  for (std::size_t t = 0; t < features.rows(); ++t) {
    auto r = features.row(t);
    out.push_back(tape.constant(Tensor::vector(std::vector<double>(r.begin(), r.end()))));
  }
  return out;
}

std::vector<BoundCell> time_step(const BoundTimeStack& stack,
                                 std::span<const BoundCell> prev, Var frame) {
  std::vector<BoundCell> next;
  next.reserve(stack.layers.size());
  Var x = frame;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    next.push_back(lstmp_step(stack.layers[l], prev[l], x));
    x = next.back().output;
  }
  return next;
}

std::vector<VarSeq> forward_time(const BoundTimeStack& stack, Tape& tape,
                                 std::span<const Var> frames) {
  const std::size_t layers = stack.layers.size();
  std::vector<VarSeq> h(layers);
  std::vector<BoundCell> state;
  for (std::size_t l = 0; l < layers; ++l)
    state.push_back(BoundCell{tape.constant(Tensor(Shape{stack.hidden_dim})),
                              tape.constant(Tensor(Shape{stack.proj_dim}))});
  for (const Var& frame : frames) {
    state = time_step(stack, state, frame);
    for (std::size_t l = 0; l < layers; ++l) h[l].push_back(state[l].output);
  }
  return h;
}

Var lookahead_embedding(std::span<const Var> window, std::span<const Var> context,
                        bool learn_current_context) {
  const std::size_t needed = learn_current_context ? context.size() : context.size() + 1;
  if (window.size() < needed) {
    throw LookaheadError("look-ahead window holds " + std::to_string(window.size()) +
                         " frames, needs " + std::to_string(needed));
  }
  if (learn_current_context) {
    Var z = matvec(context[0], window[0]);
    for (std::size_t d = 1; d < context.size(); ++d) z = add(z, matvec(context[d], window[d]));
    return z;
  }
  Var z = window[0];
  for (std::size_t d = 0; d < context.size(); ++d) z = add(z, matvec(context[d], window[d + 1]));
  return z;
}

Tensor lookahead_embedding(std::span<const Tensor> window, std::span<const Tensor> context,
                           bool learn_current_context) {
  if (learn_current_context && context.empty())
    throw LookaheadError("look-ahead embedding needs at least one context matrix");
  Tape tape(false);
  std::vector<Var> w, g;
  for (const Tensor& t : window) w.push_back(tape.constant_ref(t));
  for (const Tensor& t : context) g.push_back(tape.constant_ref(t));
  return lookahead_embedding(w, g, learn_current_context).value();
}

VarSeq forward_head(const BoundHead& head, Tape& tape, const std::vector<VarSeq>& h) {
  if (h.empty()) throw ShapeError("forward_head: no layers");
  const std::size_t T = h[0].size();
  VarSeq logits;
  logits.reserve(T);
  if (head.layers.empty()) {
    for (std::size_t t = 0; t < T; ++t)
      logits.push_back(add(matvec(head.out_weights, h.back()[t]), head.out_bias));
    return logits;
  }
  if (h.size() != head.layers.size()) throw ShapeError("forward_head: layer count mismatch");

  // Layer-major sweep. partner[t] is the recurrent input of the next layer.
  const Var zero_cell = tape.constant(Tensor(Shape{head.hidden_dim}));
  const Var zero_out = tape.constant(Tensor(Shape{head.proj_dim}));
  std::vector<Var> cells(T, zero_cell), partner(T, zero_out);
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    std::vector<Var> g(T);
    for (std::size_t t = 0; t < T; ++t) {
      BoundCell next = lstmp_step(head.layers[l], BoundCell{cells[t], partner[t]}, h[l][t]);
      cells[t] = next.cell;
      g[t] = next.output;
    }
    if (!head.contextual) {
      partner = g;
      continue;
    }
    std::vector<Var> window(head.tau + 1);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d <= head.tau; ++d) window[d] = g[std::min(t + d, T - 1)];
      partner[t] = lookahead_embedding(window, head.context[l], head.learn_current_context);
    }
  }
  for (std::size_t t = 0; t < T; ++t)
    logits.push_back(add(matvec(head.out_weights, partner[t]), head.out_bias));
  return logits;
}

VarSeq forward(const BoundModel& model, Tape& tape, const Tensor& features) {
  std::vector<Var> frames = frame_vars(tape, features);
  return forward_head(model.head, tape, forward_time(model.time, tape, frames));
}

Tensor stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t cols = rows[0].size();
  Tensor out(Shape{rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = rows[r].value();
    if (v.size() != cols) throw ShapeError("stack_rows: ragged rows");
    std::copy(v.data().begin(), v.data().end(), out.row(r).begin());
  }
  return out;
}

std::vector<Tensor> forward_time_lstm(const TimeLstmStack& stack, const Tensor& features) {
  if (stack.layers.empty()) throw ShapeError("empty time stack");
  expect_shape(features, {features.shape().empty() ? 0 : features.shape()[0], stack.layers[0].input_dim},
               "features");
  Tape tape(false);
  BoundTimeStack b = ltstream::bind(stack, "time.", [&tape](const std::string&, const Tensor& t) {
    return tape.constant_ref(t);
  });
  std::vector<VarSeq> h = forward_time(b, tape, frame_vars(tape, features));
  std::vector<Tensor> out;
  for (const VarSeq& layer : h) out.push_back(stack_rows(layer));
  return out;
}

Tensor forward_logits(const LayerTrajectoryModel& model, const Tensor& features) {
  model.validate();
  if (features.rank() != 2 || features.cols() != model.config.input_dim)
    throw ShapeError("features: expected [T x " + std::to_string(model.config.input_dim) + "], got " +
                     shape_string(features.shape()));
  Tape tape(false);
  return stack_rows(forward(bind_constant(tape, model), tape, features));
}

Tensor forward_ltlstm(const LayerTrajectoryModel& model, const Tensor& features) {
  if (model.config.variant != Variant::kLtLstm)
    throw ConfigError("forward_ltlstm: model is " + std::string(to_string(model.config.variant)));
  return forward_logits(model, features);
}

Tensor forward_cltlstm(const LayerTrajectoryModel& model, const Tensor& features) {
  if (model.config.variant != Variant::kCltLstm)
    throw ConfigError("forward_cltlstm: model is " + std::string(to_string(model.config.variant)));
  return forward_logits(model, features);
}

Tensor forward_head_logits(const DepthHead& head, const std::vector<Tensor>& stored_h) {
  Tape tape(false);
  BoundHead b = ltstream::bind(head, "", [&tape](const std::string&, const Tensor& t) {
    return tape.constant_ref(t);
  });
  std::vector<VarSeq> h;
  for (const Tensor& layer : stored_h) h.push_back(frame_vars(tape, layer));
  return stack_rows(forward_head(b, tape, h));
}

// ---- two-head --------------------------------------------------------------------

ModelConfig TwoHeadModel::lt_config() const {
  ModelConfig c = config;
  c.variant = Variant::kLtLstm;
  c.tau = 0;
  c.learn_current_context = false;
  return c;
}

LayerTrajectoryModel TwoHeadModel::lt_model() const {
  return LayerTrajectoryModel{lt_config(), shared, head_lt};
}

LayerTrajectoryModel TwoHeadModel::clt_model() const {
  return LayerTrajectoryModel{config, shared, head_clt};
}

TwoHeadModel build_second_head(const LayerTrajectoryModel& trained_clt, std::uint64_t seed,
                               double init_range) {
  if (trained_clt.config.variant != Variant::kCltLstm)
    throw ConfigError("build_second_head: source model is " +
                      std::string(to_string(trained_clt.config.variant)) + ", need cltlstm");
  trained_clt.validate();
  TwoHeadModel m;
  m.config = trained_clt.config;
  m.shared = trained_clt.time;
  m.head_clt = trained_clt.head;
  Rng rng(seed);
  m.head_lt = random_head(m.lt_config(), rng, init_range);
  m.frozen_shared = true;
  return m;
}

TwoHeadOutput forward_two_head(const TwoHeadModel& model, const Tensor& features) {
  model.clt_model().validate();
  model.lt_model().validate();
  Tape tape(false);
  BoundTimeStack shared = ltstream::bind(model.shared, "shared.time.", [&tape](const std::string&, const Tensor& t) {
    return tape.constant_ref(t);
  });
  auto const_binder = [&tape](const std::string&, const Tensor& t) { return tape.constant_ref(t); };
  std::vector<VarSeq> h = forward_time(shared, tape, frame_vars(tape, features));
  TwoHeadOutput out;
  out.lt_logits = stack_rows(forward_head(ltstream::bind(model.head_lt, "lt.", const_binder), tape, h));
  out.clt_logits = stack_rows(forward_head(ltstream::bind(model.head_clt, "clt.", const_binder), tape, h));
  for (const VarSeq& layer : h) out.stored_h.push_back(stack_rows(layer));
  return out;
}

}  // namespace ltstream
