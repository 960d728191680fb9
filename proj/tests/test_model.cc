// ltstream/tests/test_model.cc
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

#include <gtest/gtest.h>

#include "ltstream/model.h"
#include "ltstream/streaming.h"

namespace ltstream {
namespace {

ModelConfig small(Variant v, std::size_t tau = 0, std::size_t layers = 2) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_dim = 6;
  c.proj_dim = 4;
  c.input_dim = 3;
  c.num_senones = 5;
  c.tau = tau;
  c.variant = v;
  return c;
}

Tensor random_frames(std::size_t T, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor f(Shape{T, dim});
  for (double& v : f.data()) v = rng.uniform(-1.5, 1.5);
  return f;
}

// Scales parameters up so perturbations are clearly visible in the logits.
LayerTrajectoryModel generic(const ModelConfig& c, std::uint64_t seed) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(c, seed);
  for_each_param(m, [](const std::string&, Tensor& t) {
    for (double& v : t.data()) v *= 20.0;
  });
  return m;
}

bool rows_equal(const Tensor& a, const Tensor& b, std::size_t r) {
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (a.at(r, j) != b.at(r, j)) return false;
  return true;
}

TEST(ConfigTest, LookaheadFrames) {
  ModelConfig c = small(Variant::kCltLstm, 4, 6);
  EXPECT_EQ(lookahead_frames(c), 24u);
  c.tau = 2;
  EXPECT_EQ(lookahead_frames(c), 12u);
  c.tau = 0;
  EXPECT_EQ(lookahead_frames(c), 0u);
}

TEST(ConfigTest, VariantRules) {
  EXPECT_THROW(small(Variant::kLtLstm, 1).validate(), ConfigError);
  EXPECT_THROW(small(Variant::kPlainLstm, 2).validate(), ConfigError);
  EXPECT_NO_THROW(small(Variant::kCltLstm, 2).validate());
  EXPECT_EQ(parse_variant("cltlstm"), Variant::kCltLstm);
  EXPECT_THROW(parse_variant("blstm"), ConfigError);
}

TEST(ConfigTest, AllOnesParamCountIsHandCountable) {
  ModelConfig c;
  c.num_layers = c.hidden_dim = c.proj_dim = c.input_dim = c.num_senones = 1;
  // One cell: 4*1*(1+1) gate weights + 4 biases + 1 projection = 13;
  // output layer: 1 weight + 1 bias.
  c.variant = Variant::kPlainLstm;
  EXPECT_EQ(param_count(c), 15u);
  c.variant = Variant::kLtLstm;
  EXPECT_EQ(param_count(c), 28u);
  c.variant = Variant::kCltLstm;
  c.tau = 1;
  EXPECT_EQ(param_count(c), 29u);
  c.learn_current_context = true;
  EXPECT_EQ(param_count(c), 30u);
}

TEST(ConfigTest, ParamCountMatchesAllocation) {
  for (Variant v : {Variant::kPlainLstm, Variant::kLtLstm, Variant::kCltLstm}) {
    for (std::size_t tau : {0u, 1u, 3u}) {
      if (v != Variant::kCltLstm && tau) continue;
      for (bool learned : {false, true}) {
        ModelConfig c = small(v, tau, 3);
        c.learn_current_context = learned;
        LayerTrajectoryModel m = LayerTrajectoryModel::random(c, 1);
        EXPECT_EQ(param_count(c), allocated_params(m)) << to_string(v) << " tau " << tau;
      }
    }
  }
}

TEST(TimeStackTest, ZeroParamsGiveZeroOutputs) {
  LayerTrajectoryModel m = LayerTrajectoryModel::zeros(small(Variant::kPlainLstm));
  for (const Tensor& h : forward_time_lstm(m.time, random_frames(5, 3, 1)))
    for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(TimeStackTest, OneLayerOneFrameIsOneStep) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kPlainLstm, 0, 1), 3);
  Tensor x = random_frames(1, 3, 2);
  auto h = forward_time_lstm(m.time, x);
  CellState s = lstmp_step(m.time.layers[0], CellState::zeros(6, 4),
                           Tensor::vector({x[0], x[1], x[2]}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(h[0].at(0, j), s.output[j]);
}

TEST(TimeStackTest, IncrementalEqualsBatchBitwise) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kPlainLstm, 0, 3), 4);
  Tensor x = random_frames(9, 3, 5);
  auto batch = forward_time_lstm(m.time, x);
  StreamingTimeStack s(m.time);
  for (std::size_t t = 0; t < 9; ++t) s.push(Tensor::vector({x.at(t, 0), x.at(t, 1), x.at(t, 2)}));
  auto inc = s.stored_matrices();
  ASSERT_EQ(inc.size(), batch.size());
  for (std::size_t l = 0; l < inc.size(); ++l) EXPECT_EQ(inc[l], batch[l]);
  EXPECT_EQ(s.evaluations(), 9u);
}

TEST(TimeStackTest, RejectsWrongFrameWidth) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kPlainLstm), 4);
  EXPECT_THROW(forward_time_lstm(m.time, random_frames(3, 4, 1)), ShapeError);
  StreamingTimeStack s(m.time);
  EXPECT_THROW(s.push(Tensor(Shape{2})), ShapeError);
}

TEST(LtLstmTest, ZeroHeadGivesZeroLogits) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kLtLstm), 9);
  m.head = zero_head(m.config);
  Tensor logits = forward_ltlstm(m, random_frames(4, 3, 1));
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(LtLstmTest, SingleLayerIsOneDepthStep) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kLtLstm, 0, 1), 9);
  Tensor x = random_frames(3, 3, 2);
  Tensor logits = forward_ltlstm(m, x);
  Tensor h = forward_time_lstm(m.time, x)[0];
  for (std::size_t t = 0; t < 3; ++t) {
    CellState g = lstmp_step(m.head.layers[0], CellState::zeros(6, 4),
                             Tensor::vector({h.at(t, 0), h.at(t, 1), h.at(t, 2), h.at(t, 3)}));
    for (std::size_t s = 0; s < 5; ++s) {
      double want = m.head.output.bias[s];
      for (std::size_t j = 0; j < 4; ++j) want += m.head.output.weights.at(s, j) * g.output[j];
      EXPECT_NEAR(logits.at(t, s), want, 1e-14);
    }
  }
}

TEST(LtLstmTest, Causal) {
  LayerTrajectoryModel m = generic(small(Variant::kLtLstm), 12);
  Tensor x = random_frames(5, 3, 3);
  Tensor base = forward_ltlstm(m, x);
  for (std::size_t t = 0; t + 1 < 5; ++t) {
    Tensor y = x;
    y.at(t + 1, 0) += 0.5;
    Tensor moved = forward_ltlstm(m, y);
    for (std::size_t u = 0; u <= t; ++u) EXPECT_TRUE(rows_equal(base, moved, u));
    EXPECT_FALSE(rows_equal(base, moved, t + 1));
  }
}

TEST(LtLstmTest, WrongVariantRejected) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kCltLstm, 1), 1);
  EXPECT_THROW(forward_ltlstm(m, random_frames(3, 3, 1)), ConfigError);
  LayerTrajectoryModel lt = LayerTrajectoryModel::random(small(Variant::kLtLstm), 1);
  EXPECT_THROW(forward_cltlstm(lt, random_frames(3, 3, 1)), ConfigError);
}

TEST(LookaheadTest, IdentityCollapse) {
  Tensor g = Tensor::vector({0.3, -0.7});
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  std::vector<Tensor> window{g}, ctx{eye};
  EXPECT_EQ(lookahead_embedding(window, ctx), g);
  // Implicit identity for the current frame, no further matrices.
  EXPECT_EQ(lookahead_embedding(window, std::vector<Tensor>{}, false), g);
}

TEST(LookaheadTest, ZeroInputsGiveZero) {
  std::vector<Tensor> window{Tensor(Shape{2}), Tensor(Shape{2})};
  std::vector<Tensor> ctx{Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(2, 2, {5, 6, 7, 8})};
  Tensor z = lookahead_embedding(window, ctx);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(LookaheadTest, HandComputedTauOne) {
  // G0 g0 = (5, 2), G1 g1 = (1, 3).
  std::vector<Tensor> window{Tensor::vector({1, 2}), Tensor::vector({3, -1})};
  std::vector<Tensor> ctx{Tensor::matrix(2, 2, {1, 2, 0, 1}), Tensor::matrix(2, 2, {0, -1, 1, 0})};
  EXPECT_EQ(lookahead_embedding(window, ctx), Tensor::vector({6, 5}));
}

TEST(LookaheadTest, ShortWindowRejected) {
  std::vector<Tensor> window{Tensor::vector({1, 2})};
  std::vector<Tensor> ctx{Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::matrix(2, 2, {1, 0, 0, 1})};
  EXPECT_THROW(lookahead_embedding(window, ctx), LookaheadError);
  EXPECT_THROW(lookahead_embedding(window, std::span<const Tensor>(ctx).first(1), false),
               LookaheadError);
}

TEST(CltLstmTest, TauZeroIdentityEqualsLtLstm) {
  ModelConfig c = small(Variant::kCltLstm, 0, 3);
  c.learn_current_context = true;
  LayerTrajectoryModel clt = LayerTrajectoryModel::random(c, 21);
  for (auto& per_layer : clt.head.context) per_layer[0] = Tensor::matrix(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  LayerTrajectoryModel lt = LayerTrajectoryModel::random(small(Variant::kLtLstm, 0, 3), 1);
  lt.time = clt.time;
  lt.head.layers = clt.head.layers;
  lt.head.output = clt.head.output;
  Tensor x = random_frames(7, 3, 8);
  EXPECT_EQ(forward_cltlstm(clt, x), forward_ltlstm(lt, x));
}

TEST(CltLstmTest, LookaheadFootprint) {
  ModelConfig c = small(Variant::kCltLstm, 2, 2);  // N = 4
  LayerTrajectoryModel m = generic(c, 31);
  const std::size_t N = lookahead_frames(c);
  Tensor x = random_frames(14, 3, 4);
  Tensor base = forward_cltlstm(m, x);
  for (std::size_t t = 0; t + N + 2 < 14; ++t) {
    Tensor far = x;
    far.at(t + N + 1, 1) += 0.5;
    EXPECT_TRUE(rows_equal(base, forward_cltlstm(m, far), t)) << t;
    Tensor near = x;
    near.at(t + N, 1) += 0.5;
    EXPECT_FALSE(rows_equal(base, forward_cltlstm(m, near), t)) << t;
  }
}

TEST(CltLstmTest, ZeroParamsGiveZeroLogits) {
  LayerTrajectoryModel m = LayerTrajectoryModel::zeros(small(Variant::kCltLstm, 2));
  Tensor logits = forward_cltlstm(m, random_frames(5, 3, 1));
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(CltLstmTest, ShortUtteranceUsesEdgePadding) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kCltLstm, 3), 5);
  Tensor logits = forward_cltlstm(m, random_frames(2, 3, 9));
  EXPECT_EQ(logits.rows(), 2u);
  EXPECT_TRUE(logits.all_finite());
}

TEST(StreamingTest, AllVariantsMatchBatchBitwise) {
  struct Case {
    Variant v;
    std::size_t tau;
    bool learned;
  };
  for (Case k : {Case{Variant::kPlainLstm, 0, false}, Case{Variant::kLtLstm, 0, false},
                 Case{Variant::kCltLstm, 1, false}, Case{Variant::kCltLstm, 3, false},
                 Case{Variant::kCltLstm, 2, true}, Case{Variant::kCltLstm, 0, true}}) {
    ModelConfig c = small(k.v, k.tau, 3);
    c.learn_current_context = k.learned;
    LayerTrajectoryModel m = LayerTrajectoryModel::random(c, 17);
    for (std::size_t T : {1u, 2u, 5u, 13u}) {
      Tensor x = random_frames(T, 3, T);
      EXPECT_EQ(stream_logits(m, x), forward_logits(m, x)) << to_string(k.v) << " tau " << k.tau;
    }
  }
}

TEST(StreamingTest, EmissionDelayAndBuffer) {
  ModelConfig c = small(Variant::kCltLstm, 2, 3);  // N = 6
  LayerTrajectoryModel m = LayerTrajectoryModel::random(c, 2);
  StreamingModel s(m);
  Tensor x = random_frames(12, 3, 1);
  std::size_t emitted = 0;
  for (std::size_t t = 0; t < 12; ++t) {
    for (const Emission& e : s.push(Tensor::vector({x.at(t, 0), x.at(t, 1), x.at(t, 2)}))) {
      EXPECT_EQ(e.frame + lookahead_frames(c), t);
      ++emitted;
    }
  }
  EXPECT_EQ(emitted, 12u - 6u);
  EXPECT_EQ(s.finish().size(), 6u);
  EXPECT_EQ(s.time().evaluations(), 12u);
}

TEST(StreamingTest, RingBufferHoldsAtMostTauPlusOne) {
  ModelConfig c = small(Variant::kCltLstm, 3, 2);
  LayerTrajectoryModel m = LayerTrajectoryModel::random(c, 2);
  StreamingTimeStack time(m.time);
  StreamingHead head(m.head);
  Tensor x = random_frames(20, 3, 1);
  for (std::size_t t = 0; t < 20; ++t)
    head.push(time.push(Tensor::vector({x.at(t, 0), x.at(t, 1), x.at(t, 2)})));
  EXPECT_EQ(head.peak_buffer(), 4u);
}

TEST(TwoHeadTest, BuildSecondHeadContracts) {
  LayerTrajectoryModel clt = LayerTrajectoryModel::random(small(Variant::kCltLstm, 2), 41);
  TwoHeadModel two = build_second_head(clt, 99);
  EXPECT_TRUE(two.frozen_shared);
  EXPECT_EQ(checksum(two.shared), checksum(clt.time));
  Tensor x = random_frames(8, 3, 6);
  EXPECT_EQ(forward_logits(two.clt_model(), x), forward_cltlstm(clt, x));
  Rng rng(99);
  DepthHead fresh = random_head(two.lt_config(), rng);
  EXPECT_EQ(two.head_lt.output.weights, fresh.output.weights);
  EXPECT_EQ(two.head_lt.layers[0].gate_weights, fresh.layers[0].gate_weights);
  EXPECT_NE(two.head_lt.layers[0].gate_weights, clt.head.layers[0].gate_weights);
  EXPECT_EQ(two.head_lt.tau, 0u);
  EXPECT_FALSE(two.head_lt.contextual);
}

TEST(TwoHeadTest, RejectsNonContextualSource) {
  LayerTrajectoryModel lt = LayerTrajectoryModel::random(small(Variant::kLtLstm), 1);
  EXPECT_THROW(build_second_head(lt, 1), ConfigError);
}

TEST(TwoHeadTest, ForwardSharesTimeStack) {
  LayerTrajectoryModel clt = generic(small(Variant::kCltLstm, 1), 43);
  TwoHeadModel two = build_second_head(clt, 5);
  Tensor x = random_frames(9, 3, 2);
  TwoHeadOutput out = forward_two_head(two, x);
  EXPECT_EQ(out.clt_logits, forward_logits(two.clt_model(), x));
  EXPECT_EQ(out.lt_logits, forward_logits(two.lt_model(), x));
  auto h = forward_time_lstm(clt.time, x);
  ASSERT_EQ(out.stored_h.size(), h.size());
  for (std::size_t l = 0; l < h.size(); ++l) EXPECT_EQ(out.stored_h[l], h[l]);
  EXPECT_EQ(forward_head_logits(two.head_clt, out.stored_h), out.clt_logits);

  Tensor y = x;
  y.at(8, 0) += 1.0;
  TwoHeadOutput moved = forward_two_head(two, y);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_TRUE(rows_equal(out.lt_logits, moved.lt_logits, t));
}

TEST(TwoHeadTest, HeadsAreIndependent) {
  LayerTrajectoryModel clt = LayerTrajectoryModel::random(small(Variant::kCltLstm, 1), 43);
  TwoHeadModel two = build_second_head(clt, 5);
  Tensor x = random_frames(6, 3, 2);
  TwoHeadOutput before = forward_two_head(two, x);
  for (double& v : two.head_lt.output.weights.data()) v += 0.3;
  TwoHeadOutput after = forward_two_head(two, x);
  EXPECT_EQ(before.clt_logits, after.clt_logits);
  EXPECT_NE(before.lt_logits, after.lt_logits);
}

TEST(ParamsTest, FlattenRoundTripAndNames) {
  LayerTrajectoryModel m = LayerTrajectoryModel::random(small(Variant::kCltLstm, 2), 1);
  auto names = param_names(m);
  EXPECT_EQ(names.front(), "time.0.gate_w");
  EXPECT_EQ(names.back(), "output.b");
  EXPECT_NE(std::find(names.begin(), names.end(), "context.1.2"), names.end());
  LayerTrajectoryModel z = LayerTrajectoryModel::zeros(m.config);
  unflatten(z, flatten(m));
  EXPECT_EQ(flatten(z), flatten(m));
}

}  // namespace
}  // namespace ltstream
