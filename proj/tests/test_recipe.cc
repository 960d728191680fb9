// ltstream/tests/test_recipe.cc
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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ltstream/recipe.h"

namespace ltstream {
namespace {

ModelConfig tiny_model(Variant v, std::size_t tau) {
  ModelConfig m;
  m.variant = v;
  m.num_layers = 2;
  m.hidden_dim = 8;
  m.proj_dim = 4;
  m.input_dim = 8;
  m.num_senones = 61;
  m.tau = tau;
  return m;
}

StageSpec stage(const std::string& name, Criterion c, std::size_t epochs, double lr,
                const std::string& seed = "") {
  StageSpec s;
  s.name = name;
  s.criterion = c;
  s.epochs = epochs;
  s.lr = lr;
  s.seed = seed;
  return s;
}

// Small enough to run a full ladder in a few seconds.
RecipeConfig tiny_recipe() {
  RecipeConfig c;
  c.seed = 3;
  c.num_utterances = 30;
  c.test_utterances = 10;
  c.task.min_words = 2;
  c.task.max_words = 4;
  c.decoder.beam = 12;
  c.decoder.max_active = 200;
  c.lattice.search = c.decoder;
  c.lattice.lattice_beam = 6;
  c.minibatch = 4;
  LadderSpec t;
  t.name = "t";
  t.model = tiny_model(Variant::kCltLstm, 1);
  t.init_seed = 5;
  t.init_range = 0.5;
  t.stages = {stage("ce", Criterion::kCE, 3, 1.0), stage("mmi", Criterion::kMMI, 1, 0.01, "t.ce")};
  LadderSpec s = t;
  s.name = "s";
  s.init_seed = 6;
  StageSpec ts = stage("ts", Criterion::kSeqTS, 1, 0.02, "s.mmi");
  ts.ensemble = EnsembleSpec{{"t.ce", "t.mmi"}, {0.5, 0.5}};
  s.stages = {stage("ce", Criterion::kCE, 3, 1.0), stage("mmi", Criterion::kMMI, 1, 0.01, "s.ce"),
              ts};
  c.ladders = {t, s};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ltstream_recipe_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Fixture data shared by the stage-level tests.
class StageTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new RecipeConfig(tiny_recipe());
    data_ = new RecipeData(prepare_data(*config_));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete config_;
  }
  StageInputs inputs(const std::string& tag) const {
    StageInputs in;
    in.config = config_;
    in.data = data_;
    in.tag = tag;
    return in;
  }
  static LayerTrajectoryModel fresh(std::uint64_t seed = 9) {
    return LayerTrajectoryModel::random(tiny_model(Variant::kCltLstm, 1), seed, 0.5);
  }
  static RecipeConfig* config_;
  static RecipeData* data_;
};
RecipeConfig* StageTest::config_ = nullptr;
RecipeData* StageTest::data_ = nullptr;

TEST(RecipeConfig, JsonRoundTrip) {
  RecipeConfig c = tiny_recipe();
  RecipeConfig back = recipe_from_json(recipe_to_json(c));
  EXPECT_EQ(recipe_to_json(back), recipe_to_json(c));
  EXPECT_EQ(back.ladders[1].stages[2].ensemble->teachers, c.ladders[1].stages[2].ensemble->teachers);
}

TEST(RecipeConfig, SmokeConfigParses) {
  RecipeConfig c = read_recipe(LTSTREAM_SOURCE_DIR "/configs/smoke_recipe.json");
  EXPECT_EQ(c.ladders.size(), 3u);
  EXPECT_TRUE(c.two_head.has_value());
  EXPECT_TRUE(c.lm_strength.has_value());
}

void expect_rejected(const RecipeConfig& c, const std::string& needle) {
  try {
    c.validate();
    ADD_FAILURE() << "accepted; expected an error mentioning " << needle;
  } catch (const RecipeError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(RecipeConfig, SeqTsWithoutEnsembleNamesStage) {
  RecipeConfig c = tiny_recipe();
  c.ladders[1].stages[2].ensemble.reset();
  expect_rejected(c, "s.ts");
  expect_rejected(c, "ensemble");
}

TEST(RecipeConfig, SequenceStageNeedsSeed) {
  RecipeConfig c = tiny_recipe();
  c.ladders[0].stages[1].seed.clear();
  expect_rejected(c, "t.mmi (MMI) needs a seed checkpoint");
  c = tiny_recipe();
  c.ladders[1].stages[2].seed = "s.ce";
  expect_rejected(c, "from an MMI stage");
  c = tiny_recipe();
  c.ladders[1].stages[1].seed = "s.nope";
  expect_rejected(c, "'s.nope' is not an earlier stage");
  c = tiny_recipe();
  c.ladders[1].stages[1].seed = "t.ce";
  expect_rejected(c, "another ladder");
}

TEST(RecipeConfig, OtherMistakes) {
  RecipeConfig c = tiny_recipe();
  c.ladders[1].stages[2].ensemble->teachers = {"t.ce", "s.later"};
  expect_rejected(c, "teacher 's.later'");
  c = tiny_recipe();
  c.ladders[1].stages[2].ensemble->weights = {0.7, 0.7};
  expect_rejected(c, "s.ts");
  c = tiny_recipe();
  c.ladders[0].stages[0].freeze = {"lstm"};
  expect_rejected(c, "unknown parameter group 'lstm'");
  c = tiny_recipe();
  c.ladders[0].model.num_senones = 60;
  expect_rejected(c, "num_senones must be 61");
  c = tiny_recipe();
  c.ladders[0].stages[0].ensemble = EnsembleSpec{{"t.ce"}, {1.0}};
  expect_rejected(c, "only SEQ_TS");
  c = tiny_recipe();
  c.two_head = TwoHeadSpec{"t.ce", 1, 0.5, {stage("ce", Criterion::kCE, 1, 1.0)}};
  expect_rejected(c, "final stage");
}

TEST(RecipeConfig, JsonSchemaErrors) {
  const std::string good = recipe_to_json(tiny_recipe());
  auto edit = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return s.replace(at, from.size(), to);
  };
  EXPECT_THROW(recipe_from_json(edit("\"minibatch\"", "\"mini_batch\"")), std::invalid_argument);
  EXPECT_THROW(recipe_from_json(edit("\"criterion\": \"MMI\"", "\"criterion\": \"MPE\"")),
               std::invalid_argument);
  EXPECT_THROW(recipe_from_json(edit("\"epochs\": 3", "\"epochs\": -3")), std::invalid_argument);
  EXPECT_THROW(recipe_from_json("{\"version\": 1"), std::invalid_argument);
  EXPECT_THROW(recipe_from_json(edit("\"version\": 1", "\"version\": 2")), RecipeError);
}

TEST(RecipeConfig, ParamGroups) {
  auto m = LayerTrajectoryModel::random(tiny_model(Variant::kCltLstm, 2), 1);
  EXPECT_EQ(param_groups(m), (std::vector<std::string>{"time", "depth", "context", "output"}));
  auto p = LayerTrajectoryModel::random(tiny_model(Variant::kPlainLstm, 0), 1);
  EXPECT_EQ(param_groups(p), (std::vector<std::string>{"time", "output"}));
}

TEST_F(StageTest, ZeroEpochsReturnsSeed) {
  LayerTrajectoryModel seed = fresh();
  StageOutcome out = run_stage(inputs("z"), stage("ce", Criterion::kCE, 0, 1.0), seed);
  EXPECT_EQ(flatten(out.checkpoint.model), flatten(seed));
  EXPECT_EQ(out.train_loss.size(), 1u);
  EXPECT_EQ(out.checkpoint.stage, "CE");
}

TEST_F(StageTest, CeLossDecreases) {
  StageOutcome out = run_stage(inputs("ce"), stage("ce", Criterion::kCE, 3, 1.0), fresh());
  ASSERT_EQ(out.train_loss.size(), 4u);
  EXPECT_LT(out.train_loss.back(), out.train_loss.front());
  EXPECT_LT(out.valid_loss.back(), out.valid_loss.front());
}

TEST_F(StageTest, SequenceStagesDoNotIncreaseTheirLoss) {
  LayerTrajectoryModel ce =
      run_stage(inputs("ce"), stage("ce", Criterion::kCE, 3, 1.0), fresh()).checkpoint.model;
  for (Criterion c : {Criterion::kMMI, Criterion::kEMBR}) {
    StageOutcome out = run_stage(inputs("seq"), stage("seq", c, 2, 0.01), ce);
    EXPECT_LE(out.train_loss.back(), out.train_loss.front()) << to_string(c);
  }
}

TEST_F(StageTest, SeqTsNeedsTeacherPosteriors) {
  EXPECT_THROW(run_stage(inputs("ts"), stage("ts", Criterion::kSeqTS, 1, 0.01), fresh()),
               RecipeError);
}

TEST_F(StageTest, SeqTsTowardsItselfIsStationary) {
  // Student as its own teacher: the loss is the lattice entropy, but the
  // gradient (student minus teacher occupancies) is zero.
  LayerTrajectoryModel m = fresh();
  std::vector<Tensor> self = build_ensemble({&m}, {1.0}, data_->corpus);
  StageInputs in = inputs("self");
  in.teacher_posteriors = &self;
  StageSpec s = stage("ts", Criterion::kSeqTS, 1, 0.5);
  StageOutcome out = run_stage(in, s, m);
  EXPECT_GE(out.train_loss.front(), 0.0);
  const auto a = flatten(out.checkpoint.model);
  const auto b = flatten(m);
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t j = 0; j < a[p].size(); ++j) EXPECT_NEAR(a[p][j], b[p][j], 1e-9);
}

TEST_F(StageTest, FrozenGroupsUntouched) {
  LayerTrajectoryModel seed = fresh();
  StageSpec s = stage("ce", Criterion::kCE, 1, 1.0);
  s.freeze = {"time", "context"};
  StageOutcome out = run_stage(inputs("freeze"), s, seed);
  const auto names = param_names(seed);
  const auto before = flatten(seed);
  const auto after = flatten(out.checkpoint.model);
  bool others_moved = false;
  for (std::size_t p = 0; p < names.size(); ++p) {
    const std::string g = param_group(names[p]);
    if (g == "time" || g == "context") {
      EXPECT_EQ(after[p], before[p]) << names[p];
    } else if (!(after[p] == before[p])) {
      others_moved = true;
    }
  }
  EXPECT_TRUE(others_moved);
}

TEST_F(StageTest, CheckpointReloadReproducesValidLoss) {
  StageSpec s = stage("ce", Criterion::kCE, 2, 1.0);
  StageOutcome out = run_stage(inputs("ck"), s, fresh());
  auto dir = scratch("ck");
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "m.ltck", out.checkpoint);
  Checkpoint back = load_checkpoint(dir / "m.ltck");
  EXPECT_EQ(back.valid_loss, out.valid_loss);
  const double again = stage_loss(back.model, s, inputs("ck"), data_->split.valid, {});
  EXPECT_EQ(again, out.valid_loss.back());
  std::filesystem::remove_all(dir);
}

TEST_F(StageTest, LatticesWritten) {
  auto dir = scratch("lat");
  StageInputs in = inputs("lat");
  in.lattice_dir = dir;
  run_stage(in, stage("mmi", Criterion::kMMI, 0, 0.01), fresh());
  const auto& u = data_->corpus.utterances.front();
  Lattice lat = read_lattice(dir / (u.id + ".lat"));
  EXPECT_NO_THROW(validate(lat));
  // MMI lattices carry the reference path.
  EXPECT_NO_THROW(find_aligned_path(lat, u.words, u.alignment));
  std::filesystem::remove_all(dir);
}

TEST_F(StageTest, MetricsLines) {
  std::vector<std::string> lines;
  StageInputs in = inputs("m");
  in.metrics.write = [&](const std::string& l) { lines.push_back(l); };
  run_stage(in, stage("ce", Criterion::kCE, 2, 1.0), fresh());
  ASSERT_EQ(lines.size(), 4u);  // epochs 0..2 and the test evaluation
  EXPECT_NE(lines[1].find("\"epoch\":1"), std::string::npos);
  EXPECT_NE(lines[3].find("\"event\":\"test\""), std::string::npos);
}

TEST_F(StageTest, EnsembleIdentities) {
  LayerTrajectoryModel a = fresh(1), b = fresh(2);
  const auto one = build_ensemble({&a}, {1.0}, data_->corpus);
  const auto twice = build_ensemble({&a, &a}, {0.25, 0.75}, data_->corpus);
  const auto mix = build_ensemble({&a, &b}, {0.5, 0.5}, data_->corpus);
  ASSERT_EQ(one.size(), data_->corpus.utterances.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    const Tensor pa = posteriors(forward_logits(a, data_->corpus.utterances[i].features));
    const Tensor pb = posteriors(forward_logits(b, data_->corpus.utterances[i].features));
    for (std::size_t j = 0; j < pa.size(); ++j) {
      EXPECT_NEAR(one[i][j], pa[j], 1e-15);
      EXPECT_NEAR(twice[i][j], pa[j], 1e-15);
      EXPECT_NEAR(mix[i][j], 0.5 * (pa[j] + pb[j]), 1e-15);
    }
  }
  EXPECT_THROW(build_ensemble({&a, &b}, {0.5, 0.6}, data_->corpus), CriterionError);
}

TEST_F(StageTest, TwoHeadKeepsSharedStack) {
  LayerTrajectoryModel src =
      run_stage(inputs("src"), stage("ce", Criterion::kCE, 2, 1.0), fresh()).checkpoint.model;
  TwoHeadSpec spec;
  spec.source = "x";
  spec.head_seed = 4;
  spec.init_range = 0.5;
  spec.stages = {stage("ce", Criterion::kCE, 3, 1.0)};
  spec.stages[0].freeze = {"shared"};
  TwoHeadOutcome out = run_two_head_recipe(src, spec, inputs("two_head"), {});
  EXPECT_EQ(out.shared_checksum_before, checksum(src.time));
  EXPECT_EQ(out.shared_checksum_after, out.shared_checksum_before);
  EXPECT_EQ(flatten(out.checkpoint.model.clt_model()), flatten(src));
  EXPECT_EQ(out.checkpoint.model.head_lt.tau, 0u);
  EXPECT_GT(out.lt_senone_accuracy_final, out.lt_senone_accuracy_init);
}

TEST(Recipe, RunDirectoryAndDeterminism) {
  RecipeConfig c = tiny_recipe();
  c.ladders[1].stages[0].epochs = 1;
  c.two_head = TwoHeadSpec{"s.ts", 2, 0.5, {stage("ce", Criterion::kCE, 1, 1.0)}};
  c.lm_strength = LmStrengthSpec{"s.mmi", EnsembleSpec{{"t.mmi"}, {1.0}}, {1, 2}, 1, 0.02, 1.0};
  const auto a = scratch("run_a");
  const auto b = scratch("run_b");
  RecipeResult ra = run_recipe(c, a);
  run_recipe(c, b);
  EXPECT_EQ(slurp(a / "logs" / "metrics.jsonl"), slurp(b / "logs" / "metrics.jsonl"));
  EXPECT_FALSE(slurp(a / "logs" / "metrics.jsonl").empty());
  for (const char* f : {"configs/recipe.json", "checkpoints/t.ce.ltck", "checkpoints/s.ts.ltck",
                        "checkpoints/s.ts.teachers.ltck", "checkpoints/two_head.ltck",
                        "reports/summary.json", "reports/lm_strength.json"})
    EXPECT_TRUE(std::filesystem::exists(a / f)) << f;
  EXPECT_EQ(ra.order, (std::vector<std::string>{"t.ce", "t.mmi", "s.ce", "s.mmi", "s.ts"}));
  ASSERT_EQ(ra.lm_strength.size(), 2u);
  EXPECT_EQ(ra.lm_strength[1].order, 2u);
  // The saved recipe reproduces the original.
  EXPECT_EQ(recipe_to_json(read_recipe(a / "configs" / "recipe.json")), recipe_to_json(c));
  Checkpoint ck = load_checkpoint(a / "checkpoints" / "s.ts.ltck");
  EXPECT_EQ(flatten(ck.model), flatten(ra.stages.at("s.ts").checkpoint.model));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

}  // namespace
}  // namespace ltstream
