// ltstream/recipe.h
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
// Staged training recipes.
//
// A recipe is a list of ladders. Each ladder owns one model and runs its
// stages in order; a stage starts from the checkpoint named by its seed
// ("ladder.stage") or, if it has none, from a fresh initialization. Stage
// references only look backwards, so the recipe runs top to bottom.
// Optional sections train the first-pass head of a two-head model and
// compare lattice LM orders for a sequence teacher-student stage.
//
// Training is plain minibatch SGD: gradients averaged over the minibatch
// in utterance order, clipped to a global norm, learning rate multiplied
// by `decay` after each epoch. Sequence-stage lattices are generated once
// from the seed model and held fixed for the stage.

#ifndef LTSTREAM_RECIPE_H_
#define LTSTREAM_RECIPE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltstream/checkpoint.h"
#include "ltstream/corpus.h"
#include "ltstream/criteria.h"
#include "ltstream/decoder.h"
#include "ltstream/scoring.h"

namespace ltstream {

class RecipeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A frozen parameter group changed during training.
class FreezeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnsembleSpec {
  std::vector<std::string> teachers;  // "ladder.stage"
  std::vector<double> weights;
};

struct StageSpec {
  std::string name;
  Criterion criterion = Criterion::kCE;
  std::size_t epochs = 1;
  double lr = 0.1;
  double decay = 1.0;
  std::string seed;                  // "ladder.stage"; empty starts from init
  std::size_t lattice_lm_order = 0;  // 0: the runtime LM
  std::size_t nbest = 16;
  std::optional<EnsembleSpec> ensemble;
  std::vector<std::string> freeze;   // parameter groups
};

struct LadderSpec {
  std::string name;
  ModelConfig model;
  std::uint64_t init_seed = 1;
  double init_range = kInitRange;
  std::vector<StageSpec> stages;
};

struct TwoHeadSpec {
  std::string source;  // final stage of a cltlstm ladder
  std::uint64_t head_seed = 1;
  double init_range = kInitRange;
  std::vector<StageSpec> stages;  // chained; seeds are implicit
};

struct LmStrengthSpec {
  std::string seed;  // MMI checkpoint of the student
  EnsembleSpec ensemble;
  std::vector<std::size_t> orders;
  std::size_t epochs = 1;
  double lr = 0.1;
  double decay = 1.0;
};

struct RecipeConfig {
  int version = 1;
  std::uint64_t seed = 1;  // minibatch order
  ToyTaskSpec task;
  std::size_t num_utterances = 200;
  std::size_t test_utterances = 100;
  std::string corpus_dir;  // read instead of generating when set
  std::size_t lm_order = 3;
  double lm_add_k = 0.5;
  DecoderConfig decoder;
  LatticeConfig lattice;
  double kappa = 1.0;
  std::size_t minibatch = 8;
  double clip_norm = 1.0;
  std::vector<LadderSpec> ladders;
  std::optional<TwoHeadSpec> two_head;
  std::optional<LmStrengthSpec> lm_strength;

  // Throws RecipeError naming the offending stage.
  void validate() const;
};

RecipeConfig recipe_from_json(const std::string& text);
std::string recipe_to_json(const RecipeConfig& config);
RecipeConfig read_recipe(const std::filesystem::path& path);

// Parameter groups: "time", "depth", "context", "output".
std::string param_group(const std::string& param_name);
std::vector<std::string> param_groups(const LayerTrajectoryModel& model);

// ---- data -------------------------------------------------------------------------

struct RecipeData {
  Corpus corpus;
  Corpus test;
  Split split;
  Tensor priors;
  NGramLM runtime_lm;
  std::map<std::size_t, NGramLM> lattice_lms;

  const NGramLM& lm(std::size_t order) const;
};

RecipeData prepare_data(const RecipeConfig& config);

// Acoustic scores of a model on one utterance.
Tensor model_scores(const LayerTrajectoryModel& model, const Tensor& features,
                    const Tensor& priors, double kappa);

struct Evaluation {
  ScoredResult wer;       // pooled over the utterances
  ScoredResult senones;   // frame-level argmax accuracy
};
Evaluation evaluate_model(const LayerTrajectoryModel& model, const Corpus& data,
                          const std::vector<std::size_t>& which, const RecipeData& rd,
                          const RecipeConfig& config);

// Per-utterance combined teacher posteriors (frame_combine of each
// teacher's softmax outputs).
std::vector<Tensor> build_ensemble(const std::vector<const LayerTrajectoryModel*>& teachers,
                                   const std::vector<double>& weights, const Corpus& corpus);

// ---- stages ------------------------------------------------------------------------

struct MetricsSink {
  std::function<void(const std::string& json_line)> write;
  void emit(const std::string& line) const {
    if (write) write(line);
  }
};

struct StageOutcome {
  Checkpoint checkpoint;
  std::vector<double> train_loss;  // index 0 is before the first update
  std::vector<double> valid_loss;
  Evaluation test;
};

struct StageInputs {
  const RecipeConfig* config = nullptr;
  const RecipeData* data = nullptr;
  std::string tag;  // label written to the metrics log
  const std::vector<Tensor>* teacher_posteriors = nullptr;  // SEQ_TS, per utterance
  std::filesystem::path lattice_dir;  // written when non-empty
  MetricsSink metrics;
};

StageOutcome run_stage(const StageInputs& in, const StageSpec& stage,
                       const LayerTrajectoryModel& seed_model);

// Mean criterion value over the given utterances with fixed supervision.
double stage_loss(const LayerTrajectoryModel& model, const StageSpec& stage,
                  const StageInputs& in, const std::vector<std::size_t>& which,
                  const std::vector<Lattice>& lattices);

// ---- whole recipes -------------------------------------------------------------------

struct TwoHeadOutcome {
  TwoHeadCheckpoint checkpoint;
  std::uint64_t shared_checksum_before = 0;
  std::uint64_t shared_checksum_after = 0;
  double lt_senone_accuracy_init = 0.0;
  double lt_senone_accuracy_final = 0.0;
  std::vector<StageOutcome> stages;
};

struct LmStrengthRow {
  std::size_t order = 0;
  double wer = 0.0;
  double final_train_loss = 0.0;
};

struct RecipeResult {
  std::map<std::string, StageOutcome> stages;  // by "ladder.stage"
  std::vector<std::string> order;
  std::optional<TwoHeadOutcome> two_head;
  std::vector<LmStrengthRow> lm_strength;
};

// Builds the second head from `source`, trains head_lt with the shared
// stack frozen; throws FreezeError if the shared checksum moves.
TwoHeadOutcome run_two_head_recipe(const LayerTrajectoryModel& source, const TwoHeadSpec& spec,
                                   const StageInputs& in,
                                   const std::map<std::string, const LayerTrajectoryModel*>& pool);

std::vector<LmStrengthRow> compare_lm_strength(
    const LayerTrajectoryModel& student, const LmStrengthSpec& spec, const StageInputs& in,
    const std::map<std::string, const LayerTrajectoryModel*>& pool);

// Runs everything; with a non-empty run_dir writes the layout described in
// docs/formats.md (configs/, checkpoints/, lattices/, logs/, reports/).
RecipeResult run_recipe(const RecipeConfig& config, const std::filesystem::path& run_dir);

}  // namespace ltstream

#endif  // LTSTREAM_RECIPE_H_
