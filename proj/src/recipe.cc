// ltstream/src/recipe.cc
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

#include "ltstream/recipe.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json_util.h"

namespace ltstream {

namespace {

const std::set<std::string> kGroups = {"time", "depth", "context", "output"};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ladder_of(const std::string& id) { return id.substr(0, id.find('.')); }

void validate_ensemble(const EnsembleSpec& e, const std::set<std::string>& seen,
                       const std::string& where) {
  if (e.teachers.empty()) throw RecipeError(where + ": ensemble has no teachers");
  if (e.teachers.size() != e.weights.size())
    throw RecipeError(where + ": ensemble needs one weight per teacher");
  for (const std::string& t : e.teachers)
    if (!seen.count(t)) throw RecipeError(where + ": teacher '" + t + "' is not an earlier stage");
  try {
    check_weights(e.weights);
  } catch (const CriterionError& err) {
    throw RecipeError(where + ": " + err.what());
  }
}

void validate_common(const StageSpec& s, const std::string& where) {
  if (s.name.empty() || s.name.find('.') != std::string::npos)
    throw RecipeError(where + ": stage names must be non-empty and dot-free");
  if (!(s.lr > 0)) throw RecipeError(where + ": lr must be > 0");
  if (!(s.decay > 0 && s.decay <= 1)) throw RecipeError(where + ": decay must be in (0, 1]");
  if (s.nbest == 0) throw RecipeError(where + ": nbest must be >= 1");
}

std::string fmt_stage(const std::string& id, Criterion c) {
  return "stage " + id + " (" + std::string(to_string(c)) + ")";
}

}  // namespace

// ---- configuration ----------------------------------------------------------------

std::string param_group(const std::string& name) {
  return name.substr(0, name.find('.'));
}

std::vector<std::string> param_groups(const LayerTrajectoryModel& model) {
  std::vector<std::string> out;
  for (const std::string& n : param_names(model)) {
    std::string g = param_group(n);
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

void RecipeConfig::validate() const {
  if (version != 1) throw RecipeError("unsupported recipe version " + std::to_string(version));
  try {
    task.validate();
    decoder.validate();
    lattice.search.validate();
  } catch (const std::exception& e) {
    throw RecipeError(e.what());
  }
  if (num_utterances == 0 && corpus_dir.empty()) throw RecipeError("num_utterances must be >= 1");
  if (test_utterances == 0) throw RecipeError("test_utterances must be >= 1");
  if (lm_order == 0) throw RecipeError("lm.order must be >= 1");
  if (!(lm_add_k > 0)) throw RecipeError("lm.add_k must be > 0");
  if (minibatch == 0) throw RecipeError("training.minibatch must be >= 1");
  if (!(clip_norm > 0)) throw RecipeError("training.clip_norm must be > 0");
  if (!(kappa > 0)) throw RecipeError("training.kappa must be > 0");
  if (ladders.empty()) throw RecipeError("recipe has no ladders");

  const Lexicon lex = task.lexicon();
  std::set<std::string> seen, ladder_names;
  std::map<std::string, Criterion> criterion_of;
  std::map<std::string, std::string> last_stage;
  for (const LadderSpec& l : ladders) {
    if (l.name.empty() || l.name.find('.') != std::string::npos)
      throw RecipeError("ladder names must be non-empty and dot-free");
    if (!ladder_names.insert(l.name).second) throw RecipeError("duplicate ladder " + l.name);
    try {
      l.model.validate();
    } catch (const std::exception& e) {
      throw RecipeError("ladder " + l.name + ": " + e.what());
    }
    if (l.model.input_dim != task.feature_dim)
      throw RecipeError("ladder " + l.name + ": input_dim differs from the task feature_dim");
    if (l.model.num_senones != lex.num_senones())
      throw RecipeError("ladder " + l.name + ": num_senones must be " +
                        std::to_string(lex.num_senones()));
    if (!(l.init_range > 0)) throw RecipeError("ladder " + l.name + ": init_range must be > 0");
    if (l.stages.empty()) throw RecipeError("ladder " + l.name + " has no stages");
    for (const StageSpec& s : l.stages) {
      const std::string id = l.name + "." + s.name;
      const std::string where = fmt_stage(id, s.criterion);
      validate_common(s, where);
      if (seen.count(id)) throw RecipeError(where + ": duplicate stage");
      if (!s.seed.empty()) {
        if (!seen.count(s.seed))
          throw RecipeError(where + ": seed '" + s.seed + "' is not an earlier stage");
        if (ladder_of(s.seed) != l.name)
          throw RecipeError(where + ": seed '" + s.seed + "' belongs to another ladder");
      }
      if (s.criterion == Criterion::kMMI || s.criterion == Criterion::kEMBR) {
        if (s.seed.empty())
          throw RecipeError(where + " needs a seed checkpoint from an earlier CE stage");
      }
      if (s.criterion == Criterion::kSeqTS) {
        if (s.seed.empty() || criterion_of.at(s.seed) != Criterion::kMMI)
          throw RecipeError(where + " needs a seed checkpoint from an MMI stage");
        if (!s.ensemble) throw RecipeError(where + " needs an ensemble");
        validate_ensemble(*s.ensemble, seen, where);
      } else if (s.ensemble) {
        throw RecipeError(where + ": only SEQ_TS stages take an ensemble");
      }
      for (const std::string& g : s.freeze)
        if (!kGroups.count(g))
          throw RecipeError(where + ": unknown parameter group '" + g +
                            "' (expected time, depth, context or output)");
      seen.insert(id);
      criterion_of[id] = s.criterion;
      last_stage[l.name] = id;
    }
  }
  if (two_head) {
    const std::string& src = two_head->source;
    if (!seen.count(src)) throw RecipeError("two_head.source '" + src + "' is not a stage");
    const LadderSpec* ladder = nullptr;
    for (const LadderSpec& l : ladders)
      if (l.name == ladder_of(src)) ladder = &l;
    if (ladder->model.variant != Variant::kCltLstm)
      throw RecipeError("two_head.source must come from a cltlstm ladder");
    if (last_stage.at(ladder->name) != src)
      throw RecipeError("two_head.source must be the final stage of its ladder");
    if (two_head->stages.empty()) throw RecipeError("two_head has no stages");
    Criterion prev = Criterion::kCE;
    bool first = true;
    for (const StageSpec& s : two_head->stages) {
      const std::string where = fmt_stage("two_head." + s.name, s.criterion);
      validate_common(s, where);
      if (!s.seed.empty()) throw RecipeError(where + ": two-head stages chain implicitly");
      if (s.criterion == Criterion::kSeqTS) {
        if (first || prev != Criterion::kMMI)
          throw RecipeError(where + " needs a seed checkpoint from an MMI stage");
        if (!s.ensemble) throw RecipeError(where + " needs an ensemble");
        validate_ensemble(*s.ensemble, seen, where);
      } else if (s.ensemble) {
        throw RecipeError(where + ": only SEQ_TS stages take an ensemble");
      }
      for (const std::string& g : s.freeze)
        if (g != "shared" && !kGroups.count(g))
          throw RecipeError(where + ": unknown parameter group '" + g + "'");
      prev = s.criterion;
      first = false;
    }
  }
  if (lm_strength) {
    const std::string where = "lm_strength";
    if (!seen.count(lm_strength->seed) || criterion_of.at(lm_strength->seed) != Criterion::kMMI)
      throw RecipeError(where + ": seed must name an MMI stage");
    validate_ensemble(lm_strength->ensemble, seen, where);
    if (lm_strength->orders.empty()) throw RecipeError(where + ": no orders");
    for (std::size_t o : lm_strength->orders)
      if (o == 0) throw RecipeError(where + ": orders must be >= 1");
    if (!(lm_strength->lr > 0)) throw RecipeError(where + ": lr must be > 0");
  }
}

namespace {

Json stage_to_json(const StageSpec& s) {
  Json j{{"name", s.name},
         {"criterion", std::string(to_string(s.criterion))},
         {"epochs", s.epochs},
         {"lr", s.lr},
         {"decay", s.decay},
         {"seed", s.seed},
         {"lattice_lm_order", s.lattice_lm_order},
         {"nbest", s.nbest},
         {"freeze", s.freeze}};
  if (s.ensemble) j["ensemble"] = Json{{"teachers", s.ensemble->teachers}, {"weights", s.ensemble->weights}};
  return j;
}

EnsembleSpec ensemble_from_json(const Json& j, const std::string& where) {
  check_keys(j, {"teachers", "weights"}, where);
  EnsembleSpec e;
  read_opt(j, "teachers", e.teachers, where);
  read_opt(j, "weights", e.weights, where);
  return e;
}

StageSpec stage_from_json(const Json& j, const std::string& where) {
  check_keys(j,
             {"name", "criterion", "epochs", "lr", "decay", "seed", "lattice_lm_order", "nbest",
              "ensemble", "freeze"},
             where);
  StageSpec s;
  if (!j.contains("name") || !j.contains("criterion"))
    throw SchemaError(where + ": 'name' and 'criterion' are required");
  read_opt(j, "name", s.name, where);
  std::string crit;
  read_opt(j, "criterion", crit, where);
  try {
    s.criterion = parse_criterion(crit);
  } catch (const CriterionError& e) {
    throw SchemaError(where + ".criterion: " + e.what());
  }
  read_opt(j, "epochs", s.epochs, where);
  read_opt(j, "lr", s.lr, where);
  read_opt(j, "decay", s.decay, where);
  read_opt(j, "seed", s.seed, where);
  read_opt(j, "lattice_lm_order", s.lattice_lm_order, where);
  read_opt(j, "nbest", s.nbest, where);
  read_opt(j, "freeze", s.freeze, where);
  if (j.contains("ensemble")) s.ensemble = ensemble_from_json(j.at("ensemble"), where + ".ensemble");
  return s;
}

std::vector<StageSpec> stages_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array");
  std::vector<StageSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(stage_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

std::string recipe_to_json(const RecipeConfig& c) {
  Json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["task"] = to_json(c.task);
  j["num_utterances"] = c.num_utterances;
  j["test_utterances"] = c.test_utterances;
  if (!c.corpus_dir.empty()) j["corpus_dir"] = c.corpus_dir;
  j["lm"] = Json{{"order", c.lm_order}, {"add_k", c.lm_add_k}};
  j["decoder"] = Json{{"beam", c.decoder.beam},
                      {"max_active", c.decoder.max_active},
                      {"lm_weight", c.decoder.lm_weight}};
  j["lattice"] = Json{{"beam", c.lattice.search.beam},
                      {"max_active", c.lattice.search.max_active},
                      {"lattice_beam", c.lattice.lattice_beam},
                      {"max_arcs", c.lattice.max_arcs},
                      {"max_word_frames", c.lattice.max_word_frames}};
  j["training"] = Json{{"kappa", c.kappa}, {"minibatch", c.minibatch}, {"clip_norm", c.clip_norm}};
  j["ladders"] = Json::array();
  for (const LadderSpec& l : c.ladders) {
    Json lj{{"name", l.name},
            {"model", to_json(l.model)},
            {"init_seed", l.init_seed},
            {"init_range", l.init_range}};
    lj["stages"] = Json::array();
    for (const StageSpec& s : l.stages) lj["stages"].push_back(stage_to_json(s));
    j["ladders"].push_back(lj);
  }
  if (c.two_head) {
    Json t{{"source", c.two_head->source},
           {"head_seed", c.two_head->head_seed},
           {"init_range", c.two_head->init_range}};
    t["stages"] = Json::array();
    for (const StageSpec& s : c.two_head->stages) t["stages"].push_back(stage_to_json(s));
    j["two_head"] = t;
  }
  if (c.lm_strength) {
    const LmStrengthSpec& m = *c.lm_strength;
    j["lm_strength"] = Json{{"seed", m.seed},
                            {"ensemble", Json{{"teachers", m.ensemble.teachers},
                                              {"weights", m.ensemble.weights}}},
                            {"orders", m.orders},
                            {"epochs", m.epochs},
                            {"lr", m.lr},
                            {"decay", m.decay}};
  }
  return j.dump(2);
}

RecipeConfig recipe_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("recipe: ") + e.what());
  }
  const std::string w = "recipe";
  check_keys(j,
             {"version", "seed", "task", "num_utterances", "test_utterances", "corpus_dir", "lm",
              "decoder", "lattice", "training", "ladders", "two_head", "lm_strength"},
             w);
  RecipeConfig c;
  if (!j.contains("version")) throw SchemaError("recipe: 'version' is required");
  read_opt(j, "version", c.version, w);
  read_opt(j, "seed", c.seed, w);
  if (j.contains("task")) c.task = task_from_json(j.at("task"), "recipe.task");
  read_opt(j, "num_utterances", c.num_utterances, w);
  read_opt(j, "test_utterances", c.test_utterances, w);
  read_opt(j, "corpus_dir", c.corpus_dir, w);
  if (j.contains("lm")) {
    const Json& l = j.at("lm");
    check_keys(l, {"order", "add_k"}, "recipe.lm");
    read_opt(l, "order", c.lm_order, "recipe.lm");
    read_opt(l, "add_k", c.lm_add_k, "recipe.lm");
  }
  if (j.contains("decoder")) {
    const Json& d = j.at("decoder");
    check_keys(d, {"beam", "max_active", "lm_weight"}, "recipe.decoder");
    read_opt(d, "beam", c.decoder.beam, "recipe.decoder");
    read_opt(d, "max_active", c.decoder.max_active, "recipe.decoder");
    read_opt(d, "lm_weight", c.decoder.lm_weight, "recipe.decoder");
  }
  c.lattice.search = c.decoder;
  if (j.contains("lattice")) {
    const Json& d = j.at("lattice");
    const std::string lw = "recipe.lattice";
    check_keys(d, {"beam", "max_active", "lattice_beam", "max_arcs", "max_word_frames"}, lw);
    read_opt(d, "beam", c.lattice.search.beam, lw);
    read_opt(d, "max_active", c.lattice.search.max_active, lw);
    read_opt(d, "lattice_beam", c.lattice.lattice_beam, lw);
    read_opt(d, "max_arcs", c.lattice.max_arcs, lw);
    read_opt(d, "max_word_frames", c.lattice.max_word_frames, lw);
  }
  if (j.contains("training")) {
    const Json& t = j.at("training");
    check_keys(t, {"kappa", "minibatch", "clip_norm"}, "recipe.training");
    read_opt(t, "kappa", c.kappa, "recipe.training");
    read_opt(t, "minibatch", c.minibatch, "recipe.training");
    read_opt(t, "clip_norm", c.clip_norm, "recipe.training");
  }
  if (!j.contains("ladders") || !j.at("ladders").is_array())
    throw SchemaError("recipe: 'ladders' array is required");
  for (std::size_t i = 0; i < j.at("ladders").size(); ++i) {
    const Json& lj = j.at("ladders")[i];
    const std::string lw = "recipe.ladders[" + std::to_string(i) + "]";
    check_keys(lj, {"name", "model", "init_seed", "init_range", "stages"}, lw);
    LadderSpec l;
    read_opt(lj, "name", l.name, lw);
    if (!lj.contains("model")) throw SchemaError(lw + ": 'model' is required");
    l.model = model_from_json(lj.at("model"), lw + ".model");
    read_opt(lj, "init_seed", l.init_seed, lw);
    read_opt(lj, "init_range", l.init_range, lw);
    if (!lj.contains("stages")) throw SchemaError(lw + ": 'stages' is required");
    l.stages = stages_from_json(lj.at("stages"), lw + ".stages");
    c.ladders.push_back(l);
  }
  if (j.contains("two_head")) {
    const Json& t = j.at("two_head");
    const std::string tw = "recipe.two_head";
    check_keys(t, {"source", "head_seed", "init_range", "stages"}, tw);
    TwoHeadSpec s;
    read_opt(t, "source", s.source, tw);
    read_opt(t, "head_seed", s.head_seed, tw);
    read_opt(t, "init_range", s.init_range, tw);
    if (t.contains("stages")) s.stages = stages_from_json(t.at("stages"), tw + ".stages");
    c.two_head = s;
  }
  if (j.contains("lm_strength")) {
    const Json& m = j.at("lm_strength");
    const std::string mw = "recipe.lm_strength";
    check_keys(m, {"seed", "ensemble", "orders", "epochs", "lr", "decay"}, mw);
    LmStrengthSpec s;
    read_opt(m, "seed", s.seed, mw);
    if (m.contains("ensemble")) s.ensemble = ensemble_from_json(m.at("ensemble"), mw + ".ensemble");
    read_opt(m, "orders", s.orders, mw);
    read_opt(m, "epochs", s.epochs, mw);
    read_opt(m, "lr", s.lr, mw);
    read_opt(m, "decay", s.decay, mw);
    c.lm_strength = s;
  }
  c.validate();
  return c;
}

RecipeConfig read_recipe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RecipeError("cannot read recipe " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return recipe_from_json(ss.str());
}

// ---- data --------------------------------------------------------------------------------

const NGramLM& RecipeData::lm(std::size_t order) const {
  if (order == 0) return runtime_lm;
  auto it = lattice_lms.find(order);
  if (it == lattice_lms.end())
    throw RecipeError("no lattice LM of order " + std::to_string(order) + " was prepared");
  return it->second;
}

RecipeData prepare_data(const RecipeConfig& config) {
  RecipeData rd;
  if (!config.corpus_dir.empty()) {
    rd.corpus = read_corpus(config.corpus_dir);
    if (!(rd.corpus.task.spec == config.task))
      throw RecipeError("corpus task differs from the recipe task");
  } else {
    rd.corpus = generate_corpus(config.task, config.num_utterances);
  }
  // Test utterances come from a disjoint index range of the same task.
  rd.test = generate_corpus(config.task, config.test_utterances, 1000000);
  rd.split = split(rd.corpus);
  if (rd.split.train.empty()) throw RecipeError("corpus has no training utterances");
  std::vector<std::vector<int>> aligns;
  for (std::size_t i : rd.split.train) aligns.push_back(rd.corpus.utterances[i].alignment);
  const Lexicon lex = config.task.lexicon();
  rd.priors = estimate_priors(aligns, lex.num_senones());
  const std::vector<WordSeq> text = transcripts(rd.corpus, rd.split.train);
  rd.runtime_lm = train_ngram(text, config.lm_order, lex.num_words, config.lm_add_k);
  std::set<std::size_t> orders;
  for (const LadderSpec& l : config.ladders)
    for (const StageSpec& s : l.stages)
      if (s.lattice_lm_order > 0) orders.insert(s.lattice_lm_order);
  if (config.two_head)
    for (const StageSpec& s : config.two_head->stages)
      if (s.lattice_lm_order > 0) orders.insert(s.lattice_lm_order);
  if (config.lm_strength)
    for (std::size_t o : config.lm_strength->orders) orders.insert(o);
  for (std::size_t o : orders)
    rd.lattice_lms.emplace(o, train_ngram(text, o, lex.num_words, config.lm_add_k));
  return rd;
}

Tensor model_scores(const LayerTrajectoryModel& model, const Tensor& features,
                    const Tensor& priors, double kappa) {
  return acoustic_score_from_log(log_posteriors(forward_logits(model, features)), priors, kappa);
}

Evaluation evaluate_model(const LayerTrajectoryModel& model, const Corpus& data,
                          const std::vector<std::size_t>& which, const RecipeData& rd,
                          const RecipeConfig& config) {
  const Lexicon lex = config.task.lexicon();
  Evaluation ev;
  for (std::size_t i : which) {
    const Utterance& u = data.utterances[i];
    Tensor logits = forward_logits(model, u.features);
    Tensor scores = acoustic_score_from_log(log_posteriors(logits), rd.priors, config.kappa);
    WordSeq hyp;
    try {
      hyp = word_ids(decode(scores, lex, rd.runtime_lm, config.decoder).words);
    } catch (const SearchError&) {
      // Lost search: scored as an empty hypothesis.
    }
    ev.wer += score_wer(hyp, u.words);
    std::vector<int> pred(logits.rows());
    for (std::size_t t = 0; t < logits.rows(); ++t) {
      auto row = logits.row(t);
      pred[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    ev.senones += score_senones(pred, u.alignment);
  }
  return ev;
}

std::vector<Tensor> build_ensemble(const std::vector<const LayerTrajectoryModel*>& teachers,
                                   const std::vector<double>& weights, const Corpus& corpus) {
  check_weights(weights);
  if (teachers.size() != weights.size()) throw CriterionError("one weight per teacher required");
  for (const LayerTrajectoryModel* t : teachers)
    if (t->config.num_senones != teachers[0]->config.num_senones)
      throw CriterionError("teachers disagree on the senone set");
  std::vector<Tensor> out;
  out.reserve(corpus.utterances.size());
  for (const Utterance& u : corpus.utterances) {
    std::vector<Tensor> post;
    for (const LayerTrajectoryModel* t : teachers)
      post.push_back(posteriors(forward_logits(*t, u.features)));
    out.push_back(frame_combine(post, weights));
  }
  return out;
}

// ---- stages ---------------------------------------------------------------------------

namespace {

Supervision supervision_for(const StageInputs& in, std::size_t i,
                            const std::vector<Lattice>& lattices) {
  const Utterance& u = in.data->corpus.utterances[i];
  Supervision s;
  s.alignment = &u.alignment;
  s.words = &u.words;
  if (!lattices.empty()) s.lattice = &lattices[i];
  if (in.teacher_posteriors) s.teacher_posteriors = &(*in.teacher_posteriors)[i];
  return s;
}

CriterionSettings settings_for(const StageInputs& in, const StageSpec& stage) {
  CriterionSettings s;
  s.criterion = stage.criterion;
  s.kappa = in.config->kappa;
  s.priors = in.data->priors;
  s.nbest = stage.nbest;
  return s;
}

std::string loss_line(const std::string& tag, const StageSpec& stage, std::size_t epoch,
                      double lr, double train, double valid) {
  Json j{{"stage", tag},
         {"criterion", std::string(to_string(stage.criterion))},
         {"epoch", epoch},
         {"lr", lr},
         {"train_loss", train},
         {"valid_loss", valid}};
  return j.dump();
}

std::map<std::string, std::uint64_t> group_checksums(const LayerTrajectoryModel& m) {
  std::map<std::string, std::uint64_t> out;
  for_each_param(m, [&](const std::string& name, const Tensor& t) {
    std::uint64_t& h = out[param_group(name)];
    h = h * 1099511628211ULL ^ checksum(t);
  });
  return out;
}

}  // namespace

double stage_loss(const LayerTrajectoryModel& model, const StageSpec& stage,
                  const StageInputs& in, const std::vector<std::size_t>& which,
                  const std::vector<Lattice>& lattices) {
  if (which.empty()) return 0.0;
  const CriterionSettings settings = settings_for(in, stage);
  double total = 0.0;
  for (std::size_t i : which)
    total += model_loss(model, in.data->corpus.utterances[i].features,
                        supervision_for(in, i, lattices), settings);
  return total / static_cast<double>(which.size());
}

StageOutcome run_stage(const StageInputs& in, const StageSpec& stage,
                       const LayerTrajectoryModel& seed_model) {
  const RecipeConfig& cfg = *in.config;
  const RecipeData& rd = *in.data;
  const Corpus& corpus = rd.corpus;
  const Lexicon lex = cfg.task.lexicon();
  const std::string where = fmt_stage(in.tag, stage.criterion);
  if (stage.criterion == Criterion::kSeqTS &&
      (!in.teacher_posteriors || in.teacher_posteriors->size() != corpus.utterances.size()))
    throw RecipeError(where + ": teacher posteriors missing for some utterances");
  for (const std::string& g : stage.freeze)
    if (!kGroups.count(g)) throw RecipeError(where + ": unknown parameter group '" + g + "'");

  LayerTrajectoryModel model = seed_model;
  const auto frozen_before = group_checksums(model);

  std::vector<Lattice> lattices;
  if (stage.criterion != Criterion::kCE) {
    const NGramLM& lm = rd.lm(stage.lattice_lm_order);
    if (!in.lattice_dir.empty()) std::filesystem::create_directories(in.lattice_dir);
    lattices.reserve(corpus.utterances.size());
    for (const Utterance& u : corpus.utterances) {
      Tensor scores = model_scores(seed_model, u.features, rd.priors, cfg.kappa);
      std::optional<Reference> ref;
      if (stage.criterion == Criterion::kMMI) ref = Reference{u.words, u.alignment};
      lattices.push_back(generate_lattice(scores, lex, lm, cfg.lattice, ref));
      if (!in.lattice_dir.empty()) write_lattice(in.lattice_dir / (u.id + ".lat"), lattices.back());
    }
  }

  const CriterionSettings settings = settings_for(in, stage);
  std::vector<std::string> names = param_names(model);
  std::vector<bool> is_frozen(names.size(), false);
  for (std::size_t p = 0; p < names.size(); ++p)
    is_frozen[p] = std::find(stage.freeze.begin(), stage.freeze.end(), param_group(names[p])) !=
                   stage.freeze.end();

  StageOutcome out;
  double lr = stage.lr;
  out.train_loss.push_back(stage_loss(model, stage, in, rd.split.train, lattices));
  out.valid_loss.push_back(stage_loss(model, stage, in, rd.split.valid, lattices));
  in.metrics.emit(loss_line(in.tag, stage, 0, lr, out.train_loss.back(), out.valid_loss.back()));

  std::mt19937_64 order_rng(cfg.seed ^ fnv1a(in.tag));
  std::vector<Tensor> params = flatten(model);
  for (std::size_t epoch = 1; epoch <= stage.epochs; ++epoch) {
    std::vector<std::size_t> order = rd.split.train;
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.minibatch) {
      const std::size_t e = std::min(order.size(), b + cfg.minibatch);
      std::vector<Tensor> g;
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t i = order[k];
        LossAndGrad lg = model_loss_and_grad(model, corpus.utterances[i].features,
                                             supervision_for(in, i, lattices), settings);
        if (g.empty()) {
          g = std::move(lg.grads);
        } else {
          for (std::size_t p = 0; p < g.size(); ++p)
            for (std::size_t j = 0; j < g[p].size(); ++j) g[p][j] += lg.grads[p][j];
        }
      }
      double norm2 = 0.0;
      const double inv = 1.0 / static_cast<double>(e - b);
      for (std::size_t p = 0; p < g.size(); ++p) {
        if (is_frozen[p]) continue;
        for (double& v : g[p].data()) {
          v *= inv;
          norm2 += v * v;
        }
      }
      const double norm = std::sqrt(norm2);
      const double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (is_frozen[p]) continue;
        for (std::size_t j = 0; j < params[p].size(); ++j) params[p][j] -= lr * clip * g[p][j];
      }
      unflatten(model, params);
    }
    out.train_loss.push_back(stage_loss(model, stage, in, rd.split.train, lattices));
    out.valid_loss.push_back(stage_loss(model, stage, in, rd.split.valid, lattices));
    in.metrics.emit(
        loss_line(in.tag, stage, epoch, lr, out.train_loss.back(), out.valid_loss.back()));
    lr *= stage.decay;
  }

  const auto frozen_after = group_checksums(model);
  for (const std::string& g : stage.freeze)
    if (frozen_before.count(g) && frozen_before.at(g) != frozen_after.at(g))
      throw FreezeError(where + ": frozen group '" + g + "' changed");

  std::vector<std::size_t> all(rd.test.utterances.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  out.test = evaluate_model(model, rd.test, all, rd, cfg);
  in.metrics.emit(Json{{"stage", in.tag},
                       {"event", "test"},
                       {"wer", out.test.wer.wer()},
                       {"errors", out.test.wer.errors()},
                       {"ref_words", out.test.wer.ref_len},
                       {"senone_accuracy", out.test.senones.senone_accuracy()}}
                      .dump());

  out.checkpoint.model = std::move(model);
  out.checkpoint.stage = std::string(to_string(stage.criterion));
  out.checkpoint.seed = cfg.seed;
  out.checkpoint.epoch = stage.epochs;
  out.checkpoint.train_loss = out.train_loss;
  out.checkpoint.valid_loss = out.valid_loss;
  return out;
}

// ---- whole recipes ------------------------------------------------------------------

namespace {

std::vector<Tensor> ensemble_for(const EnsembleSpec& e, const StageInputs& in,
                                 const std::map<std::string, const LayerTrajectoryModel*>& pool) {
  std::vector<const LayerTrajectoryModel*> teachers;
  for (const std::string& t : e.teachers) {
    auto it = pool.find(t);
    if (it == pool.end()) throw RecipeError("teacher checkpoint '" + t + "' is not available");
    teachers.push_back(it->second);
  }
  return build_ensemble(teachers, e.weights, in.data->corpus);
}

void save_ensemble(const std::filesystem::path& path, const std::vector<Tensor>& cache,
                   const Corpus& corpus) {
  Container c;
  c.meta["kind"] = "teacher_posteriors";
  for (std::size_t i = 0; i < cache.size(); ++i)
    c.tensors.emplace_back(corpus.utterances[i].id, cache[i]);
  write_container(path, c);
}

}  // namespace

TwoHeadOutcome run_two_head_recipe(const LayerTrajectoryModel& source, const TwoHeadSpec& spec,
                                   const StageInputs& in,
                                   const std::map<std::string, const LayerTrajectoryModel*>& pool) {
  TwoHeadOutcome out;
  TwoHeadModel th = build_second_head(source, spec.head_seed, spec.init_range);
  out.shared_checksum_before = checksum(th.shared);
  const RecipeData& rd = *in.data;
  std::vector<std::size_t> all(rd.test.utterances.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  LayerTrajectoryModel lt = th.lt_model();
  out.lt_senone_accuracy_init =
      evaluate_model(lt, rd.test, all, rd, *in.config).senones.senone_accuracy();
  for (const StageSpec& s0 : spec.stages) {
    StageSpec s = s0;
    std::vector<std::string> freeze = {"time"};
    for (const std::string& g : s0.freeze)
      if (g != "shared" && g != "time") freeze.push_back(g);
    s.freeze = freeze;
    StageInputs sub = in;
    sub.tag = "two_head." + s.name;
    if (!in.lattice_dir.empty()) sub.lattice_dir = in.lattice_dir / sub.tag;
    std::vector<Tensor> cache;
    if (s.criterion == Criterion::kSeqTS) {
      cache = ensemble_for(*s.ensemble, in, pool);
      sub.teacher_posteriors = &cache;
    }
    StageOutcome so = run_stage(sub, s, lt);
    lt = so.checkpoint.model;
    if (checksum(lt.time) != out.shared_checksum_before)
      throw FreezeError("two_head." + s.name + ": shared time-LSTM parameters changed");
    out.stages.push_back(std::move(so));
  }
  th.head_lt = lt.head;
  out.shared_checksum_after = checksum(lt.time);
  if (checksum(th.shared) != out.shared_checksum_before ||
      out.shared_checksum_after != out.shared_checksum_before)
    throw FreezeError("two-head recipe changed the shared time-LSTM parameters");
  out.lt_senone_accuracy_final =
      evaluate_model(lt, rd.test, all, rd, *in.config).senones.senone_accuracy();
  out.checkpoint.model = th;
  out.checkpoint.stage = spec.stages.empty() ? "init"
                                             : std::string(to_string(spec.stages.back().criterion));
  out.checkpoint.seed = in.config->seed;
  if (!out.stages.empty()) {
    out.checkpoint.train_loss = out.stages.back().train_loss;
    out.checkpoint.valid_loss = out.stages.back().valid_loss;
  }
  return out;
}

std::vector<LmStrengthRow> compare_lm_strength(
    const LayerTrajectoryModel& student, const LmStrengthSpec& spec, const StageInputs& in,
    const std::map<std::string, const LayerTrajectoryModel*>& pool) {
  std::vector<Tensor> cache = ensemble_for(spec.ensemble, in, pool);
  std::vector<LmStrengthRow> rows;
  for (std::size_t order : spec.orders) {
    StageSpec s;
    s.name = "order" + std::to_string(order);
    s.criterion = Criterion::kSeqTS;
    s.epochs = spec.epochs;
    s.lr = spec.lr;
    s.decay = spec.decay;
    s.lattice_lm_order = order;
    s.ensemble = spec.ensemble;
    StageInputs sub = in;
    sub.tag = "lm_strength." + s.name;
    sub.teacher_posteriors = &cache;
    if (!in.lattice_dir.empty()) sub.lattice_dir = in.lattice_dir / sub.tag;
    StageOutcome so = run_stage(sub, s, student);
    rows.push_back(LmStrengthRow{order, so.test.wer.wer(), so.train_loss.back()});
  }
  return rows;
}

RecipeResult run_recipe(const RecipeConfig& config, const std::filesystem::path& run_dir) {
  config.validate();
  RecipeData rd = prepare_data(config);
  RecipeResult result;

  std::ofstream metrics;
  if (!run_dir.empty()) {
    for (const char* sub : {"configs", "checkpoints", "lattices", "logs", "reports"})
      std::filesystem::create_directories(run_dir / sub);
    std::ofstream(run_dir / "configs" / "recipe.json") << recipe_to_json(config) << "\n";
    metrics.open(run_dir / "logs" / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw RecipeError("cannot write metrics log under " + run_dir.string());
  }
  StageInputs base;
  base.config = &config;
  base.data = &rd;
  base.metrics.write = [&metrics](const std::string& line) {
    if (metrics.is_open()) {
      metrics << line << '\n';
      metrics.flush();
    }
  };

  std::map<std::string, const LayerTrajectoryModel*> pool;
  for (const LadderSpec& ladder : config.ladders) {
    for (const StageSpec& stage : ladder.stages) {
      const std::string id = ladder.name + "." + stage.name;
      LayerTrajectoryModel init;
      const LayerTrajectoryModel* seed = nullptr;
      if (stage.seed.empty()) {
        init = LayerTrajectoryModel::random(ladder.model, ladder.init_seed, ladder.init_range);
        seed = &init;
      } else {
        seed = pool.at(stage.seed);
      }
      StageInputs in = base;
      in.tag = id;
      if (!run_dir.empty()) in.lattice_dir = run_dir / "lattices" / id;
      std::vector<Tensor> cache;
      if (stage.criterion == Criterion::kSeqTS) {
        cache = ensemble_for(*stage.ensemble, in, pool);
        if (!run_dir.empty())
          save_ensemble(run_dir / "checkpoints" / (id + ".teachers.ltck"), cache, rd.corpus);
        in.teacher_posteriors = &cache;
      }
      if (stage.criterion == Criterion::kCE) in.lattice_dir.clear();
      StageOutcome so = run_stage(in, stage, *seed);
      if (!run_dir.empty()) save_checkpoint(run_dir / "checkpoints" / (id + ".ltck"), so.checkpoint);
      result.order.push_back(id);
      auto [it, _] = result.stages.emplace(id, std::move(so));
      pool[id] = &it->second.checkpoint.model;
    }
  }

  StageInputs tail = base;
  if (!run_dir.empty()) tail.lattice_dir = run_dir / "lattices";
  if (config.two_head) {
    result.two_head = run_two_head_recipe(*pool.at(config.two_head->source), *config.two_head,
                                          tail, pool);
    if (!run_dir.empty())
      save_checkpoint(run_dir / "checkpoints" / "two_head.ltck", result.two_head->checkpoint);
  }
  if (config.lm_strength) {
    result.lm_strength =
        compare_lm_strength(*pool.at(config.lm_strength->seed), *config.lm_strength, tail, pool);
  }

  if (!run_dir.empty()) {
    Json summary;
    summary["stages"] = Json::array();
    for (const std::string& id : result.order) {
      const StageOutcome& so = result.stages.at(id);
      summary["stages"].push_back(Json{{"stage", id},
                                       {"criterion", so.checkpoint.stage},
                                       {"train_loss_initial", so.train_loss.front()},
                                       {"train_loss_final", so.train_loss.back()},
                                       {"valid_loss_final", so.valid_loss.back()},
                                       {"test_wer", so.test.wer.wer()},
                                       {"test_senone_accuracy", so.test.senones.senone_accuracy()}});
    }
    if (result.two_head) {
      const TwoHeadOutcome& t = *result.two_head;
      summary["two_head"] = Json{{"shared_checksum_before", t.shared_checksum_before},
                                 {"shared_checksum_after", t.shared_checksum_after},
                                 {"lt_senone_accuracy_init", t.lt_senone_accuracy_init},
                                 {"lt_senone_accuracy_final", t.lt_senone_accuracy_final}};
    }
    if (config.lm_strength) {
      Json rows = Json::array();
      for (const LmStrengthRow& r : result.lm_strength)
        rows.push_back(Json{{"order", r.order}, {"test_wer", r.wer},
                            {"final_train_loss", r.final_train_loss}});
      summary["lm_strength"] = rows;
      std::ofstream(run_dir / "reports" / "lm_strength.json") << rows.dump(2) << "\n";
    }
    std::ofstream(run_dir / "reports" / "summary.json") << summary.dump(2) << "\n";
  }
  return result;
}

}  // namespace ltstream
