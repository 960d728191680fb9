// ltstream/tools/ltstream_cli.cc
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
// Command-line entry point:
//   ltstream gen-data | train | decode | simulate-twopass | gradcheck | paramcount | report
//
// Results go to stdout as JSON. Failures print one JSON error record on
// stderr and exit nonzero (2 for usage errors, 1 otherwise).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ltstream/checkpoint.h"
#include "ltstream/corpus.h"
#include "ltstream/fixtures.h"
#include "ltstream/recipe.h"
#include "ltstream/twopass.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace ltstream;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

Json parse_json(const fs::path& p) {
  try {
    return Json::parse(slurp(p));
  } catch (const Json::parse_error& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void print(const Json& j) { std::cout << j.dump(2) << std::endl; }

// ---- gen-data -------------------------------------------------------------------

struct GenDataArgs {
  std::string task;
  std::size_t num = 200;
  std::size_t first_index = 0;
  std::string out;
};

int gen_data(const GenDataArgs& a) {
  ToyTaskSpec spec;
  if (!a.task.empty()) spec = spec_from_json(slurp(a.task));
  spec.validate();
  const Corpus c = generate_corpus(spec, a.num, a.first_index);
  write_corpus(a.out, c);
  std::size_t frames = 0, words = 0;
  for (const Utterance& u : c.utterances) {
    frames += u.features.rows();
    words += u.words.size();
  }
  const Split s = split(c);
  print(Json{{"out", a.out},
             {"utterances", c.utterances.size()},
             {"frames", frames},
             {"words", words},
             {"train", s.train.size()},
             {"valid", s.valid.size()}});
  return 0;
}

// ---- train ----------------------------------------------------------------------

int train(const std::string& recipe, const std::string& out) {
  const RecipeConfig config = read_recipe(recipe);
  const RecipeResult r = run_recipe(config, out);
  Json stages = Json::array();
  for (const std::string& id : r.order) {
    const StageOutcome& s = r.stages.at(id);
    stages.push_back(Json{{"stage", id},
                          {"criterion", s.checkpoint.stage},
                          {"train_loss", Json{{"initial", s.train_loss.front()},
                                              {"final", s.train_loss.back()}}},
                          {"test_wer", s.test.wer.wer()},
                          {"test_senone_accuracy", s.test.senones.senone_accuracy()}});
  }
  Json j{{"run_dir", out}, {"stages", stages}};
  if (r.two_head)
    j["two_head"] = Json{{"shared_checksum_unchanged",
                          r.two_head->shared_checksum_before == r.two_head->shared_checksum_after},
                         {"lt_senone_accuracy_init", r.two_head->lt_senone_accuracy_init},
                         {"lt_senone_accuracy_final", r.two_head->lt_senone_accuracy_final}};
  print(j);
  return 0;
}

// ---- decode ----------------------------------------------------------------------

struct DecodeArgs {
  std::string checkpoint;
  std::string head = "clt";
  std::string data;
  std::string lm_file;
  std::string lm_data;
  std::size_t lm_order = 3;
  double lm_add_k = 0.5;
  double beam = 16.0;
  std::size_t max_active = 500;
  double lm_weight = 1.0;
  double kappa = 1.0;
  std::string out;
};

// LM and priors: from --lm / --lm-data, else from the train split of --data.
struct DecodeContext {
  Corpus corpus;
  NGramLM lm;
  Tensor priors;
  DecoderConfig decoder;
};

DecodeContext decode_context(const DecodeArgs& a) {
  DecodeContext ctx;
  ctx.corpus = read_corpus(a.data);
  const Corpus source = a.lm_data.empty() ? ctx.corpus : read_corpus(a.lm_data);
  const Split s = split(source);
  const Lexicon lex = source.task.spec.lexicon();
  std::vector<std::vector<int>> aligns;
  for (std::size_t i : s.train) aligns.push_back(source.utterances[i].alignment);
  ctx.priors = estimate_priors(aligns, lex.num_senones());
  ctx.lm = a.lm_file.empty()
               ? train_ngram(transcripts(source, s.train), a.lm_order, lex.num_words, a.lm_add_k)
               : read_lm(a.lm_file);
  ctx.decoder.beam = a.beam;
  ctx.decoder.max_active = a.max_active;
  ctx.decoder.lm_weight = a.lm_weight;
  ctx.decoder.validate();
  return ctx;
}

LayerTrajectoryModel load_any_model(const std::string& path, const std::string& head) {
  const Container c = read_container(path);
  if (c.meta.count("kind") && c.get("kind") == "two_head") {
    const TwoHeadModel m = two_head_from(c).model;
    if (head == "lt") return m.lt_model();
    if (head == "clt") return m.clt_model();
    throw UsageError("--head must be lt or clt");
  }
  return checkpoint_from(c).model;
}

std::string words_text(const WordSeq& w) {
  std::string s;
  for (int x : w) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

int decode_cmd(const DecodeArgs& a) {
  const DecodeContext ctx = decode_context(a);
  const LayerTrajectoryModel model = load_any_model(a.checkpoint, a.head);
  const Lexicon lex = ctx.corpus.task.spec.lexicon();
  if (model.config.num_senones != lex.num_senones() ||
      model.config.input_dim != ctx.corpus.task.spec.feature_dim)
    throw UsageError("checkpoint does not match the corpus task");
  ScoredResult wer, sen;
  std::size_t search_errors = 0;
  std::string hyps;
  for (const Utterance& u : ctx.corpus.utterances) {
    const Tensor logits = forward_logits(model, u.features);
    WordSeq hyp;
    try {
      hyp = word_ids(
          decode(acoustic_score_from_log(log_posteriors(logits), ctx.priors, a.kappa), lex,
                 ctx.lm, ctx.decoder)
              .words);
    } catch (const SearchError&) {
      ++search_errors;
    }
    wer += score_wer(hyp, u.words);
    std::vector<int> pred(logits.rows());
    for (std::size_t t = 0; t < logits.rows(); ++t) {
      auto row = logits.row(t);
      pred[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    sen += score_senones(pred, u.alignment);
    hyps += u.id + (hyp.empty() ? "" : " ") + words_text(hyp) + "\n";
  }
  if (!a.out.empty()) spit(a.out, hyps);
  print(Json{{"utterances", ctx.corpus.utterances.size()},
             {"wer", wer.wer()},
             {"substitutions", wer.substitutions},
             {"deletions", wer.deletions},
             {"insertions", wer.insertions},
             {"ref_words", wer.ref_len},
             {"senone_accuracy", sen.senone_accuracy()},
             {"search_errors", search_errors}});
  return 0;
}

// ---- simulate-twopass ------------------------------------------------------------

struct TwoPassArgs {
  std::string fixture;
  std::string checkpoint;
  DecodeArgs decode;
  std::string out;
  double frame_ms = 10.0;
  std::size_t skip = 2;
};

int twopass_fixture(const TwoPassArgs& a) {
  const Json f = parse_json(a.fixture);
  for (const auto& [k, v] : f.items())
    if (k != "lexicon" && k != "lookahead" && k != "frame_ms" && k != "skip_factor" &&
        k != "decoder" && k != "utterances" && k != "expected_digest")
      throw UsageError(a.fixture + ": unknown key '" + k + "'");
  const Lexicon lex{f.at("lexicon").at("words").get<std::size_t>(),
                    f.at("lexicon").at("senones_per_word").get<std::size_t>()};
  TwoPassConfig cfg;
  cfg.clock = FrameClock{f.value("frame_ms", 10.0), f.value("skip_factor", std::size_t{2})};
  if (f.contains("decoder")) {
    cfg.decoder.beam = f.at("decoder").value("beam", cfg.decoder.beam);
    cfg.decoder.max_active = f.at("decoder").value("max_active", cfg.decoder.max_active);
  }
  const std::size_t n = f.at("lookahead").get<std::size_t>();
  std::vector<WordSeq> corpus;
  for (int w = 0; w < static_cast<int>(lex.num_words); ++w) corpus.push_back({w});
  const NGramLM lm = train_ngram(corpus, 2, lex.num_words, 1.0);

  std::string text;
  std::vector<DecodeTimeline> tls;
  std::size_t i = 0;
  for (const Json& u : f.at("utterances")) {
    const auto p1 = u.at("pass1").get<WordSeq>();
    const auto p2 = u.at("pass2").get<WordSeq>();
    if (p1.size() != p2.size())
      throw UsageError("fixture utterance " + std::to_string(i) + ": passes differ in length");
    const double noise = u.value("noise", 0.0);
    const std::uint64_t seed = u.value("seed", std::uint64_t{0});
    const Tensor s1 = aligned_scores(lex, fixture_alignment(lex, p1), -4.0, noise, 2 * seed + 1);
    const Tensor s2 = aligned_scores(lex, fixture_alignment(lex, p2), -4.0, noise, 2 * seed + 2);
    DecodeTimeline tl = simulate_two_pass(s1, s2, n, lex, lm, cfg);
    text += Json{{"utterance", i}, {"frames", tl.num_frames}, {"lookahead", n}}.dump() + "\n";
    text += timeline_jsonl(tl);
    tls.push_back(std::move(tl));
    ++i;
  }
  const std::string digest = hex(fnv1a(text));
  const fs::path out = a.out.empty() ? fs::path("twopass_fixture") : fs::path(a.out);
  spit(out / "timeline.jsonl", text);
  spit(out / "report.json", report_json(merge_reports(tls)) + "\n");
  Json j{{"timeline", (out / "timeline.jsonl").string()},
         {"digest", digest},
         {"report", Json::parse(report_json(merge_reports(tls)))}};
  if (f.contains("expected_digest")) {
    const std::string want = f.at("expected_digest").get<std::string>();
    j["expected_digest"] = want;
    j["digest_matches"] = want == digest;
    print(j);
    if (want != digest) throw std::runtime_error("timeline digest " + digest + " != " + want);
    return 0;
  }
  print(j);
  return 0;
}

int twopass_model(const TwoPassArgs& a) {
  const DecodeContext ctx = decode_context(a.decode);
  const TwoHeadModel model = load_two_head_checkpoint(a.checkpoint).model;
  const Lexicon lex = ctx.corpus.task.spec.lexicon();
  TwoPassConfig cfg;
  cfg.decoder = ctx.decoder;
  cfg.priors = ctx.priors;
  cfg.kappa = a.decode.kappa;
  cfg.clock = FrameClock{a.frame_ms, a.skip};
  std::string text;
  std::vector<DecodeTimeline> tls;
  std::size_t equal = 0, evals_ok = 0;
  ScoredResult wer1, wer2;
  for (const Utterance& u : ctx.corpus.utterances) {
    DecodeTimeline tl = two_pass_decode(model, u.features, lex, ctx.lm, cfg);
    if (tl.final_words == standalone_second_pass(model, u.features, lex, ctx.lm, cfg)) ++equal;
    if (tl.time_stack_evaluations == u.features.rows()) ++evals_ok;
    wer1 += score_wer(tl.pass1_final, u.words);
    wer2 += score_wer(tl.final_words, u.words);
    text += Json{{"utterance", u.id}, {"frames", tl.num_frames}, {"lookahead", tl.lookahead}}
                .dump() +
            "\n";
    text += timeline_jsonl(tl);
    tls.push_back(std::move(tl));
  }
  const fs::path out = a.out.empty() ? fs::path("twopass") : fs::path(a.out);
  const LatencyReport rep = merge_reports(tls);
  spit(out / "timeline.jsonl", text);
  spit(out / "report.json", report_json(rep) + "\n");
  print(Json{{"timeline", (out / "timeline.jsonl").string()},
             {"digest", hex(fnv1a(text))},
             {"utterances", tls.size()},
             {"final_equals_standalone", equal},
             {"single_time_stack_pass", evals_ok},
             {"pass1_wer", wer1.wer()},
             {"pass2_wer", wer2.wer()},
             {"report", Json::parse(report_json(rep))}});
  if (equal != tls.size() || evals_ok != tls.size())
    throw std::runtime_error("two-pass contract violated");
  return 0;
}

// ---- gradcheck ---------------------------------------------------------------------

int gradcheck(std::size_t seeds, double step, double tol, double abs_floor) {
  GradCheckOptions opt;
  opt.step = step;
  opt.tol = tol;
  opt.abs_floor = abs_floor;
  const auto rows = run_grad_suite(seeds, opt);
  Json pairs = Json::array();
  std::map<std::string, double> per_variant;
  bool ok = true;
  for (const GradSuiteRow& r : rows) {
    const std::string v(to_string(r.variant));
    per_variant[v] = std::max(per_variant[v], r.worst);
    ok = ok && r.passed == r.instances;
    pairs.push_back(Json{{"variant", v},
                         {"criterion", std::string(to_string(r.criterion))},
                         {"instances", r.instances},
                         {"passed", r.passed},
                         {"worst_relative_deviation", r.worst},
                         {"worst_param", r.worst_param},
                         {"worst_seed", r.worst_seed},
                         {"max_abs_diff", r.max_abs_diff},
                         {"max_abs_grad", r.max_abs_grad}});
  }
  Json worst;
  for (const auto& [v, w] : per_variant) worst[v] = w;
  print(Json{{"tolerance", tol}, {"abs_floor", abs_floor}, {"step", step}, {"pairs", pairs}, {"worst_per_variant", worst},
             {"passed", ok}});
  if (!ok) throw std::runtime_error("finite-difference check failed");
  return 0;
}

// ---- paramcount --------------------------------------------------------------------

struct ParamArgs {
  std::size_t layers = 6, hidden = 1024, proj = 512, input = 80, senones = 9404;
};

int paramcount(const ParamArgs& a) {
  auto cfg = [&](Variant v, std::size_t tau) {
    ModelConfig c;
    c.variant = v;
    c.num_layers = a.layers;
    c.hidden_dim = a.hidden;
    c.proj_dim = a.proj;
    c.input_dim = a.input;
    c.num_senones = a.senones;
    c.tau = tau;
    return c;
  };
  ModelConfig plain = cfg(Variant::kPlainLstm, 0);
  plain.tau = 0;
  const std::size_t time_only =
      param_count(plain) - (a.senones * a.proj + a.senones);  // time stack alone
  struct Row {
    std::string name;
    std::size_t count;
    double target_m;
    std::size_t latency_frames;
  };
  const ModelConfig clt12 = cfg(Variant::kCltLstm, 2);
  std::vector<Row> rows = {
      {"LSTM", param_count(plain), 31, 0},
      {"ltLSTM", param_count(cfg(Variant::kLtLstm, 0)), 57, 0},
      {"cltLSTM-6", param_count(cfg(Variant::kCltLstm, 1)), 58, lookahead_frames(cfg(Variant::kCltLstm, 1))},
      {"cltLSTM-12", param_count(clt12), 60, lookahead_frames(clt12)},
      {"cltLSTM-24", param_count(cfg(Variant::kCltLstm, 4)), 63, lookahead_frames(cfg(Variant::kCltLstm, 4))},
      {"two-head first head", param_count(cfg(Variant::kLtLstm, 0)), 57, 0},
      {"two-head second head", param_count(clt12) - time_only, 34, lookahead_frames(clt12)},
  };
  Json out = Json::array();
  for (const Row& r : rows) {
    const double m = static_cast<double>(r.count) / 1e6;
    out.push_back(Json{{"model", r.name},
                       {"params", r.count},
                       {"params_m", m},
                       {"reference_m", r.target_m},
                       {"deviation", (m - r.target_m) / r.target_m},
                       {"latency_ms", latency_ms(r.latency_frames)}});
  }
  print(Json{{"dims", Json{{"layers", a.layers}, {"hidden", a.hidden}, {"proj", a.proj},
                           {"input", a.input}, {"senones", a.senones}}},
             {"rows", out}});
  return 0;
}

// ---- report ---------------------------------------------------------------------------

int report(const std::string& run) {
  const Json s = parse_json(fs::path(run) / "reports" / "summary.json");
  std::map<std::string, double> wer;
  std::ostringstream md;
  md << "| stage | criterion | train loss (first -> last) | test WER | senone acc |\n";
  md << "|---|---|---|---|---|\n";
  for (const Json& st : s.at("stages")) {
    const std::string id = st.at("stage").get<std::string>();
    wer[id] = st.at("test_wer").get<double>();
    md << "| " << id << " | " << st.at("criterion").get<std::string>() << " | "
       << st.at("train_loss_initial").get<double>() << " -> "
       << st.at("train_loss_final").get<double>() << " | " << wer[id] << " | "
       << st.at("test_senone_accuracy").get<double>() << " |\n";
  }
  // Relative reductions along each ladder, stage over its predecessor.
  const RecipeConfig config = read_recipe(fs::path(run) / "configs" / "recipe.json");
  Json steps = Json::array();
  md << "\n| stage | seed | relative WER reduction |\n|---|---|---|\n";
  for (const LadderSpec& l : config.ladders)
    for (const StageSpec& st : l.stages) {
      if (st.seed.empty()) continue;
      const std::string id = l.name + "." + st.name;
      if (!wer.count(id) || !wer.count(st.seed) || wer[st.seed] <= 0) continue;
      const double r = relative_wer_reduction(wer[st.seed], wer[id]);
      steps.push_back(Json{{"stage", id}, {"seed", st.seed}, {"relative_wer_reduction", r}});
      md << "| " << id << " | " << st.seed << " | " << r << " |\n";
    }
  Json j{{"run_dir", run}, {"reductions", steps}};
  if (s.contains("two_head")) j["two_head"] = s.at("two_head");
  if (s.contains("lm_strength")) {
    j["lm_strength"] = s.at("lm_strength");
    md << "\n| lattice LM order | test WER |\n|---|---|\n";
    for (const Json& r : s.at("lm_strength"))
      md << "| " << r.at("order").get<std::size_t>() << " | " << r.at("test_wer").get<double>()
         << " |\n";
  }
  spit(fs::path(run) / "reports" / "report.md", md.str());
  j["markdown"] = (fs::path(run) / "reports" / "report.md").string();
  print(j);
  return 0;
}

int fail(const std::string& command, const std::string& type, const std::string& message,
         int code) {
  std::cerr << Json{{"error", Json{{"command", command}, {"type", type}, {"message", message}}}}
                   .dump()
            << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ltstream: layer-trajectory streaming acoustic models on a toy task"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a toy corpus directory");
  gen->add_option("--task", gd.task, "Task JSON (defaults when omitted)")->check(CLI::ExistingFile);
  gen->add_option("--num", gd.num, "Utterances")->check(CLI::PositiveNumber);
  gen->add_option("--first-index", gd.first_index, "Index of the first utterance");
  gen->add_option("--out", gd.out, "Output directory")->required();

  std::string recipe, run_dir;
  auto* tr = app.add_subcommand("train", "Run a training recipe");
  tr->add_option("--recipe", recipe, "Recipe JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", run_dir, "Run directory")->required();

  DecodeArgs da;
  auto add_decode = [](CLI::App* c, DecodeArgs& d) {
    c->add_option("--data", d.data, "Corpus directory to decode")->required()->check(CLI::ExistingDirectory);
    c->add_option("--lm", d.lm_file, "LM text file")->check(CLI::ExistingFile);
    c->add_option("--lm-data", d.lm_data, "Corpus whose train split gives LM and priors")
        ->check(CLI::ExistingDirectory);
    c->add_option("--lm-order", d.lm_order, "LM order when training one")->check(CLI::PositiveNumber);
    c->add_option("--lm-add-k", d.lm_add_k, "LM add-k constant");
    c->add_option("--beam", d.beam, "Decoder beam");
    c->add_option("--max-active", d.max_active, "Decoder token cap");
    c->add_option("--lm-weight", d.lm_weight, "LM weight");
    c->add_option("--kappa", d.kappa, "Acoustic scale");
  };
  auto* dec = app.add_subcommand("decode", "Decode a corpus with a checkpoint");
  dec->add_option("--checkpoint", da.checkpoint, "Model or two-head checkpoint")->required()->check(CLI::ExistingFile);
  dec->add_option("--head", da.head, "Head of a two-head checkpoint (lt|clt)");
  add_decode(dec, da);
  dec->add_option("--out", da.out, "Hypothesis file");

  TwoPassArgs ta;
  auto* tp = app.add_subcommand("simulate-twopass", "Two-pass streaming simulation");
  auto* fix = tp->add_option("--fixture", ta.fixture, "Score-level fixture JSON")->check(CLI::ExistingFile);
  auto* ck = tp->add_option("--checkpoint", ta.checkpoint, "Two-head checkpoint")->check(CLI::ExistingFile);
  fix->excludes(ck);
  tp->add_option("--data", ta.decode.data, "Corpus directory")->check(CLI::ExistingDirectory);
  tp->add_option("--lm", ta.decode.lm_file, "LM text file")->check(CLI::ExistingFile);
  tp->add_option("--lm-data", ta.decode.lm_data, "Corpus for LM and priors")->check(CLI::ExistingDirectory);
  tp->add_option("--lm-order", ta.decode.lm_order, "LM order")->check(CLI::PositiveNumber);
  tp->add_option("--beam", ta.decode.beam, "Decoder beam");
  tp->add_option("--max-active", ta.decode.max_active, "Decoder token cap");
  tp->add_option("--kappa", ta.decode.kappa, "Acoustic scale");
  tp->add_option("--frame-ms", ta.frame_ms, "Raw frame length");
  tp->add_option("--skip", ta.skip, "Frame skip factor");
  tp->add_option("--out", ta.out, "Output directory");

  std::size_t seeds = 20;
  double step = 1e-5, tol = 1e-4, abs_floor = 1e-7;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference suite over all variants and criteria");
  gc->add_option("--seeds", seeds, "Random instances per pair")->check(CLI::PositiveNumber);
  gc->add_option("--step", step, "Central-difference step");
  gc->add_option("--tol", tol, "Relative tolerance");
  gc->add_option("--abs-floor", abs_floor, "Absolute differences below this pass");

  ParamArgs pa;
  auto* pc = app.add_subcommand("paramcount", "Parameter counts at production dims against reference totals");
  pc->add_option("--layers", pa.layers)->check(CLI::PositiveNumber);
  pc->add_option("--hidden", pa.hidden)->check(CLI::PositiveNumber);
  pc->add_option("--proj", pa.proj)->check(CLI::PositiveNumber);
  pc->add_option("--input", pa.input)->check(CLI::PositiveNumber);
  pc->add_option("--senones", pa.senones)->check(CLI::PositiveNumber);

  std::string report_dir;
  auto* rp = app.add_subcommand("report", "Summarize a run directory");
  rp->add_option("--run", report_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  std::string command = argc > 1 ? argv[1] : "";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(command, "usage", e.what(), 2);
  }

  try {
    if (*gen) return gen_data(gd);
    if (*tr) return train(recipe, run_dir);
    if (*dec) return decode_cmd(da);
    if (*tp) {
      if (!ta.fixture.empty()) return twopass_fixture(ta);
      if (ta.checkpoint.empty() || ta.decode.data.empty())
        throw UsageError("simulate-twopass needs --fixture, or --checkpoint with --data");
      return twopass_model(ta);
    }
    if (*gc) return gradcheck(seeds, step, tol, abs_floor);
    if (*pc) return paramcount(pa);
    if (*rp) return report(report_dir);
  } catch (const UsageError& e) {
    return fail(command, "usage", e.what(), 2);
  } catch (const RecipeError& e) {
    return fail(command, "config", e.what(), 2);
  } catch (const std::invalid_argument& e) {
    return fail(command, "schema", e.what(), 2);
  } catch (const nlohmann::json::exception& e) {
    return fail(command, "schema", e.what(), 2);
  } catch (const std::exception& e) {
    return fail(command, "runtime", e.what(), 1);
  }
  return fail(command, "usage", "no subcommand", 2);
}
