// ltstream/src/corpus.cc
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

#include "ltstream/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "json_util.h"
#include "ltstream/checkpoint.h"
#include "ltstream/lstmp.h"

namespace ltstream {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int sample_row(const Tensor& m, std::size_t row, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    acc += m.at(row, j);
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(m.cols() - 1);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write " + p.string());
  out << text;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::vector<int>> read_id_lists(const std::filesystem::path& p) {
  std::map<std::string, std::vector<int>> out;
  std::istringstream in(read_text(p));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    std::vector<int> v;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stoi(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError(p.filename().string() + ":" + std::to_string(n) + ": bad integer '" +
                          tok + "'");
      }
    }
    if (!out.emplace(id, v).second)
      throw FormatError(p.filename().string() + ": duplicate id " + id);
  }
  return out;
}

}  // namespace

void ToyTaskSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("task: " + m); };
  if (vocab_size == 0 || senones_per_word == 0 || feature_dim == 0) fail("sizes must be >= 1");
  if (min_words == 0 || min_words > max_words) fail("need 1 <= min_words <= max_words");
  if (min_silence > max_silence) fail("min_silence > max_silence");
  if (skip_factor == 0) fail("skip_factor must be >= 1");
  if (!(frame_ms > 0)) fail("frame_ms must be > 0");
  if (!(label_delay_ms >= 0)) fail("label_delay_ms must be >= 0");
  if (frame_jitter >= frames_per_senone || frames_per_senone - frame_jitter < skip_factor)
    fail("every senone needs at least skip_factor raw frames");
  if (min_silence < delay_frames() + 1) fail("trailing silence shorter than the label delay");
  if (!(noise_sigma >= 0)) fail("noise_sigma must be >= 0");
  if (successors > vocab_size) fail("successors exceeds vocabulary");
  if (!(successor_mass >= 0 && successor_mass <= 1)) fail("successor_mass outside [0, 1]");
}

std::size_t ToyTaskSpec::delay_frames() const {
  return static_cast<std::size_t>(std::lround(label_delay_ms / frame_ms));
}

ToyTask make_task(const ToyTaskSpec& spec) {
  spec.validate();
  ToyTask task;
  task.spec = spec;
  Rng rng(mix(spec.seed));
  const Lexicon lex = spec.lexicon();
  task.means = Tensor(Shape{lex.num_senones(), spec.feature_dim});
  for (double& v : task.means.data()) v = spec.mean_scale * rng.normal();

  const std::size_t V = spec.vocab_size;
  task.transitions = Tensor(Shape{V + 1, V});
  for (std::size_t r = 0; r <= V; ++r) {
    std::vector<int> order(V);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<double> w(spec.successors);
    double z = 0.0;
    for (double& x : w) z += x = rng.uniform(0.5, 1.5);
    const double rest = spec.successors == 0 ? 1.0 : 1.0 - spec.successor_mass;
    for (std::size_t j = 0; j < V; ++j) task.transitions.at(r, j) = rest / static_cast<double>(V);
    for (std::size_t k = 0; k < spec.successors; ++k)
      task.transitions.at(r, order[k]) += spec.successor_mass * w[k] / z;
  }
  return task;
}

std::string utterance_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%06zu", index);
  return buf;
}

RawUtterance generate_raw(const ToyTask& task, std::size_t index) {
  const ToyTaskSpec& s = task.spec;
  const Lexicon lex = s.lexicon();
  Rng rng(mix(mix(s.seed) ^ (index + 1)));
  RawUtterance u;
  const int len = rng.uniform_int(static_cast<int>(s.min_words), static_cast<int>(s.max_words));
  std::size_t prev = s.vocab_size;
  for (int i = 0; i < len; ++i) {
    const int w = sample_row(task.transitions, prev, rng.uniform(0.0, 1.0));
    u.words.push_back(w);
    prev = static_cast<std::size_t>(w);
  }
  auto silence = [&] {
    const int n = rng.uniform_int(static_cast<int>(s.min_silence), static_cast<int>(s.max_silence));
    u.labels.insert(u.labels.end(), n, Lexicon::kSilence);
  };
  silence();
  const int lo = static_cast<int>(s.frames_per_senone - s.frame_jitter);
  const int hi = static_cast<int>(s.frames_per_senone + s.frame_jitter);
  for (int w : u.words)
    for (int sen : lex.pronunciation(w)) u.labels.insert(u.labels.end(), rng.uniform_int(lo, hi), sen);
  silence();

  u.features = Tensor(Shape{u.labels.size(), s.feature_dim});
  for (std::size_t t = 0; t < u.labels.size(); ++t)
    for (std::size_t d = 0; d < s.feature_dim; ++d)
      u.features.at(t, d) = task.means.at(u.labels[t], d) + s.noise_sigma * rng.normal();
  return u;
}

std::vector<int> delay_labels(const std::vector<int>& labels, std::size_t frames) {
  std::vector<int> out(labels.size(), Lexicon::kSilence);
  for (std::size_t t = frames; t < labels.size(); ++t) out[t] = labels[t - frames];
  return out;
}

Utterance preprocess(const RawUtterance& raw, const ToyTaskSpec& spec, std::string id) {
  std::vector<int> delayed = delay_labels(raw.labels, spec.delay_frames());
  Utterance u;
  u.id = std::move(id);
  u.words = raw.words;
  const std::size_t T = (raw.labels.size() + spec.skip_factor - 1) / spec.skip_factor;
  u.features = Tensor(Shape{T, spec.feature_dim});
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t r = t * spec.skip_factor;
    u.alignment.push_back(delayed[r]);
    for (std::size_t d = 0; d < spec.feature_dim; ++d) u.features.at(t, d) = raw.features.at(r, d);
  }
  return u;
}

Corpus generate_corpus(const ToyTaskSpec& spec, std::size_t num_utterances,
                       std::size_t first_index) {
  Corpus c;
  c.task = make_task(spec);
  c.utterances.reserve(num_utterances);
  for (std::size_t i = first_index; i < first_index + num_utterances; ++i)
    c.utterances.push_back(preprocess(generate_raw(c.task, i), spec, utterance_id(i)));
  return c;
}

bool is_validation(const std::string& id) { return fnv1a(id) % 10 == 0; }

Split split(const Corpus& corpus) {
  Split s;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
    (is_validation(corpus.utterances[i].id) ? s.valid : s.train).push_back(i);
  return s;
}

std::vector<WordSeq> transcripts(const Corpus& corpus, const std::vector<std::size_t>& which) {
  std::vector<WordSeq> out;
  for (std::size_t i : which) out.push_back(corpus.utterances[i].words);
  return out;
}

// ---- JSON ------------------------------------------------------------------------

Json to_json(const ToyTaskSpec& s) {
  return Json{{"vocab_size", s.vocab_size},
              {"senones_per_word", s.senones_per_word},
              {"feature_dim", s.feature_dim},
              {"frames_per_senone", s.frames_per_senone},
              {"frame_jitter", s.frame_jitter},
              {"min_words", s.min_words},
              {"max_words", s.max_words},
              {"min_silence", s.min_silence},
              {"max_silence", s.max_silence},
              {"noise_sigma", s.noise_sigma},
              {"mean_scale", s.mean_scale},
              {"successors", s.successors},
              {"successor_mass", s.successor_mass},
              {"frame_ms", s.frame_ms},
              {"skip_factor", s.skip_factor},
              {"label_delay_ms", s.label_delay_ms},
              {"seed", s.seed}};
}

ToyTaskSpec task_from_json(const Json& j, const std::string& where) {
  check_keys(j,
             {"vocab_size", "senones_per_word", "feature_dim", "frames_per_senone", "frame_jitter",
              "min_words", "max_words", "min_silence", "max_silence", "noise_sigma", "mean_scale",
              "successors", "successor_mass", "frame_ms", "skip_factor", "label_delay_ms", "seed"},
             where);
  ToyTaskSpec s;
  read_opt(j, "vocab_size", s.vocab_size, where);
  read_opt(j, "senones_per_word", s.senones_per_word, where);
  read_opt(j, "feature_dim", s.feature_dim, where);
  read_opt(j, "frames_per_senone", s.frames_per_senone, where);
  read_opt(j, "frame_jitter", s.frame_jitter, where);
  read_opt(j, "min_words", s.min_words, where);
  read_opt(j, "max_words", s.max_words, where);
  read_opt(j, "min_silence", s.min_silence, where);
  read_opt(j, "max_silence", s.max_silence, where);
  read_opt(j, "noise_sigma", s.noise_sigma, where);
  read_opt(j, "mean_scale", s.mean_scale, where);
  read_opt(j, "successors", s.successors, where);
  read_opt(j, "successor_mass", s.successor_mass, where);
  read_opt(j, "frame_ms", s.frame_ms, where);
  read_opt(j, "skip_factor", s.skip_factor, where);
  read_opt(j, "label_delay_ms", s.label_delay_ms, where);
  read_opt(j, "seed", s.seed, where);
  s.validate();
  return s;
}

std::string spec_to_json(const ToyTaskSpec& spec) { return to_json(spec).dump(2); }

ToyTaskSpec spec_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("task: ") + e.what());
  }
  return task_from_json(j, "task");
}

// ---- files --------------------------------------------------------------------------

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  write_text(dir / "task.json", spec_to_json(corpus.task.spec) + "\n");
  Container c;
  c.meta["kind"] = "corpus";
  c.meta["utterances"] = std::to_string(corpus.utterances.size());
  c.tensors.emplace_back("task.means", corpus.task.means);
  c.tensors.emplace_back("task.transitions", corpus.task.transitions);
  std::ostringstream words, align;
  for (const Utterance& u : corpus.utterances) {
    c.tensors.emplace_back(u.id, u.features);
    words << u.id;
    for (int w : u.words) words << ' ' << w;
    words << '\n';
    align << u.id;
    for (int s : u.alignment) align << ' ' << s;
    align << '\n';
  }
  write_container(dir / "features.ltck", c);
  write_text(dir / "transcripts.txt", words.str());
  write_text(dir / "alignments.txt", align.str());
}

Corpus read_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  corpus.task.spec = spec_from_json(read_text(dir / "task.json"));
  Container c = read_container(dir / "features.ltck");
  if (c.meta.count("kind") == 0 || c.get("kind") != "corpus")
    throw FormatError("features.ltck is not a corpus container");
  auto words = read_id_lists(dir / "transcripts.txt");
  auto aligns = read_id_lists(dir / "alignments.txt");
  const Lexicon lex = corpus.task.spec.lexicon();
  for (auto& [name, t] : c.tensors) {
    if (name == "task.means") {
      corpus.task.means = t;
      continue;
    }
    if (name == "task.transitions") {
      corpus.task.transitions = t;
      continue;
    }
    Utterance u;
    u.id = name;
    u.features = t;
    if (!words.count(name) || !aligns.count(name))
      throw FormatError("utterance " + name + " lacks a transcript or alignment");
    u.words = words.at(name);
    u.alignment = aligns.at(name);
    if (t.rank() != 2 || t.rows() != u.alignment.size() ||
        t.cols() != corpus.task.spec.feature_dim)
      throw FormatError("utterance " + name + ": features do not match its alignment");
    for (int w : u.words)
      if (w < 0 || static_cast<std::size_t>(w) >= lex.num_words)
        throw FormatError("utterance " + name + ": word id out of range");
    for (int s : u.alignment)
      if (s < 0 || static_cast<std::size_t>(s) >= lex.num_senones())
        throw FormatError("utterance " + name + ": senone id out of range");
    corpus.utterances.push_back(std::move(u));
  }
  if (corpus.utterances.size() != words.size())
    throw FormatError("transcripts.txt lists utterances without features");
  return corpus;
}

}  // namespace ltstream
