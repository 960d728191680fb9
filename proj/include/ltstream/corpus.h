// ltstream/corpus.h
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
// Synthetic toy task. Sentences come from a word-bigram Markov chain,
// each word is its senone string with a few raw 10 ms frames per senone,
// padded with silence, and every frame is the senone's Gaussian class mean
// plus noise. Labels are then delayed and both streams decimated.

#ifndef LTSTREAM_CORPUS_H_
#define LTSTREAM_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ltstream/lexicon.h"
#include "ltstream/ngram.h"
#include "ltstream/tensor.h"

namespace ltstream {

struct ToyTaskSpec {
  std::size_t vocab_size = 20;
  std::size_t senones_per_word = 3;
  std::size_t feature_dim = 8;
  std::size_t frames_per_senone = 4;  // raw frames
  std::size_t frame_jitter = 1;
  std::size_t min_words = 3;
  std::size_t max_words = 8;
  std::size_t min_silence = 6;  // raw frames, each end
  std::size_t max_silence = 10;
  double noise_sigma = 1.0;
  double mean_scale = 1.0;
  std::size_t successors = 3;     // favoured next words per word
  double successor_mass = 0.8;    // probability mass on them
  double frame_ms = 10.0;
  std::size_t skip_factor = 2;
  double label_delay_ms = 50.0;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t delay_frames() const;  // round(label_delay_ms / frame_ms)
  Lexicon lexicon() const { return Lexicon{vocab_size, senones_per_word}; }
  bool operator==(const ToyTaskSpec&) const = default;
};

struct ToyTask {
  ToyTaskSpec spec;
  Tensor means;        // [senones x feature_dim]
  Tensor transitions;  // [(vocab + 1) x vocab]; row vocab is the sentence start
};

ToyTask make_task(const ToyTaskSpec& spec);

// Before delay and decimation.
struct RawUtterance {
  WordSeq words;
  std::vector<int> labels;  // per raw frame
  Tensor features;          // [raw frames x dim]
};

struct Utterance {
  std::string id;
  Tensor features;             // [frames x dim], post-skip
  WordSeq words;
  std::vector<int> alignment;  // post-skip, delayed
  bool operator==(const Utterance&) const = default;
};

std::string utterance_id(std::size_t index);
// Utterance `index` depends only on the task and the index.
RawUtterance generate_raw(const ToyTask& task, std::size_t index);
std::vector<int> delay_labels(const std::vector<int>& labels, std::size_t frames);
Utterance preprocess(const RawUtterance& raw, const ToyTaskSpec& spec, std::string id);

struct Corpus {
  ToyTask task;
  std::vector<Utterance> utterances;
};

Corpus generate_corpus(const ToyTaskSpec& spec, std::size_t num_utterances,
                       std::size_t first_index = 0);

// Roughly one utterance in ten, by hash of the id.
bool is_validation(const std::string& id);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};
Split split(const Corpus& corpus);

std::vector<WordSeq> transcripts(const Corpus& corpus, const std::vector<std::size_t>& which);

// Directory with task.json, features.ltck, transcripts.txt, alignments.txt.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

std::string spec_to_json(const ToyTaskSpec& spec);
ToyTaskSpec spec_from_json(const std::string& text);

}  // namespace ltstream

#endif  // LTSTREAM_CORPUS_H_
