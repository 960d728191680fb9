// ltstream/decoder.h
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
// Frame-synchronous token passing over the lexicon / n-gram graph, and
// lattice generation on top of it.
//
// Search graph: optional leading silence, one or more words (each a
// left-to-right chain of its senones, self-loops allowed, at least one
// frame per state), optional trailing silence. The LM score of a word is
// added when the word is entered and P(</s>) at the end. Input is a
// [T x senones] matrix of acoustic log-scores.

#ifndef LTSTREAM_DECODER_H_
#define LTSTREAM_DECODER_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ltstream/lattice.h"
#include "ltstream/lexicon.h"
#include "ltstream/ngram.h"
#include "ltstream/tensor.h"

namespace ltstream {

// The search lost every hypothesis; frame() is where it happened.
class SearchError : public std::runtime_error {
 public:
  SearchError(const std::string& what, std::size_t frame)
      : std::runtime_error(what), frame_(frame) {}
  std::size_t frame() const { return frame_; }

 private:
  std::size_t frame_;
};

struct DecoderConfig {
  double beam = 20.0;
  std::size_t max_active = 4000;
  double lm_weight = 1.0;

  void validate() const;
};

struct WordHyp {
  int word = -1;
  std::size_t start = 0;  // first frame
  bool operator==(const WordHyp&) const = default;
};

WordSeq word_ids(const std::vector<WordHyp>& words);

struct PartialResult {
  std::vector<WordHyp> words;  // agreed by every active token
  std::size_t frontier = 0;    // later words start at or after this frame
};

struct DecodeResult {
  std::vector<WordHyp> words;
  double score = 0.0;
};

class TokenPassingDecoder {
 public:
  TokenPassingDecoder(const Lexicon& lexicon, const NGramLM& lm, DecoderConfig config = {});

  // Consumes one frame of acoustic log-scores.
  void advance(std::span<const double> scores);
  std::size_t frames() const { return frames_; }
  std::size_t active() const { return tokens_.size(); }
  // Best token score after each consumed frame.
  const std::vector<double>& best_per_frame() const { return best_; }

  PartialResult partial() const;
  // Adds the end-of-sentence LM score and returns the best complete
  // hypothesis (or the best partial one if none can end here).
  DecodeResult finalize() const;

 private:
  enum Kind : std::uint64_t { kLead = 0, kWord = 1, kTrail = 2 };
  struct Token {
    double score;
    int link;
  };
  struct Link {
    int word;
    std::size_t start;
    int prev;
  };

  static std::uint64_t key(Kind kind, int word, std::size_t state, int lm_state) {
    return (static_cast<std::uint64_t>(kind) << 62) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(word + 1)) << 40) |
           (static_cast<std::uint64_t>(state) << 32) | static_cast<std::uint32_t>(lm_state);
  }
  int intern(const WordSeq& state);
  std::pair<double, int> lm_step(int lm_state, int word);
  std::vector<WordHyp> chain(int link) const;

  const Lexicon* lexicon_;
  const NGramLM* lm_;
  DecoderConfig config_;
  std::map<std::uint64_t, Token> tokens_;
  std::vector<Link> links_;
  std::map<WordSeq, int> lm_ids_;
  std::vector<WordSeq> lm_states_;
  std::map<std::pair<int, int>, std::pair<double, int>> lm_cache_;
  std::vector<double> best_;
  std::size_t frames_ = 0;
};

DecodeResult decode(const Tensor& scores, const Lexicon& lexicon, const NGramLM& lm,
                    const DecoderConfig& config = {});

struct LatticeConfig {
  DecoderConfig search;          // beam relative to the best prefix at each frame
  double lattice_beam = 10.0;    // alpha + arc + beta against the best path
  std::size_t max_arcs = 4000;
  std::size_t max_word_frames = 40;
};

struct Reference {
  WordSeq words;
  std::vector<int> alignment;  // per-frame senones
};

// Word lattice from acoustic scores. Always contains the decoder's best
// path, and the reference path when one is given.
Lattice generate_lattice(const Tensor& scores, const Lexicon& lexicon, const NGramLM& lm,
                         const LatticeConfig& config = {},
                         const std::optional<Reference>& reference = std::nullopt);

}  // namespace ltstream

#endif  // LTSTREAM_DECODER_H_
