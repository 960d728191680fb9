// ltstream/scoring.h
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

#ifndef LTSTREAM_SCORING_H_
#define LTSTREAM_SCORING_H_

#include <cstddef>
#include <vector>

#include "ltstream/ngram.h"

namespace ltstream {

struct ScoredResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;
  std::size_t frames = 0;          // senone accuracy, when scored
  std::size_t correct_frames = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  // (S + D + I) / N; an empty reference scores 0 without hypotheses and 1 otherwise.
  double wer() const;
  double senone_accuracy() const;
  ScoredResult& operator+=(const ScoredResult& o);
};

// Unit-cost Levenshtein alignment. Among equal-cost alignments the
// backtrace prefers match/substitution, then deletion, then insertion.
ScoredResult score_wer(const WordSeq& hyp, const WordSeq& ref);
std::size_t edit_distance(const WordSeq& a, const WordSeq& b);

// Pooled over utterances: total errors / total reference words.
ScoredResult pooled(const std::vector<ScoredResult>& results);

// (WER_base - WER_new) / WER_base; requires WER_base > 0.
double relative_wer_reduction(double baseline_wer, double improved_wer);
double relative_wer_reduction(const ScoredResult& baseline, const ScoredResult& improved);

ScoredResult score_senones(const std::vector<int>& predicted, const std::vector<int>& reference);

// Edit operations of the preferred alignment, in order.
enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };
std::vector<EditOp> align_words(const WordSeq& hyp, const WordSeq& ref);

}  // namespace ltstream

#endif  // LTSTREAM_SCORING_H_
