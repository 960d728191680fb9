// ltstream/src/scoring.cc
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

#include "ltstream/scoring.h"

#include <algorithm>
#include <stdexcept>

namespace ltstream {

double ScoredResult::wer() const {
  if (ref_len == 0) return errors() == 0 ? 0.0 : 1.0;
  return static_cast<double>(errors()) / static_cast<double>(ref_len);
}

double ScoredResult::senone_accuracy() const {
  if (frames == 0) return 0.0;
  return static_cast<double>(correct_frames) / static_cast<double>(frames);
}

ScoredResult& ScoredResult::operator+=(const ScoredResult& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_len += o.ref_len;
  frames += o.frames;
  correct_frames += o.correct_frames;
  return *this;
}

std::vector<EditOp> align_words(const WordSeq& hyp, const WordSeq& ref) {
  const std::size_t n = ref.size(), m = hyp.size();
  // d[i][j]: cost of aligning ref[0..i) with hyp[0..j).
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1), d[i - 1][j] + 1,
                          d[i][j - 1] + 1});
  std::vector<EditOp> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      ops.push_back(ref[i - 1] == hyp[j - 1] ? EditOp::kMatch : EditOp::kSubstitute);
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ops.push_back(EditOp::kDelete);
      --i;
    } else {
      ops.push_back(EditOp::kInsert);
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

ScoredResult score_wer(const WordSeq& hyp, const WordSeq& ref) {
  ScoredResult r;
  r.ref_len = ref.size();
  for (EditOp op : align_words(hyp, ref)) {
    if (op == EditOp::kSubstitute) ++r.substitutions;
    if (op == EditOp::kDelete) ++r.deletions;
    if (op == EditOp::kInsert) ++r.insertions;
  }
  return r;
}

std::size_t edit_distance(const WordSeq& a, const WordSeq& b) { return score_wer(a, b).errors(); }

ScoredResult pooled(const std::vector<ScoredResult>& results) {
  ScoredResult total;
  for (const ScoredResult& r : results) total += r;
  return total;
}

double relative_wer_reduction(double baseline_wer, double improved_wer) {
  if (!(baseline_wer > 0)) throw std::invalid_argument("baseline WER must be > 0");
  return (baseline_wer - improved_wer) / baseline_wer;
}

double relative_wer_reduction(const ScoredResult& baseline, const ScoredResult& improved) {
  return relative_wer_reduction(baseline.wer(), improved.wer());
}

ScoredResult score_senones(const std::vector<int>& predicted, const std::vector<int>& reference) {
  if (predicted.size() != reference.size())
    throw std::invalid_argument("senone sequences differ in length");
  ScoredResult r;
  r.frames = reference.size();
  for (std::size_t t = 0; t < reference.size(); ++t)
    if (predicted[t] == reference[t]) ++r.correct_frames;
  return r;
}

}  // namespace ltstream
