// ltstream/twopass.h
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
//
// \file
// Two-pass streaming decode on a simulated clock.
//
// Frames arrive every frame_ms * skip_factor milliseconds. Pass 1 runs the
// shared time stack plus the zero-look-ahead head and decodes immediately,
// emitting a word once every active token agrees on it. The time-stack
// outputs are stored; pass 2 feeds them to the look-ahead head, so frame t
// reaches the second decoder only after pass 1 has consumed frame t + N.
// Whenever pass 2 commits words they are aligned against the pass-1 words
// not yet resolved and the differences become replacement events.
//
// Compute time is zero unless a cost hook is given. All events are
// produced in simulated-time order on one thread.

#ifndef LTSTREAM_TWOPASS_H_
#define LTSTREAM_TWOPASS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltstream/decoder.h"
#include "ltstream/model.h"

namespace ltstream {

struct FrameClock {
  double frame_ms = 10.0;
  std::size_t skip_factor = 2;

  double effective_ms() const { return frame_ms * static_cast<double>(skip_factor); }
  void validate() const;
};

// Added latency of a head that looks `lookahead` effective frames ahead.
double latency_ms(std::size_t lookahead, const FrameClock& clock = {});

enum class EventKind {
  kEmit,     // pass 1 shows a word
  kCommit,   // pass 2 confirms a pass-1 word
  kReplace,  // pass 2 overwrites (or removes) pass-1 words
  kInsert,   // pass 2 adds a word pass 1 never showed
  kFinal,    // end of a pass
};
std::string_view to_string(EventKind k);

struct TimelineEvent {
  double time_ms = 0.0;
  int pass = 1;
  EventKind kind = EventKind::kEmit;
  std::size_t frame = 0;           // last frame the pass had consumed
  std::vector<std::size_t> span;   // indices into DecodeTimeline::pass1_words
  WordSeq old_words;
  WordSeq new_words;
};

struct Pass1Word {
  int word = -1;
  std::size_t start = 0;      // first frame
  double emit_ms = 0.0;
  bool superseded = false;    // pass 2 had already committed this region
  bool replaced = false;
  double replaced_ms = 0.0;
};

struct DecodeTimeline {
  FrameClock clock;
  std::size_t lookahead = 0;
  std::size_t num_frames = 0;
  std::vector<TimelineEvent> events;  // non-decreasing time
  std::vector<Pass1Word> pass1_words;
  WordSeq pass1_final;
  WordSeq final_words;                // pass 2 result
  std::size_t time_stack_evaluations = 0;
};

// Replaced pass-1 words / shown (non-superseded) pass-1 words; 0 when none shown.
double replacement_rate(const DecodeTimeline& tl);
std::size_t replacement_events(const DecodeTimeline& tl);

struct DelaySummary {
  std::size_t words = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double max_ms = 0.0;
};
// Per shown pass-1 word: replacement time - emission time, 0 if never replaced.
DelaySummary perceived_latency(const DecodeTimeline& tl);

struct LatencyReport {
  double pass1_added_ms = 0.0;
  double pass2_added_ms = 0.0;
  std::size_t lookahead = 0;
  std::size_t frames = 0;
  std::size_t pass1_words = 0;
  std::size_t replacements = 0;
  double replacement_rate = 0.0;
  DelaySummary perceived;
};
LatencyReport latency_report(const DecodeTimeline& tl);
LatencyReport merge_reports(const std::vector<DecodeTimeline>& timelines);

// One JSON object per line.
std::string timeline_jsonl(const DecodeTimeline& tl);
std::string report_json(const LatencyReport& r);
// FNV-1a over timeline_jsonl.
std::uint64_t timeline_digest(const DecodeTimeline& tl);

// (pass, frame) -> milliseconds of compute charged to that step.
using CostHook = std::function<double(int pass, std::size_t frame)>;

struct TwoPassConfig {
  DecoderConfig decoder;
  FrameClock clock;
  Tensor priors;        // empty: uniform
  double kappa = 1.0;
  CostHook cost;        // empty: zero cost
};

// Streams `features` through the two-head model.
DecodeTimeline two_pass_decode(const TwoHeadModel& model, const Tensor& features,
                               const Lexicon& lexicon, const NGramLM& lm,
                               const TwoPassConfig& config);

// Same simulation on precomputed acoustic scores: pass-2 row t becomes
// available with pass-1 frame min(t + lookahead, T - 1).
DecodeTimeline simulate_two_pass(const Tensor& pass1_scores, const Tensor& pass2_scores,
                                 std::size_t lookahead, const Lexicon& lexicon,
                                 const NGramLM& lm, const TwoPassConfig& config);

// The reference the final transcript must equal: a full-utterance decode
// of the look-ahead head.
WordSeq standalone_second_pass(const TwoHeadModel& model, const Tensor& features,
                               const Lexicon& lexicon, const NGramLM& lm,
                               const TwoPassConfig& config);

}  // namespace ltstream

#endif  // LTSTREAM_TWOPASS_H_
