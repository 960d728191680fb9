// ltstream/src/twopass.cc
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

#include "ltstream/twopass.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "json_util.h"
#include "ltstream/criteria.h"
#include "ltstream/scoring.h"
#include "ltstream/streaming.h"

namespace ltstream {

void FrameClock::validate() const {
  if (!(frame_ms > 0) || !std::isfinite(frame_ms)) throw ConfigError("frame_ms must be > 0");
  if (skip_factor == 0) throw ConfigError("skip_factor must be >= 1");
}

double latency_ms(std::size_t lookahead, const FrameClock& clock) {
  clock.validate();
  return static_cast<double>(lookahead) * clock.effective_ms();
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kEmit: return "emit";
    case EventKind::kCommit: return "commit";
    case EventKind::kReplace: return "replace";
    case EventKind::kInsert: return "insert";
    case EventKind::kFinal: return "final";
  }
  return "?";
}

namespace {

class Simulator {
 public:
  Simulator(const Lexicon& lexicon, const NGramLM& lm, const TwoPassConfig& config,
            DecodeTimeline& tl)
      : dec1_(lexicon, lm, config.decoder), dec2_(lexicon, lm, config.decoder), tl_(tl) {}

  void pass1(std::span<const double> scores, std::size_t t, double now) {
    dec1_.advance(scores);
    emit(dec1_.partial().words, t, now);
  }

  void pass1_final(std::size_t t, double now) {
    DecodeResult r = dec1_.finalize();
    emit(r.words, t, now);
    tl_.pass1_final = word_ids(r.words);
    tl_.events.push_back(TimelineEvent{now, 1, EventKind::kFinal, t, {}, {}, tl_.pass1_final});
  }

  void pass2(std::span<const double> scores, std::size_t t, double now) {
    dec2_.advance(scores);
    PartialResult p = dec2_.partial();
    commit(p.words, p.frontier, t, now, false);
  }

  void pass2_final(std::size_t t, double now) {
    DecodeResult r = dec2_.finalize();
    commit(r.words, t + 1, t, now, true);
    tl_.final_words = word_ids(r.words);
    tl_.events.push_back(TimelineEvent{now, 2, EventKind::kFinal, t, {}, {}, tl_.final_words});
  }

 private:
  void emit(const std::vector<WordHyp>& words, std::size_t t, double now) {
    if (words.size() < shown1_.size() ||
        !std::equal(shown1_.begin(), shown1_.end(), words.begin()))
      throw std::logic_error("first-pass result is not a stable prefix");
    for (std::size_t i = shown1_.size(); i < words.size(); ++i) {
      Pass1Word w;
      w.word = words[i].word;
      w.start = words[i].start;
      w.emit_ms = now;
      w.superseded = words[i].start < frontier2_;
      const std::size_t idx = tl_.pass1_words.size();
      tl_.pass1_words.push_back(w);
      if (w.superseded) continue;
      pending_.push_back(idx);
      tl_.events.push_back(TimelineEvent{now, 1, EventKind::kEmit, t, {idx}, {}, {w.word}});
    }
    shown1_ = words;
  }

  void commit(const std::vector<WordHyp>& words, std::size_t frontier, std::size_t t, double now,
              bool final) {
    if (words.size() < committed2_) throw std::logic_error("second-pass result is not a stable prefix");
    frontier2_ = std::max(frontier2_, frontier);
    if (words.size() == committed2_ && !final) return;
    WordSeq fresh;
    for (std::size_t j = committed2_; j < words.size(); ++j) fresh.push_back(words[j].word);
    committed2_ = words.size();

    WordSeq old;
    for (std::size_t i : pending_) old.push_back(tl_.pass1_words[i].word);
    // d[i]: edit distance between old[0..i) and all of `fresh`.
    const std::size_t n = old.size(), m = fresh.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1), last(n + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    last[0] = m;
    for (std::size_t i = 1; i <= n; ++i) {
      cur[0] = i;
      for (std::size_t j = 1; j <= m; ++j)
        cur[j] = std::min({prev[j - 1] + (old[i - 1] == fresh[j - 1] ? 0 : 1), prev[j] + 1,
                           cur[j - 1] + 1});
      last[i] = cur[m];
      std::swap(prev, cur);
    }
    std::size_t take = n;
    if (!final) {
      for (std::size_t i = n + 1; i-- > 0;)
        if (last[i] < last[take]) take = i;
    }
    const WordSeq ref(old.begin(), old.begin() + static_cast<std::ptrdiff_t>(take));
    std::size_t i = 0, j = 0;
    for (EditOp op : align_words(fresh, ref)) {
      switch (op) {
        case EditOp::kMatch:
          tl_.events.push_back(
              TimelineEvent{now, 2, EventKind::kCommit, t, {pending_[i]}, {ref[i]}, {fresh[j]}});
          ++i, ++j;
          break;
        case EditOp::kSubstitute:
          mark(pending_[i], now);
          tl_.events.push_back(
              TimelineEvent{now, 2, EventKind::kReplace, t, {pending_[i]}, {ref[i]}, {fresh[j]}});
          ++i, ++j;
          break;
        case EditOp::kDelete:
          mark(pending_[i], now);
          tl_.events.push_back(
              TimelineEvent{now, 2, EventKind::kReplace, t, {pending_[i]}, {ref[i]}, {}});
          ++i;
          break;
        case EditOp::kInsert:
          tl_.events.push_back(TimelineEvent{now, 2, EventKind::kInsert, t, {}, {}, {fresh[j]}});
          ++j;
          break;
      }
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(take));
  }

  void mark(std::size_t idx, double now) {
    tl_.pass1_words[idx].replaced = true;
    tl_.pass1_words[idx].replaced_ms = now;
  }

  TokenPassingDecoder dec1_, dec2_;
  DecodeTimeline& tl_;
  std::vector<WordHyp> shown1_;
  std::vector<std::size_t> pending_;  // shown pass-1 words not yet resolved
  std::size_t committed2_ = 0;
  std::size_t frontier2_ = 0;
};

// ready[t]: pass-1 frame after which pass-2 row t exists.
DecodeTimeline run(const Tensor& s1, const Tensor& s2, const std::vector<std::size_t>& ready,
                   std::size_t lookahead, const Lexicon& lexicon, const NGramLM& lm,
                   const TwoPassConfig& config) {
  config.clock.validate();
  const std::size_t T = s1.rows();
  if (s1.rank() != 2 || T == 0) throw ShapeError("two-pass decode needs at least one frame");
  expect_shape(s2, s1.shape(), "second-pass scores");
  const double eff = config.clock.effective_ms();
  auto cost = [&](int pass, std::size_t t) {
    if (!config.cost) return 0.0;
    const double c = config.cost(pass, t);
    if (!(c >= 0) || !std::isfinite(c)) throw ConfigError("compute cost must be finite and >= 0");
    return c;
  };
  std::vector<double> t1(T), t2(T);
  for (std::size_t t = 0; t < T; ++t)
    t1[t] = std::max(static_cast<double>(t + 1) * eff, t ? t1[t - 1] : 0.0) + cost(1, t);
  for (std::size_t t = 0; t < T; ++t) {
    if (ready[t] >= T || ready[t] < t) throw std::logic_error("bad second-pass availability");
    t2[t] = std::max(t1[ready[t]], t ? t2[t - 1] : 0.0) + cost(2, t);
  }
  // (time, pass, frame); frame T is the end of the pass.
  std::vector<std::tuple<double, int, std::size_t>> steps;
  for (std::size_t t = 0; t < T; ++t) {
    steps.emplace_back(t1[t], 1, t);
    steps.emplace_back(t2[t], 2, t);
  }
  steps.emplace_back(t1[T - 1], 1, T);
  steps.emplace_back(t2[T - 1], 2, T);
  std::stable_sort(steps.begin(), steps.end());

  DecodeTimeline tl;
  tl.clock = config.clock;
  tl.lookahead = lookahead;
  tl.num_frames = T;
  Simulator sim(lexicon, lm, config, tl);
  for (const auto& [now, pass, t] : steps) {
    if (pass == 1) {
      if (t < T) sim.pass1(s1.row(t), t, now);
      else sim.pass1_final(T - 1, now);
    } else {
      if (t < T) sim.pass2(s2.row(t), t, now);
      else sim.pass2_final(T - 1, now);
    }
  }
  return tl;
}

Tensor scores_of(const Tensor& logits, const TwoPassConfig& config) {
  const Tensor priors = config.priors.size() ? config.priors : uniform_priors(logits.cols());
  return acoustic_score_from_log(log_posteriors(logits), priors, config.kappa);
}

Tensor row_matrix(const std::vector<Tensor>& rows) {
  Tensor out(Shape{rows.size(), rows.front().size()});
  for (std::size_t t = 0; t < rows.size(); ++t)
    std::copy(rows[t].data().begin(), rows[t].data().end(), out.row(t).begin());
  return out;
}

}  // namespace

DecodeTimeline simulate_two_pass(const Tensor& pass1_scores, const Tensor& pass2_scores,
                                 std::size_t lookahead, const Lexicon& lexicon,
                                 const NGramLM& lm, const TwoPassConfig& config) {
  const std::size_t T = pass1_scores.rank() == 2 ? pass1_scores.rows() : 0;
  std::vector<std::size_t> ready(T);
  for (std::size_t t = 0; t < T; ++t) ready[t] = std::min(t + lookahead, T - 1);
  return run(pass1_scores, pass2_scores, ready, lookahead, lexicon, lm, config);
}

DecodeTimeline two_pass_decode(const TwoHeadModel& model, const Tensor& features,
                               const Lexicon& lexicon, const NGramLM& lm,
                               const TwoPassConfig& config) {
  if (features.rank() != 2 || features.rows() == 0)
    throw ShapeError("two-pass decode needs at least one frame");
  const LayerTrajectoryModel lt = model.lt_model();
  const LayerTrajectoryModel clt = model.clt_model();
  lt.validate();
  clt.validate();
  const std::size_t T = features.rows();
  StreamingTimeStack stack(model.shared);
  StreamingHead first(model.head_lt);
  StreamingHead second(model.head_clt);
  std::vector<Tensor> logits1(T), logits2(T);
  std::vector<std::size_t> ready(T, T);
  auto take = [&](std::vector<Emission> out, std::vector<Tensor>& dst, std::size_t t) {
    for (Emission& e : out) {
      dst[e.frame] = std::move(e.logits);
      if (&dst == &logits2) ready[e.frame] = t;
    }
  };
  for (std::size_t t = 0; t < T; ++t) {
    Tensor frame(Shape{features.cols()});
    std::copy(features.row(t).begin(), features.row(t).end(), frame.data().begin());
    // The stored time outputs feed both heads; the stack runs once per frame.
    const std::vector<Tensor>& h = stack.push(frame);
    take(first.push(h), logits1, t);
    take(second.push(h), logits2, t);
  }
  take(first.finish(), logits1, T - 1);
  take(second.finish(), logits2, T - 1);
  DecodeTimeline tl = run(scores_of(row_matrix(logits1), config),
                          scores_of(row_matrix(logits2), config), ready,
                          lookahead_frames(clt.config), lexicon, lm, config);
  tl.time_stack_evaluations = stack.evaluations();
  return tl;
}

WordSeq standalone_second_pass(const TwoHeadModel& model, const Tensor& features,
                               const Lexicon& lexicon, const NGramLM& lm,
                               const TwoPassConfig& config) {
  const Tensor logits = forward_logits(model.clt_model(), features);
  return word_ids(decode(scores_of(logits, config), lexicon, lm, config.decoder).words);
}

// ---- reports ----------------------------------------------------------------------

double replacement_rate(const DecodeTimeline& tl) {
  std::size_t shown = 0, replaced = 0;
  for (const Pass1Word& w : tl.pass1_words) {
    if (w.superseded) continue;
    ++shown;
    if (w.replaced) ++replaced;
  }
  return shown ? static_cast<double>(replaced) / static_cast<double>(shown) : 0.0;
}

std::size_t replacement_events(const DecodeTimeline& tl) {
  return static_cast<std::size_t>(std::count_if(
      tl.events.begin(), tl.events.end(),
      [](const TimelineEvent& e) { return e.kind == EventKind::kReplace; }));
}

namespace {

DelaySummary summarize(std::vector<double> d) {
  DelaySummary s;
  s.words = d.size();
  if (d.empty()) return s;
  std::sort(d.begin(), d.end());
  double sum = 0.0;
  for (double v : d) sum += v;
  s.mean_ms = sum / static_cast<double>(d.size());
  const std::size_t n = d.size();
  s.median_ms = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  s.max_ms = d.back();
  return s;
}

void collect_delays(const DecodeTimeline& tl, std::vector<double>& out) {
  for (const Pass1Word& w : tl.pass1_words)
    if (!w.superseded) out.push_back(w.replaced ? w.replaced_ms - w.emit_ms : 0.0);
}

}  // namespace

DelaySummary perceived_latency(const DecodeTimeline& tl) {
  std::vector<double> d;
  collect_delays(tl, d);
  return summarize(std::move(d));
}

LatencyReport latency_report(const DecodeTimeline& tl) { return merge_reports({tl}); }

LatencyReport merge_reports(const std::vector<DecodeTimeline>& timelines) {
  LatencyReport r;
  std::vector<double> delays;
  std::size_t replaced = 0;
  for (const DecodeTimeline& tl : timelines) {
    r.lookahead = std::max(r.lookahead, tl.lookahead);
    r.pass2_added_ms = std::max(r.pass2_added_ms, latency_ms(tl.lookahead, tl.clock));
    r.frames += tl.num_frames;
    r.replacements += replacement_events(tl);
    for (const Pass1Word& w : tl.pass1_words)
      if (!w.superseded && w.replaced) ++replaced;
    collect_delays(tl, delays);
  }
  r.pass1_words = delays.size();
  r.replacement_rate =
      delays.empty() ? 0.0 : static_cast<double>(replaced) / static_cast<double>(delays.size());
  r.perceived = summarize(std::move(delays));
  return r;
}

std::string timeline_jsonl(const DecodeTimeline& tl) {
  std::string out;
  for (const TimelineEvent& e : tl.events) {
    Json j{{"time_ms", e.time_ms},
           {"pass", e.pass},
           {"event", std::string(to_string(e.kind))},
           {"frame", e.frame},
           {"span", e.span},
           {"old", e.old_words},
           {"new", e.new_words}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string report_json(const LatencyReport& r) {
  Json j{{"lookahead_frames", r.lookahead},
         {"added_latency_ms", Json{{"pass1", r.pass1_added_ms}, {"pass2", r.pass2_added_ms}}},
         {"frames", r.frames},
         {"pass1_words", r.pass1_words},
         {"replacement_events", r.replacements},
         {"replacement_rate", r.replacement_rate},
         {"perceived_latency_ms", Json{{"words", r.perceived.words},
                                       {"mean", r.perceived.mean_ms},
                                       {"median", r.perceived.median_ms},
                                       {"max", r.perceived.max_ms}}}};
  return j.dump(2);
}

std::uint64_t timeline_digest(const DecodeTimeline& tl) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : timeline_jsonl(tl)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ltstream
