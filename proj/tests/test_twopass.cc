// ltstream/tests/test_twopass.cc
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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ltstream/corpus.h"
#include "ltstream/fixtures.h"
#include "ltstream/twopass.h"

namespace ltstream {
namespace {

NGramLM flat_lm(const Lexicon& lex) {
  std::vector<WordSeq> corpus;
  for (int w = 0; w < static_cast<int>(lex.num_words); ++w) corpus.push_back({w});
  return train_ngram(corpus, 2, lex.num_words, 1.0);
}

const Lexicon kLex{6, 3};

TwoPassConfig config() {
  TwoPassConfig c;
  c.decoder.beam = 14;
  c.decoder.max_active = 300;
  return c;
}

std::size_t count(const DecodeTimeline& tl, EventKind k) {
  return static_cast<std::size_t>(std::count_if(
      tl.events.begin(), tl.events.end(), [k](const TimelineEvent& e) { return e.kind == k; }));
}

TEST(Latency, TableValues) {
  const FrameClock clock;
  EXPECT_EQ(clock.effective_ms(), 20.0);
  EXPECT_EQ(latency_ms(0, clock), 0.0);
  EXPECT_EQ(latency_ms(6, clock), 120.0);
  EXPECT_EQ(latency_ms(12, clock), 240.0);
  EXPECT_EQ(latency_ms(24, clock), 480.0);
  EXPECT_EQ(latency_ms(3, FrameClock{10.0, 3}), 90.0);
  EXPECT_THROW(latency_ms(1, FrameClock{10.0, 0}), ConfigError);
  EXPECT_THROW(latency_ms(1, FrameClock{0.0, 2}), ConfigError);
}

TEST(TwoPass, IdenticalPassesNeverReplace) {
  const NGramLM lm = flat_lm(kLex);
  const Tensor s = aligned_scores(kLex, fixture_alignment(kLex, {1, 4, 2, 5, 0}));
  for (std::size_t n : {0, 3, 12}) {
    DecodeTimeline tl = simulate_two_pass(s, s, n, kLex, lm, config());
    EXPECT_EQ(replacement_events(tl), 0u);
    EXPECT_EQ(count(tl, EventKind::kInsert), 0u);
    EXPECT_EQ(replacement_rate(tl), 0.0);
    const DelaySummary d = perceived_latency(tl);
    EXPECT_EQ(d.words, 5u);
    EXPECT_EQ(d.mean_ms, 0.0);
    EXPECT_EQ(d.max_ms, 0.0);
    EXPECT_EQ(tl.final_words, (WordSeq{1, 4, 2, 5, 0}));
    EXPECT_EQ(tl.pass1_final, tl.final_words);
    EXPECT_EQ(count(tl, EventKind::kCommit), 5u);
  }
}

TEST(TwoPass, OneWordDisagreement) {
  const NGramLM lm = flat_lm(kLex);
  const Tensor s1 = aligned_scores(kLex, fixture_alignment(kLex, {1, 4, 2, 5, 0}));
  const Tensor s2 = aligned_scores(kLex, fixture_alignment(kLex, {1, 4, 3, 5, 0}));
  for (std::size_t n : {0, 2, 6}) {
    const DecodeTimeline tl = simulate_two_pass(s1, s2, n, kLex, lm, config());
    ASSERT_EQ(replacement_events(tl), 1u) << n;
    const auto rep = std::find_if(tl.events.begin(), tl.events.end(), [](const TimelineEvent& e) {
      return e.kind == EventKind::kReplace;
    });
    EXPECT_EQ(rep->old_words, WordSeq{2});
    EXPECT_EQ(rep->new_words, WordSeq{3});
    ASSERT_EQ(rep->span.size(), 1u);
    const Pass1Word& w = tl.pass1_words[rep->span[0]];
    EXPECT_TRUE(w.replaced);
    EXPECT_GE(rep->time_ms - w.emit_ms, latency_ms(n, tl.clock));
    EXPECT_DOUBLE_EQ(replacement_rate(tl), 0.2);
    EXPECT_EQ(tl.final_words, (WordSeq{1, 4, 3, 5, 0}));
    EXPECT_EQ(tl.pass1_final, (WordSeq{1, 4, 2, 5, 0}));
  }
}

TEST(TwoPass, OneInTenReplaced) {
  const NGramLM lm = flat_lm(kLex);
  const WordSeq a = {0, 1, 2, 3, 4, 5, 0, 1, 2, 3};
  WordSeq b = a;
  b[6] = 4;
  const DecodeTimeline tl = simulate_two_pass(aligned_scores(kLex, fixture_alignment(kLex, a)),
                                              aligned_scores(kLex, fixture_alignment(kLex, b)), 4, kLex, lm,
                                              config());
  EXPECT_DOUBLE_EQ(replacement_rate(tl), 0.1);
  EXPECT_EQ(perceived_latency(tl).words, 10u);
}

TEST(TwoPass, EverythingReplaced) {
  const NGramLM lm = flat_lm(kLex);
  const DecodeTimeline tl = simulate_two_pass(aligned_scores(kLex, fixture_alignment(kLex, {0, 1, 2})),
                                              aligned_scores(kLex, fixture_alignment(kLex, {3, 4, 5})), 2,
                                              kLex, lm, config());
  EXPECT_EQ(replacement_rate(tl), 1.0);
}

TEST(TwoPass, PerceivedLatencyArithmetic) {
  DecodeTimeline tl;
  for (int i = 0; i < 10; ++i) tl.pass1_words.push_back(Pass1Word{i, 0, 100.0 * i});
  tl.pass1_words[3].replaced = true;
  tl.pass1_words[3].replaced_ms = 300.0 + 240.0;
  const DelaySummary d = perceived_latency(tl);
  EXPECT_DOUBLE_EQ(d.mean_ms, 24.0);
  EXPECT_EQ(d.max_ms, 240.0);
  EXPECT_EQ(d.median_ms, 0.0);
  EXPECT_DOUBLE_EQ(replacement_rate(tl), 0.1);
  // Superseded words never reached the screen and are left out.
  tl.pass1_words[0].superseded = true;
  EXPECT_DOUBLE_EQ(replacement_rate(tl), 1.0 / 9.0);
  EXPECT_EQ(perceived_latency(tl).words, 9u);
  EXPECT_EQ(perceived_latency(DecodeTimeline{}).mean_ms, 0.0);
  EXPECT_EQ(replacement_rate(DecodeTimeline{}), 0.0);
}

// Noisy score pairs where the passes disagree now and then.
struct Fixture {
  Tensor s1, s2;
};
Fixture random_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, static_cast<int>(kLex.num_words) - 1);
  WordSeq words(3 + seed % 5);
  for (int& w : words) w = word(rng);
  const std::vector<int> a = fixture_alignment(kLex, words, 2 + seed % 2);
  return {aligned_scores(kLex, a, -2.0, 1.5, seed * 2 + 1),
          aligned_scores(kLex, a, -3.0, 0.8, seed * 2 + 2)};
}

TEST(TwoPass, TimingContract) {
  const NGramLM lm = flat_lm(kLex);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Fixture f = random_fixture(seed);
    const std::size_t n = seed % 7;
    const DecodeTimeline tl = simulate_two_pass(f.s1, f.s2, n, kLex, lm, config());
    const std::size_t T = tl.num_frames;
    const double eff = tl.clock.effective_ms();
    for (std::size_t i = 1; i < tl.events.size(); ++i)
      EXPECT_LE(tl.events[i - 1].time_ms, tl.events[i].time_ms);
    for (const TimelineEvent& e : tl.events) {
      // Frame t arrives at (t + 1) * eff; pass 2 waits for frame t + N.
      const std::size_t needed = e.pass == 1 ? e.frame : std::min(e.frame + n, T - 1);
      EXPECT_GE(e.time_ms, static_cast<double>(needed + 1) * eff);
    }
    const double rate = replacement_rate(tl);
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
    EXPECT_EQ(tl.final_words, word_ids(decode(f.s2, kLex, lm, config().decoder).words));
  }
}

TEST(TwoPass, PerceivedLatencyBound) {
  // Every correction lands N frames plus the second decoder's own
  // agreement lag after the emission it corrects.
  const NGramLM lm = flat_lm(kLex);
  std::size_t replaced = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Fixture f = random_fixture(seed);
    const std::size_t n = seed % 5;
    const DecodeTimeline tl = simulate_two_pass(f.s1, f.s2, n, kLex, lm, config());
    const double eff = tl.clock.effective_ms();
    std::vector<std::size_t> emit_frame(tl.pass1_words.size(), 0);
    double lag = 0.0;
    for (const TimelineEvent& e : tl.events)
      if (e.kind == EventKind::kEmit) emit_frame[e.span[0]] = e.frame;
    for (const TimelineEvent& e : tl.events)
      if (e.kind == EventKind::kReplace) {
        const double frames =
            static_cast<double>(e.frame) - static_cast<double>(emit_frame[e.span[0]]);
        lag = std::max(lag, frames * eff);
        ++replaced;
      }
    const DelaySummary d = perceived_latency(tl);
    EXPECT_LE(d.mean_ms, latency_ms(n, tl.clock) + lag + 1e-9) << seed;
    EXPECT_LE(d.max_ms, latency_ms(n, tl.clock) + lag + 1e-9) << seed;
  }
  EXPECT_GT(replaced, 0u);  // the fixtures do disagree
}

TEST(TwoPass, LookaheadOnlyMovesTiming) {
  const NGramLM lm = flat_lm(kLex);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = random_fixture(seed);
    auto pass2_words = [](const DecodeTimeline& tl) {
      WordSeq out;
      for (const TimelineEvent& e : tl.events)
        if (e.pass == 2 && e.kind != EventKind::kFinal)
          out.insert(out.end(), e.new_words.begin(), e.new_words.end());
      return out;
    };
    const DecodeTimeline base = simulate_two_pass(f.s1, f.s2, 0, kLex, lm, config());
    double prev_end = base.events.back().time_ms;
    for (std::size_t n : {1, 4, 9, 30}) {
      const DecodeTimeline tl = simulate_two_pass(f.s1, f.s2, n, kLex, lm, config());
      EXPECT_EQ(tl.final_words, base.final_words);
      EXPECT_EQ(pass2_words(tl).size() >= base.final_words.size(), true);
      const double end = tl.events.back().time_ms;
      EXPECT_GE(end, prev_end);
      prev_end = end;
    }
  }
}

TEST(TwoPass, CostHookShiftsTime) {
  const NGramLM lm = flat_lm(kLex);
  const Tensor s = aligned_scores(kLex, fixture_alignment(kLex, {2, 3}));
  TwoPassConfig c = config();
  const DecodeTimeline free = simulate_two_pass(s, s, 2, kLex, lm, c);
  c.cost = [](int pass, std::size_t) { return pass == 2 ? 30.0 : 0.0; };
  const DecodeTimeline slow = simulate_two_pass(s, s, 2, kLex, lm, c);
  EXPECT_GT(slow.events.back().time_ms, free.events.back().time_ms);
  EXPECT_EQ(slow.final_words, free.final_words);
  c.cost = [](int, std::size_t) { return -1.0; };
  EXPECT_THROW(simulate_two_pass(s, s, 2, kLex, lm, c), ConfigError);
}

TEST(TwoPass, RejectsEmptyStream) {
  const NGramLM lm = flat_lm(kLex);
  const Tensor empty;  // extents must be positive, so no [0 x S] matrix exists
  EXPECT_THROW(simulate_two_pass(empty, empty, 1, kLex, lm, config()), ShapeError);
}

TEST(TwoPass, ExportIsStable) {
  const NGramLM lm = flat_lm(kLex);
  const Fixture f = random_fixture(3);
  const DecodeTimeline a = simulate_two_pass(f.s1, f.s2, 3, kLex, lm, config());
  const DecodeTimeline b = simulate_two_pass(f.s1, f.s2, 3, kLex, lm, config());
  EXPECT_EQ(timeline_jsonl(a), timeline_jsonl(b));
  EXPECT_EQ(timeline_digest(a), timeline_digest(b));
  const std::string text = timeline_jsonl(a);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), a.events.size());
  EXPECT_NE(report_json(latency_report(a)).find("\"replacement_rate\""), std::string::npos);
}

// ---- with a model -------------------------------------------------------------------

struct ModelCase {
  TwoHeadModel model;
  Corpus corpus;
};

ModelCase model_case(std::size_t tau) {
  ModelConfig mc;
  mc.variant = Variant::kCltLstm;
  mc.num_layers = 2;
  mc.hidden_dim = 8;
  mc.proj_dim = 4;
  mc.input_dim = 8;
  mc.num_senones = 61;
  mc.tau = tau;
  ToyTaskSpec spec;
  spec.max_words = 4;
  return {build_second_head(LayerTrajectoryModel::random(mc, 3, 0.5), 4, 0.5),
          generate_corpus(spec, 6)};
}

TEST(TwoPassModel, FinalEqualsStandaloneSecondPass) {
  const ToyTaskSpec spec;
  const Lexicon lex = spec.lexicon();
  for (std::size_t tau : {1, 2}) {
    ModelCase mc = model_case(tau);
    const NGramLM lm = train_ngram(transcripts(mc.corpus, {0, 1, 2, 3, 4, 5}), 2, lex.num_words, 0.5);
    for (const Utterance& u : mc.corpus.utterances) {
      const DecodeTimeline tl = two_pass_decode(mc.model, u.features, lex, lm, config());
      EXPECT_EQ(tl.final_words, standalone_second_pass(mc.model, u.features, lex, lm, config()));
      EXPECT_EQ(tl.time_stack_evaluations, u.features.rows());
      EXPECT_EQ(tl.lookahead, 2 * tau);
    }
  }
}

TEST(TwoPassModel, ClonedHeadsNeverReplace) {
  const ToyTaskSpec spec;
  const Lexicon lex = spec.lexicon();
  ModelCase mc = model_case(1);
  mc.model.head_clt = mc.model.head_lt;
  mc.model.config = mc.model.lt_config();
  const NGramLM lm = train_ngram(transcripts(mc.corpus, {0, 1, 2}), 2, lex.num_words, 0.5);
  for (const Utterance& u : mc.corpus.utterances) {
    const DecodeTimeline tl = two_pass_decode(mc.model, u.features, lex, lm, config());
    EXPECT_EQ(tl.lookahead, 0u);
    EXPECT_EQ(replacement_events(tl), 0u);
    EXPECT_EQ(count(tl, EventKind::kInsert), 0u);
    EXPECT_EQ(tl.final_words, tl.pass1_final);
  }
}

}  // namespace
}  // namespace ltstream
