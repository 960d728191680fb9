// ltstream/tests/test_lattice.cc
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

#include <cmath>

#include "ltstream/lattice.h"
#include "ltstream/ngram.h"
#include "support.h"

namespace ltstream {
namespace {

using testing::diamond;
using testing::random_lattice;

// ---- n-gram LM --------------------------------------------------------------

void expect_normalized(const NGramLM& lm, const WordSeq& history) {
  double total = 0.0;
  for (int w = 0; w <= static_cast<int>(lm.vocab_size()); ++w)
    total += std::exp(lm.logprob(history, w));
  EXPECT_NEAR(total, 1.0, 1e-9) << "history size " << history.size();
}

TEST(NGram, NormalizedForEveryHistory) {
  const std::vector<WordSeq> corpus = {{0, 1, 2}, {2, 1, 0, 3}, {1, 1, 1}, {4}};
  for (std::size_t order = 1; order <= 4; ++order) {
    NGramLM lm = train_ngram(corpus, order, 6, 0.5);
    expect_normalized(lm, {});
    expect_normalized(lm, {lm.bos()});
    for (int a = 0; a < 6; ++a) {
      expect_normalized(lm, {a});
      for (int b = 0; b < 6; ++b) expect_normalized(lm, {a, b});
      expect_normalized(lm, {lm.bos(), a});
    }
  }
}

TEST(NGram, UnigramIsSmoothedFrequency) {
  NGramLM lm = train_ngram({{0, 0, 1}}, 1, 3, 0.5);
  // counts: 0 -> 2, 1 -> 1, 2 -> 0, </s> -> 1; total 4; K = 0.5 * 4 events.
  const double k = 0.5 * 4;
  EXPECT_NEAR(std::exp(lm.logprob({}, 0)), (2 + k * 0.25) / (4 + k), 1e-12);
  EXPECT_NEAR(std::exp(lm.logprob({}, 2)), (0 + k * 0.25) / (4 + k), 1e-12);
  EXPECT_NEAR(std::exp(lm.logprob({}, lm.eos())), (1 + k * 0.25) / (4 + k), 1e-12);
}

TEST(NGram, DeterministicBigram) {
  std::vector<WordSeq> corpus(20, WordSeq{0, 1, 0, 1, 0, 1, 0, 1});
  NGramLM lm = train_ngram(corpus, 2, 2, 0.01);
  EXPECT_GT(std::exp(lm.logprob({0}, 1)), 0.99);
  EXPECT_GT(std::exp(lm.logprob({lm.bos()}, 0)), 0.99);
}

TEST(NGram, HigherOrderNeverWorseOnTrainingText) {
  std::mt19937_64 rng(5);
  std::vector<WordSeq> corpus;
  for (int i = 0; i < 40; ++i) {
    WordSeq s;
    const int len = 2 + static_cast<int>(rng() % 6);
    for (int j = 0; j < len; ++j) s.push_back(static_cast<int>(rng() % 5));
    corpus.push_back(s);
  }
  double prev = 1e300;
  for (std::size_t order = 1; order <= 5; ++order) {
    const double ppl = perplexity(train_ngram(corpus, order, 5, 0.5), corpus);
    EXPECT_LE(ppl, prev + 1e-9) << "order " << order;
    prev = ppl;
  }
}

TEST(NGram, StatesCarryEnoughHistory) {
  const std::vector<WordSeq> corpus = {{0, 1, 2}, {2, 1, 0, 3}, {1, 1, 1}};
  NGramLM lm = train_ngram(corpus, 3, 4, 0.5);
  // Probabilities from the minimal state equal those from the full history.
  WordSeq full = {lm.bos()};
  WordSeq state = lm.start_state();
  for (int w : {1, 1, 0, 3, 2}) {
    for (int v = 0; v <= 4; ++v) EXPECT_DOUBLE_EQ(lm.logprob(full, v), lm.logprob(state, v));
    state = lm.next_state(state, w);
    full.push_back(w);
    EXPECT_LE(state.size(), 2u);
  }
}

TEST(NGram, TextRoundTrip) {
  NGramLM lm = train_ngram({{0, 1, 2}, {2, 1}}, 3, 3, 0.25);
  NGramLM back = lm_from_string(lm_to_string(lm));
  EXPECT_EQ(back.order(), 3u);
  ASSERT_EQ(back.entries().size(), lm.entries().size());
  for (const auto& [key, e] : lm.entries()) {
    const auto& f = back.entries().at(key);
    EXPECT_EQ(f.logprob, e.logprob);
    EXPECT_EQ(f.backoff, e.backoff);
  }
}

TEST(NGram, RejectsBadInput) {
  EXPECT_THROW(train_ngram({}, 2, 3), LmError);
  EXPECT_THROW(train_ngram({{0, 7}}, 2, 3), LmError);
  EXPECT_THROW(train_ngram({{0}}, 0, 3), LmError);
  EXPECT_THROW(lm_from_string("garbage"), LmError);
}

// ---- forward-backward and enumeration -----------------------------------------

TEST(Lattice, SinglePath) {
  Lattice lat;
  lat.node_frame = {0, 2, 3};
  lat.num_frames = 3;
  lat.arcs = {Arc{0, 1, 4, {1, 2}, -1.5, -0.25}, Arc{1, 2, -1, {0}, -0.5, 0.0}};
  validate(lat);
  ForwardBackward fb = forward_backward(lat, 3);
  EXPECT_DOUBLE_EQ(fb.total, -2.25);
  EXPECT_DOUBLE_EQ(fb.arc_posterior[0], 1.0);
  EXPECT_DOUBLE_EQ(fb.arc_posterior[1], 1.0);
  EXPECT_DOUBLE_EQ(fb.occupancy.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(fb.occupancy.at(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(fb.occupancy.at(2, 0), 1.0);
  EXPECT_EQ(enumerate_paths(lat).size(), 1u);
}

TEST(Lattice, ParallelArcsSplitEvenly) {
  Lattice lat;
  lat.node_frame = {0, 1};
  lat.num_frames = 1;
  lat.arcs = {Arc{0, 1, 0, {1}, -1.0, 0.0}, Arc{0, 1, 1, {2}, -1.0, 0.0}};
  ForwardBackward fb = forward_backward(lat, 3);
  EXPECT_NEAR(fb.arc_posterior[0], 0.5, 1e-15);
  EXPECT_NEAR(fb.arc_posterior[1], 0.5, 1e-15);
  EXPECT_NEAR(fb.total, -1.0 + std::log(2.0), 1e-15);
}

TEST(Lattice, PathCounts) {
  EXPECT_EQ(enumerate_paths(diamond(0, 0, 0, 0)).size(), 2u);
  // Three stages with two parallel arcs each.
  Lattice lat;
  lat.node_frame = {0, 1, 2, 3};
  lat.num_frames = 3;
  for (std::size_t s = 0; s < 3; ++s)
    for (int w = 0; w < 2; ++w) lat.arcs.push_back(Arc{s, s + 1, w, {w}, 0.1 * w, 0.0});
  EXPECT_EQ(count_paths(lat), 8.0);
  EXPECT_EQ(enumerate_paths(lat).size(), 8u);
  EXPECT_THROW(enumerate_paths(lat, 7), PathLimitError);
}

TEST(Lattice, ForwardBackwardMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Lattice lat = random_lattice(seed, 3 + seed % 6, 3, 5);
    validate(lat);
    ForwardBackward fb = forward_backward(lat, 5);
    auto paths = enumerate_paths(lat);
    ASSERT_EQ(static_cast<double>(paths.size()), count_paths(lat));
    double total = -INFINITY;
    for (const auto& p : paths) total = log_add(total, p.score);
    EXPECT_NEAR(fb.total, total, 1e-10) << "seed " << seed;

    std::vector<double> post(lat.arcs.size(), 0.0);
    double mass = 0.0;
    for (const auto& p : paths) {
      const double w = std::exp(p.score - total);
      mass += w;
      for (std::size_t a : p.arcs) post[a] += w;
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    for (std::size_t a = 0; a < post.size(); ++a) {
      EXPECT_NEAR(fb.arc_posterior[a], post[a], 1e-9) << "seed " << seed << " arc " << a;
      EXPECT_GE(fb.arc_posterior[a], 0.0);
      EXPECT_LE(fb.arc_posterior[a], 1.0 + 1e-12);
    }
    for (std::size_t t = 0; t < lat.num_frames; ++t) {
      double row = 0.0;
      for (std::size_t s = 0; s < 5; ++s) row += fb.occupancy.at(t, s);
      EXPECT_NEAR(row, 1.0, 1e-9) << "seed " << seed << " frame " << t;
    }
  }
}

TEST(Lattice, NbestIsSortedPrefixOfEnumeration) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    Lattice lat = random_lattice(seed, 6, 3, 4);
    auto all = enumerate_paths(lat);
    std::sort(all.begin(), all.end(),
              [](const LatticePath& a, const LatticePath& b) { return a.score > b.score; });
    auto top = nbest(lat, 5);
    ASSERT_EQ(top.size(), std::min<std::size_t>(5, all.size()));
    for (std::size_t i = 0; i < top.size(); ++i) EXPECT_NEAR(top[i].score, all[i].score, 1e-12);
  }
}

TEST(Lattice, ValidateDiagnoses) {
  Lattice cyc;
  cyc.node_frame = {0, 1, 1, 2};
  cyc.num_frames = 2;
  cyc.arcs = {Arc{0, 1, 0, {1}, 0, 0}, Arc{1, 2, -1, {}, 0, 0}, Arc{2, 1, -1, {}, 0, 0},
              Arc{2, 3, 0, {1}, 0, 0}};
  try {
    validate(cyc);
    FAIL() << "cycle accepted";
  } catch (const LatticeError& e) {
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos) << e.what();
  }

  Lattice dead = diamond(0, 0, 0, 0);
  dead.arcs.pop_back();  // node 2 can no longer reach the end
  try {
    validate(dead);
    FAIL() << "dead node accepted";
  } catch (const LatticeError& e) {
    EXPECT_NE(std::string(e.what()).find("dead"), std::string::npos) << e.what();
  }

  Lattice mismatch = diamond(0, 0, 0, 0);
  mismatch.arcs[0].senones = {1, 1};
  EXPECT_THROW(validate(mismatch), LatticeError);
  EXPECT_THROW(forward_backward(dead, 3), LatticeError);
}

TEST(Lattice, TextRoundTripIsLossless) {
  Lattice lat = random_lattice(7, 5, 3, 6);
  lat.arcs[0].ac = 0.1 + 1e-16;
  lat.arcs[1].lm = -1.0 / 3.0;
  Lattice back = lattice_from_string(lattice_to_string(lat));
  EXPECT_EQ(back, lat);
}

TEST(Lattice, RescoreReplacesAcousticOnly) {
  Lattice lat = diamond(-1, -2, -3, -4);
  lat.arcs[0].lm = -0.5;
  Tensor scores = Tensor::matrix(2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  Lattice r = rescore(lat, scores);
  EXPECT_DOUBLE_EQ(r.arcs[0].ac, 0.2);
  EXPECT_DOUBLE_EQ(r.arcs[0].lm, -0.5);
  EXPECT_DOUBLE_EQ(r.arcs[3].ac, 0.4);
  EXPECT_THROW(rescore(lat, Tensor::matrix(1, 3, {0, 0, 0})), LatticeError);
}

TEST(Lattice, FindAlignedPath) {
  Lattice lat = diamond(-1, -2, -3, -4);
  LatticePath p = find_aligned_path(lat, {1}, {2, 0});
  ASSERT_EQ(p.arcs.size(), 2u);
  EXPECT_EQ(p.arcs[0], 2u);
  EXPECT_DOUBLE_EQ(p.score, -7.0);
  EXPECT_THROW(find_aligned_path(lat, {1}, {1, 0}), LatticeError);
  EXPECT_THROW(find_aligned_path(lat, {0, 1}, {1, 0}), LatticeError);
}

}  // namespace
}  // namespace ltstream
