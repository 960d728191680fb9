// ltstream/fixtures.h
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
// Seeded random instances: lattices, the diamond lattice, and tiny
// model/utterance/supervision bundles for finite-difference checks.

#ifndef LTSTREAM_FIXTURES_H_
#define LTSTREAM_FIXTURES_H_

#include <cstdint>
#include <vector>

#include "ltstream/criteria.h"
#include "ltstream/gradcheck.h"
#include "ltstream/lattice.h"
#include "ltstream/lexicon.h"
#include "ltstream/model.h"

namespace ltstream {

// Layered random lattice: `stages` columns of 1..width nodes, frames
// advancing 1..3 per column, arcs between consecutive columns plus the
// occasional skip arc. Every node lies on some complete path.
Lattice random_lattice(std::uint64_t seed, std::size_t stages, std::size_t width,
                       std::size_t num_senones);

// start -> {a, b} -> end, one frame per arc.
Lattice diamond(double a1, double a2, double b1, double b2);

// Frame alignment of `words`: `silence` silence frames on both sides and
// `per_state` frames per senone.
std::vector<int> fixture_alignment(const Lexicon& lexicon, const WordSeq& words,
                                   std::size_t per_state = 2, std::size_t silence = 2);

// Acoustic scores that prefer `alignment`: 0 on the aligned senone, `off`
// elsewhere, plus N(0, noise^2) on every entry when noise > 0.
Tensor aligned_scores(const Lexicon& lexicon, const std::vector<int>& alignment,
                      double off = -8.0, double noise = 0.0, std::uint64_t seed = 0);

// Tiny model + utterance + supervision for finite-difference checks.
struct GradInstance {
  LayerTrajectoryModel model;
  Tensor features;
  Lattice lattice;
  WordSeq words;
  std::vector<int> alignment;
  Tensor teacher;
  CriterionSettings settings;

  Supervision supervision() const {
    return Supervision{&alignment, &words, &lattice, &teacher};
  }
};

GradInstance grad_instance(std::uint64_t seed, Variant variant, Criterion criterion);

struct GradSuiteRow {
  Variant variant = Variant::kPlainLstm;
  Criterion criterion = Criterion::kCE;
  std::size_t instances = 0;
  std::size_t passed = 0;
  double worst = 0.0;          // largest relative deviation seen
  std::string worst_param;
  std::uint64_t worst_seed = 0;
  double max_abs_diff = 0.0;
  double max_abs_grad = 0.0;
};

// Every variant x criterion pair on seeds first_seed .. first_seed+seeds-1.
std::vector<GradSuiteRow> run_grad_suite(std::size_t seeds, const GradCheckOptions& options = {},
                                         std::uint64_t first_seed = 0);

}  // namespace ltstream

#endif  // LTSTREAM_FIXTURES_H_
