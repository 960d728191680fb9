// ltstream/src/fixtures.cc
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

#include "ltstream/fixtures.h"

#include <cmath>
#include <random>

namespace ltstream {

Lattice random_lattice(std::uint64_t seed, std::size_t stages, std::size_t width,
                              std::size_t num_senones) {
  std::mt19937_64 rng(seed);
  auto uni = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 2.0);

  Lattice lat;
  std::vector<std::vector<std::size_t>> cols;
  std::vector<std::size_t> col_frame;
  cols.push_back({lat.add_node(0)});
  col_frame.push_back(0);
  std::size_t frame = 0;
  for (std::size_t s = 0; s < stages; ++s) {
    frame += uni(1, 3);
    std::vector<std::size_t> col;
    const std::size_t k = (s + 1 == stages) ? 1 : uni(1, width);
    for (std::size_t i = 0; i < k; ++i) col.push_back(lat.add_node(frame));
    cols.push_back(col);
    col_frame.push_back(frame);
  }
  lat.num_frames = frame;

  auto add_arc = [&](std::size_t from, std::size_t to) {
    Arc a;
    a.from = from;
    a.to = to;
    a.word = static_cast<int>(uni(0, 4)) - 1;
    for (std::size_t f = lat.node_frame[from]; f < lat.node_frame[to]; ++f)
      a.senones.push_back(static_cast<int>(uni(0, num_senones - 1)));
    a.ac = gauss(rng);
    a.lm = gauss(rng) * 0.5;
    lat.arcs.push_back(a);
  };
  for (std::size_t c = 0; c + 1 < cols.size(); ++c) {
    const auto& from = cols[c];
    const auto& to = cols[c + 1];
    // Each target gets one incoming arc, each source one outgoing arc.
    for (std::size_t j = 0; j < to.size(); ++j) add_arc(from[uni(0, from.size() - 1)], to[j]);
    for (std::size_t i = 0; i < from.size(); ++i) add_arc(from[i], to[uni(0, to.size() - 1)]);
    if (uni(0, 2) == 0) add_arc(from[uni(0, from.size() - 1)], to[uni(0, to.size() - 1)]);
    if (c + 2 < cols.size() && uni(0, 3) == 0)
      add_arc(from[uni(0, from.size() - 1)], cols[c + 2][uni(0, cols[c + 2].size() - 1)]);
  }
  return lat;
}

Lattice diamond(double a1, double a2, double b1, double b2) {
  Lattice lat;
  lat.node_frame = {0, 1, 1, 2};
  lat.num_frames = 2;
  lat.arcs = {Arc{0, 1, 0, {1}, a1, 0.0}, Arc{1, 3, -1, {0}, a2, 0.0},
              Arc{0, 2, 1, {2}, b1, 0.0}, Arc{2, 3, -1, {0}, b2, 0.0}};
  return lat;
}


std::vector<int> fixture_alignment(const Lexicon& lexicon, const WordSeq& words,
                                   std::size_t per_state, std::size_t silence) {
  std::vector<int> a(silence, Lexicon::kSilence);
  for (int w : words)
    for (int s : lexicon.pronunciation(w)) a.insert(a.end(), per_state, s);
  a.insert(a.end(), silence, Lexicon::kSilence);
  if (a.empty()) throw ShapeError("fixture alignment is empty");
  return a;
}

Tensor aligned_scores(const Lexicon& lexicon, const std::vector<int>& alignment, double off,
                      double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor s(Shape{alignment.size(), lexicon.num_senones()}, off);
  for (std::size_t t = 0; t < alignment.size(); ++t) {
    s.at(t, static_cast<std::size_t>(alignment[t])) = 0.0;
    if (noise > 0)
      for (std::size_t k = 0; k < lexicon.num_senones(); ++k) s.at(t, k) += noise * g(rng);
  }
  return s;
}

GradInstance grad_instance(std::uint64_t seed, Variant variant, Criterion criterion) {
  std::mt19937_64 rng(seed * 7919 + 13);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GradInstance g;
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_dim = 3;
  cfg.proj_dim = 2;
  cfg.input_dim = 3;
  cfg.num_senones = 5;
  cfg.variant = variant;
  cfg.tau = variant == Variant::kCltLstm ? 1 + seed % 2 : 0;
  cfg.learn_current_context = variant == Variant::kCltLstm && seed % 3 == 0;
  g.model = LayerTrajectoryModel::random(cfg, seed + 1);
  // Push the weights away from the tiny init range so gradients are not
  // all below the absolute floor.
  std::vector<Tensor> params = flatten(g.model);
  for (Tensor& t : params)
    for (double& v : t.data()) v = v * 10.0 + 0.1 * gauss(rng);
  unflatten(g.model, params);

  // Small lattice: few enough paths that the n-best list is the whole set.
  g.lattice = random_lattice(seed, 2 + seed % 3, 2, cfg.num_senones);
  const std::size_t T = g.lattice.num_frames;
  g.features = Tensor(Shape{T, cfg.input_dim});
  for (double& v : g.features.data()) v = gauss(rng);
  auto paths = enumerate_paths(g.lattice);
  const LatticePath& ref = paths[rng() % paths.size()];
  g.words = path_words(g.lattice, ref);
  g.alignment = path_senones(g.lattice, ref);
  Tensor logits(Shape{T, cfg.num_senones});
  for (double& v : logits.data()) v = 2.0 * gauss(rng);
  g.teacher = posteriors(logits);
  g.settings.criterion = criterion;
  g.settings.nbest = 64;
  Tensor pri(Shape{cfg.num_senones});
  double z = 0.0;
  for (double& v : pri.data()) z += v = 0.5 + std::abs(gauss(rng));
  for (double& v : pri.data()) v /= z;
  g.settings.priors = pri;
  g.settings.kappa = 0.5 + 0.5 * static_cast<double>(seed % 3);
  return g;
}

std::vector<GradSuiteRow> run_grad_suite(std::size_t seeds, const GradCheckOptions& options,
                                         std::uint64_t first_seed) {
  std::vector<GradSuiteRow> rows;
  for (Variant v : {Variant::kPlainLstm, Variant::kLtLstm, Variant::kCltLstm}) {
    for (Criterion c : {Criterion::kCE, Criterion::kMMI, Criterion::kEMBR, Criterion::kSeqTS}) {
      GradSuiteRow row;
      row.variant = v;
      row.criterion = c;
      for (std::uint64_t seed = first_seed; seed < first_seed + seeds; ++seed) {
        const GradInstance inst = grad_instance(seed, v, c);
        const LossFn fn =
            model_loss_fn(inst.model, inst.features, inst.supervision(), inst.settings);
        const std::vector<Tensor> params = flatten(inst.model);
        const GradCheckReport r = finite_diff_check(fn, params, options);
        ++row.instances;
        if (r.passed) ++row.passed;
        row.max_abs_diff = std::max(row.max_abs_diff, r.max_abs_diff);
        row.max_abs_grad = std::max(row.max_abs_grad, r.max_abs_grad);
        if (r.worst >= row.worst) {
          row.worst = r.worst;
          row.worst_param = param_names(inst.model)[r.worst_param];
          row.worst_seed = seed;
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace ltstream
