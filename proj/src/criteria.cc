// ltstream/src/criteria.cc
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

#include "ltstream/criteria.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ltstream/scoring.h"

namespace ltstream {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_matrix(const Tensor& m, const Lattice& lat, const char* what) {
  if (m.rank() != 2) throw ShapeError(std::string(what) + " must be a matrix");
  if (m.rows() != lat.num_frames)
    throw ShapeError(std::string(what) + " has " + std::to_string(m.rows()) +
                     " frames, lattice has " + std::to_string(lat.num_frames));
}

void add_path(Tensor& grad, const Lattice& lat, const LatticePath& path, double w) {
  for (std::size_t a : path.arcs) {
    const Arc& arc = lat.arcs[a];
    std::size_t t = lat.node_frame[arc.from];
    for (int s : arc.senones) grad.at(t++, s) += w;
  }
}

}  // namespace

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::kCE: return "CE";
    case Criterion::kMMI: return "MMI";
    case Criterion::kEMBR: return "EMBR";
    case Criterion::kSeqTS: return "SEQ_TS";
  }
  return "?";
}

Criterion parse_criterion(std::string_view name) {
  for (Criterion c : {Criterion::kCE, Criterion::kMMI, Criterion::kEMBR, Criterion::kSeqTS})
    if (name == to_string(c)) return c;
  throw CriterionError("unknown criterion '" + std::string(name) +
                       "' (expected CE, MMI, EMBR or SEQ_TS)");
}

// ---- score plumbing -----------------------------------------------------------

Tensor acoustic_score_from_log(const Tensor& log_posteriors, const Tensor& priors, double kappa) {
  if (log_posteriors.rank() != 2) throw ShapeError("log posteriors must be a matrix");
  expect_shape(priors, {log_posteriors.cols()}, "priors");
  std::vector<double> log_prior(priors.size());
  for (std::size_t s = 0; s < priors.size(); ++s) {
    if (!(priors[s] > 0))
      throw CriterionError("prior of senone " + std::to_string(s) + " is not positive");
    log_prior[s] = std::log(priors[s]);
  }
  Tensor out = log_posteriors;
  for (std::size_t t = 0; t < out.rows(); ++t)
    for (std::size_t s = 0; s < out.cols(); ++s)
      out.at(t, s) = kappa == 0.0 ? 0.0 : kappa * (out.at(t, s) - log_prior[s]);
  return out;
}

Tensor acoustic_score(const Tensor& posteriors, const Tensor& priors, double kappa) {
  Tensor logp = posteriors;
  for (double& v : logp.data()) v = std::log(v);
  return acoustic_score_from_log(logp, priors, kappa);
}

Tensor estimate_priors(const std::vector<std::vector<int>>& alignments, std::size_t num_senones) {
  if (num_senones == 0) throw ShapeError("num_senones must be >= 1");
  Tensor counts(Shape{num_senones}, 1.0);
  double total = static_cast<double>(num_senones);
  for (const auto& a : alignments)
    for (int s : a) {
      if (s < 0 || static_cast<std::size_t>(s) >= num_senones)
        throw CriterionError("alignment senone " + std::to_string(s) + " out of range");
      counts[s] += 1.0;
      total += 1.0;
    }
  for (double& v : counts.data()) v /= total;
  return counts;
}

Tensor uniform_priors(std::size_t num_senones) {
  return Tensor(Shape{num_senones}, 1.0 / static_cast<double>(num_senones));
}

Tensor log_posteriors(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("logits must be a matrix");
  Tensor out = logits;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    auto row = out.row(t);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (double& v : row) v -= lse;
  }
  return out;
}

Tensor posteriors(const Tensor& logits) {
  Tensor out = log_posteriors(logits);
  for (double& v : out.data()) v = std::exp(v);
  return out;
}

void check_posteriors(const Tensor& p, double tol) {
  if (p.rank() != 2) throw ShapeError("posteriors must be a matrix");
  for (std::size_t t = 0; t < p.rows(); ++t) {
    double sum = 0.0;
    for (double v : p.row(t)) {
      if (!(v >= 0)) throw CriterionError("negative posterior in row " + std::to_string(t));
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol)
      throw CriterionError("posterior row " + std::to_string(t) + " sums to " +
                           std::to_string(sum));
  }
}

// ---- criteria --------------------------------------------------------------------

SequenceLoss mmi(const Tensor& scores, const Lattice& den, const WordSeq& words,
                 const std::vector<int>& alignment) {
  check_matrix(scores, den, "scores");
  if (alignment.size() != den.num_frames)
    throw CriterionError("alignment length " + std::to_string(alignment.size()) +
                         " differs from frame count " + std::to_string(den.num_frames));
  for (int s : alignment)
    if (s < 0 || static_cast<std::size_t>(s) >= scores.cols())
      throw CriterionError("alignment senone " + std::to_string(s) + " outside score matrix");
  Lattice lat = rescore(den, scores);
  ForwardBackward fb = forward_backward(lat, scores.cols());
  LatticePath num = find_aligned_path(lat, words, alignment);
  SequenceLoss out;
  out.value = fb.total - num.score;
  out.grad = fb.occupancy;
  for (std::size_t t = 0; t < alignment.size(); ++t) out.grad.at(t, alignment[t]) -= 1.0;
  return out;
}

EmbrLoss embr(std::span<const double> hyp_scores, std::span<const double> risks) {
  if (hyp_scores.empty()) throw CriterionError("empty n-best list");
  if (hyp_scores.size() != risks.size()) throw CriterionError("one risk per hypothesis required");
  const double mx = *std::max_element(hyp_scores.begin(), hyp_scores.end());
  if (!std::isfinite(mx)) throw CriterionError("hypothesis scores must be finite");
  std::vector<double> p(hyp_scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(hyp_scores[i] - mx);
  EmbrLoss out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] /= z;
    out.value += p[i] * risks[i];
  }
  out.grad.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out.grad[i] = p[i] * (risks[i] - out.value);
  return out;
}

SequenceLoss embr(const Tensor& scores, const Lattice& lat, const WordSeq& ref,
                  std::size_t nbest_size) {
  check_matrix(scores, lat, "scores");
  if (nbest_size == 0) throw CriterionError("n-best size must be >= 1");
  Lattice r = rescore(lat, scores);
  std::vector<LatticePath> hyps = nbest(r, nbest_size);
  std::vector<double> h, risk;
  for (const LatticePath& p : hyps) {
    h.push_back(p.score);
    risk.push_back(static_cast<double>(edit_distance(path_words(r, p), ref)));
  }
  EmbrLoss e = embr(h, risk);
  SequenceLoss out;
  out.value = e.value;
  out.grad = Tensor(Shape{scores.rows(), scores.cols()});
  for (std::size_t i = 0; i < hyps.size(); ++i) add_path(out.grad, r, hyps[i], e.grad[i]);
  return out;
}

SequenceLoss seq_ts(const Tensor& student_scores, const Tensor& teacher_scores,
                    const Lattice& lat) {
  check_matrix(student_scores, lat, "student scores");
  check_matrix(teacher_scores, lat, "teacher scores");
  if (student_scores.cols() != teacher_scores.cols())
    throw ShapeError("student and teacher senone counts differ");
  Lattice ls = rescore(lat, student_scores);
  Lattice lt = rescore(lat, teacher_scores);
  ForwardBackward fs = forward_backward(ls, student_scores.cols());
  ForwardBackward ft = forward_backward(lt, teacher_scores.cols());
  SequenceLoss out;
  out.value = fs.total;
  for (std::size_t a = 0; a < lat.arcs.size(); ++a)
    if (ft.arc_posterior[a] > 0) out.value -= ft.arc_posterior[a] * ls.arcs[a].score();
  out.grad = fs.occupancy;
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] -= ft.occupancy[i];
  return out;
}

double lattice_entropy(const Tensor& scores, const Lattice& lat) {
  check_matrix(scores, lat, "scores");
  Lattice r = rescore(lat, scores);
  ForwardBackward fb = forward_backward(r, scores.cols());
  double h = fb.total;
  for (std::size_t a = 0; a < r.arcs.size(); ++a)
    if (fb.arc_posterior[a] > 0) h -= fb.arc_posterior[a] * r.arcs[a].score();
  return h;
}

void check_weights(std::span<const double> weights) {
  if (weights.empty()) throw CriterionError("ensemble needs at least one weight");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0)) throw CriterionError("ensemble weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw CriterionError("ensemble weights sum to " + std::to_string(sum) + ", expected 1");
}

Tensor frame_combine(std::span<const Tensor> teacher_posteriors, std::span<const double> weights) {
  check_weights(weights);
  if (teacher_posteriors.size() != weights.size())
    throw CriterionError("one weight per teacher required");
  Tensor out = Tensor::zeros_like(teacher_posteriors[0]);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    expect_shape(teacher_posteriors[k], teacher_posteriors[0].shape(), "teacher posteriors");
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += weights[k] * teacher_posteriors[k][i];
  }
  return out;
}

std::vector<HypPosterior> hyp_combine(const Lattice& lat, std::span<const Tensor> teacher_scores,
                                      std::span<const double> weights, std::size_t cap) {
  check_weights(weights);
  if (teacher_scores.size() != weights.size())
    throw CriterionError("one weight per teacher required");
  std::vector<LatticePath> paths = enumerate_paths(lat, cap);
  std::vector<HypPosterior> out(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    out[i].path = paths[i];
    out[i].words = path_words(lat, paths[i]);
  }
  for (std::size_t k = 0; k < weights.size(); ++k) {
    check_matrix(teacher_scores[k], lat, "teacher scores");
    Lattice r = rescore(lat, teacher_scores[k]);
    std::vector<double> score(paths.size());
    double total = kNegInf;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      double s = 0.0;
      for (std::size_t a : paths[i].arcs) s += r.arcs[a].score();
      score[i] = s;
      total = log_add(total, s);
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const double p = std::exp(score[i] - total);
      out[i].per_teacher.push_back(p);
      out[i].combined += weights[k] * p;
    }
  }
  return out;
}

// ---- tape-level ----------------------------------------------------------------

VarSeq log_posteriors(const VarSeq& logits) {
  VarSeq out;
  out.reserve(logits.size());
  for (const Var& v : logits) out.push_back(log_softmax(v));
  return out;
}

Var ce_loss(const VarSeq& logits, const std::vector<int>& alignment) {
  if (logits.empty()) throw CriterionError("ce_loss: no frames");
  if (alignment.size() != logits.size())
    throw CriterionError("alignment length " + std::to_string(alignment.size()) +
                         " differs from frame count " + std::to_string(logits.size()));
  VarSeq terms;
  terms.reserve(logits.size());
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (alignment[t] < 0 || static_cast<std::size_t>(alignment[t]) >= logits[t].size())
      throw CriterionError("alignment senone " + std::to_string(alignment[t]) + " out of range");
    terms.push_back(pick(log_softmax(logits[t]), static_cast<std::size_t>(alignment[t])));
  }
  return scale(add_scalars(terms), -1.0 / static_cast<double>(logits.size()));
}

Var sequence_node(Tape& tape, const VarSeq& log_post, const SequenceLoss& loss, double kappa) {
  if (loss.grad.rank() != 2 || loss.grad.rows() != log_post.size())
    throw ShapeError("sequence gradient does not match the frame count");
  std::vector<std::size_t> ids;
  ids.reserve(log_post.size());
  for (const Var& v : log_post) ids.push_back(v.id());
  Tensor g = loss.grad;
  return tape.push(Tensor::vector({loss.value}), log_post,
                   [ids, g = std::move(g), kappa](Tape& t, std::size_t self) {
                     const double og = t.out_grad(self)[0] * kappa;
                     std::vector<double> delta(g.cols());
                     for (std::size_t r = 0; r < ids.size(); ++r) {
                       if (!t.requires_grad(ids[r])) continue;
                       auto row = g.row(r);
                       for (std::size_t s = 0; s < delta.size(); ++s) delta[s] = og * row[s];
                       t.accumulate(ids[r], delta);
                     }
                   });
}

Var criterion_loss(Tape& tape, const VarSeq& logits, const Supervision& sup,
                   const CriterionSettings& settings) {
  auto need = [&](const void* p, const char* what) {
    if (!p)
      throw CriterionError(std::string(to_string(settings.criterion)) + " needs " + what);
  };
  if (settings.criterion == Criterion::kCE) {
    need(sup.alignment, "an alignment");
    return ce_loss(logits, *sup.alignment);
  }
  need(sup.lattice, "a lattice");
  VarSeq log_post = log_posteriors(logits);
  Tensor scores = acoustic_score_from_log(stack_rows(log_post), settings.priors, settings.kappa);
  SequenceLoss loss;
  switch (settings.criterion) {
    case Criterion::kMMI:
      need(sup.alignment, "an alignment");
      need(sup.words, "reference words");
      loss = mmi(scores, *sup.lattice, *sup.words, *sup.alignment);
      break;
    case Criterion::kEMBR:
      need(sup.words, "reference words");
      loss = embr(scores, *sup.lattice, *sup.words, settings.nbest);
      break;
    case Criterion::kSeqTS: {
      need(sup.teacher_posteriors, "teacher posteriors");
      Tensor teacher = acoustic_score(*sup.teacher_posteriors, settings.priors, settings.kappa);
      loss = seq_ts(scores, teacher, *sup.lattice);
      break;
    }
    default:
      break;
  }
  return sequence_node(tape, log_post, loss, settings.kappa);
}

LossFn model_loss_fn(const LayerTrajectoryModel& model, const Tensor& features,
                     const Supervision& sup, const CriterionSettings& settings) {
  return [&model, &features, sup, &settings](Tape& tape, std::span<const Var> vars) {
    BoundModel bound = bind_vars(model, vars);
    return criterion_loss(tape, forward(bound, tape, features), sup, settings);
  };
}

double model_loss(const LayerTrajectoryModel& model, const Tensor& features,
                  const Supervision& sup, const CriterionSettings& settings) {
  std::vector<Tensor> params = flatten(model);
  return evaluate(model_loss_fn(model, features, sup, settings), params);
}

LossAndGrad model_loss_and_grad(const LayerTrajectoryModel& model, const Tensor& features,
                                const Supervision& sup, const CriterionSettings& settings) {
  std::vector<Tensor> params = flatten(model);
  return value_and_grad(model_loss_fn(model, features, sup, settings), params);
}

}  // namespace ltstream
