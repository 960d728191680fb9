// ltstream/criteria.h
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
// Training criteria. Sequence criteria work on a [T x senones] matrix of
// acoustic scores kappa * (log posterior - log prior) and return their
// gradient with respect to it; sequence_node() hangs such a result onto a
// tape so it flows back into the model.

#ifndef LTSTREAM_CRITERIA_H_
#define LTSTREAM_CRITERIA_H_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ltstream/gradcheck.h"
#include "ltstream/lattice.h"
#include "ltstream/model.h"
#include "ltstream/tape.h"

namespace ltstream {

class CriterionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Criterion { kCE, kMMI, kEMBR, kSeqTS };
std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view name);

// ---- score plumbing -----------------------------------------------------------

// score(t, s) = kappa * (log posterior(t, s) - log prior(s)).
Tensor acoustic_score(const Tensor& posteriors, const Tensor& priors, double kappa = 1.0);
Tensor acoustic_score_from_log(const Tensor& log_posteriors, const Tensor& priors,
                               double kappa = 1.0);
// Add-one smoothed senone frequencies over a set of alignments.
Tensor estimate_priors(const std::vector<std::vector<int>>& alignments, std::size_t num_senones);
Tensor uniform_priors(std::size_t num_senones);
// Row-wise softmax / log-softmax of a logit matrix.
Tensor posteriors(const Tensor& logits);
Tensor log_posteriors(const Tensor& logits);
void check_posteriors(const Tensor& posteriors, double tol = 1e-9);

// ---- criteria on score matrices ------------------------------------------------

struct SequenceLoss {
  double value = 0.0;
  Tensor grad;  // d value / d scores, [T x senones]
};

// Denominator total minus numerator path score; the numerator is the best
// lattice path with exactly these words and frame senones.
SequenceLoss mmi(const Tensor& scores, const Lattice& den, const WordSeq& words,
                 const std::vector<int>& alignment);

struct EmbrLoss {
  double value = 0.0;
  std::vector<double> grad;  // per hypothesis score
};
// Expected risk under softmax(hyp_scores).
EmbrLoss embr(std::span<const double> hyp_scores, std::span<const double> risks);
// Same over the n best lattice paths, risk = word edit distance to `ref`.
SequenceLoss embr(const Tensor& scores, const Lattice& lat, const WordSeq& ref,
                  std::size_t nbest_size = 16);

// Cross entropy of the lattice path posterior under the student scores
// against the one under the teacher scores.
SequenceLoss seq_ts(const Tensor& student_scores, const Tensor& teacher_scores,
                    const Lattice& lat);
// Entropy of the lattice path posterior under `scores`.
double lattice_entropy(const Tensor& scores, const Lattice& lat);

void check_weights(std::span<const double> weights);
Tensor frame_combine(std::span<const Tensor> teacher_posteriors, std::span<const double> weights);

struct HypPosterior {
  LatticePath path;
  WordSeq words;
  std::vector<double> per_teacher;
  double combined = 0.0;
};
std::vector<HypPosterior> hyp_combine(const Lattice& lat, std::span<const Tensor> teacher_scores,
                                      std::span<const double> weights,
                                      std::size_t cap = kDefaultPathCap);

// ---- tape-level --------------------------------------------------------------

VarSeq log_posteriors(const VarSeq& logits);
// Mean over frames of -log P(alignment[t] | x_t).
Var ce_loss(const VarSeq& logits, const std::vector<int>& alignment);
// Scalar node with value loss.value whose gradient w.r.t. log_post[t] is
// kappa * loss.grad row t.
Var sequence_node(Tape& tape, const VarSeq& log_post, const SequenceLoss& loss, double kappa);

struct Supervision {
  const std::vector<int>* alignment = nullptr;
  const WordSeq* words = nullptr;
  const Lattice* lattice = nullptr;
  const Tensor* teacher_posteriors = nullptr;  // [T x senones], combined
};

struct CriterionSettings {
  Criterion criterion = Criterion::kCE;
  double kappa = 1.0;
  Tensor priors;  // required by the sequence criteria
  std::size_t nbest = 16;
};

Var criterion_loss(Tape& tape, const VarSeq& logits, const Supervision& sup,
                   const CriterionSettings& settings);

LossFn model_loss_fn(const LayerTrajectoryModel& model, const Tensor& features,
                     const Supervision& sup, const CriterionSettings& settings);
double model_loss(const LayerTrajectoryModel& model, const Tensor& features,
                  const Supervision& sup, const CriterionSettings& settings);
LossAndGrad model_loss_and_grad(const LayerTrajectoryModel& model, const Tensor& features,
                                const Supervision& sup, const CriterionSettings& settings);

}  // namespace ltstream

#endif  // LTSTREAM_CRITERIA_H_
