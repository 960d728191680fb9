// ltstream/gradcheck.h
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

#ifndef LTSTREAM_GRADCHECK_H_
#define LTSTREAM_GRADCHECK_H_

#include <functional>
#include <span>
#include <vector>

#include "ltstream/tape.h"

namespace ltstream {

// A scalar-valued composition of tape operations over the given parameter
// vars (one per parameter tensor, in order).
using LossFn = std::function<Var(Tape&, std::span<const Var>)>;

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;  // one per parameter, same shapes
};

LossAndGrad value_and_grad(const LossFn& loss_fn, std::span<const Tensor> params);
std::vector<Tensor> grad(const LossFn& loss_fn, std::span<const Tensor> params);
double evaluate(const LossFn& loss_fn, std::span<const Tensor> params);

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;         // relative
  double abs_floor = 1e-7;   // |analytic - numeric| below this always passes
  std::size_t max_coords_per_tensor = 0;  // 0: every coordinate
  std::uint64_t seed = 0;    // picks coordinates when subsampling
};

struct GradCheckReport {
  std::vector<double> max_rel_dev;  // per parameter tensor
  double worst = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  double max_abs_diff = 0.0;
  double max_abs_grad = 0.0;
  bool passed = true;
};

// Central differences against `analytic`; lets callers inject a corrupted
// gradient as a negative control.
GradCheckReport finite_diff_check(const LossFn& loss_fn, std::span<const Tensor> params,
                                  std::span<const Tensor> analytic,
                                  const GradCheckOptions& opts = {});
GradCheckReport finite_diff_check(const LossFn& loss_fn, std::span<const Tensor> params,
                                  const GradCheckOptions& opts = {});

}  // namespace ltstream

#endif  // LTSTREAM_GRADCHECK_H_
