// ltstream/src/gradcheck.cc
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

#include "ltstream/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ltstream {

LossAndGrad value_and_grad(const LossFn& loss_fn, std::span<const Tensor> params) {
  Tape tape(true);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.param(p));
  Var loss = loss_fn(tape, vars);
  if (loss.size() != 1) {
    throw ShapeError("loss must be scalar, got shape " + shape_string(loss.value().shape()));
  }
  tape.backward(loss);
  LossAndGrad out;
  out.loss = loss.value()[0];
  out.grads.reserve(vars.size());
  for (const Var& v : vars) out.grads.push_back(tape.grad(v));
  return out;
}

std::vector<Tensor> grad(const LossFn& loss_fn, std::span<const Tensor> params) {
  return value_and_grad(loss_fn, params).grads;
}

double evaluate(const LossFn& loss_fn, std::span<const Tensor> params) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.constant_ref(p));
  Var loss = loss_fn(tape, vars);
  if (loss.size() != 1) {
    throw ShapeError("loss must be scalar, got shape " + shape_string(loss.value().shape()));
  }
  return loss.value()[0];
}

GradCheckReport finite_diff_check(const LossFn& loss_fn, std::span<const Tensor> params,
                                  std::span<const Tensor> analytic,
                                  const GradCheckOptions& opts) {
  if (!(opts.step > 0)) throw std::invalid_argument("finite_diff_check: step must be > 0");
  if (analytic.size() != params.size())
    throw std::invalid_argument("finite_diff_check: gradient count mismatch");

  std::vector<Tensor> work(params.begin(), params.end());
  std::mt19937_64 pick(opts.seed);
  GradCheckReport report;
  report.max_rel_dev.assign(params.size(), 0.0);

  for (std::size_t p = 0; p < work.size(); ++p) {
    expect_shape(analytic[p], work[p].shape(), "analytic gradient");
    std::vector<std::size_t> coords(work[p].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_tensor > 0 && coords.size() > opts.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), pick);
      coords.resize(opts.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double orig = work[p][i];
      work[p][i] = orig + opts.step;
      const double up = evaluate(loss_fn, work);
      work[p][i] = orig - opts.step;
      const double down = evaluate(loss_fn, work);
      work[p][i] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[p][i];
      const double diff = std::abs(a - numeric);
      report.max_abs_diff = std::max(report.max_abs_diff, diff);
      report.max_abs_grad = std::max(report.max_abs_grad, std::abs(a));
      double dev = 0.0;
      if (diff > opts.abs_floor) dev = diff / std::max(std::abs(a), std::abs(numeric));
      ++report.coords_checked;
      if (dev > report.max_rel_dev[p]) report.max_rel_dev[p] = dev;
      if (dev > report.worst) {
        report.worst = dev;
        report.worst_param = p;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.worst <= opts.tol;
  return report;
}

GradCheckReport finite_diff_check(const LossFn& loss_fn, std::span<const Tensor> params,
                                  const GradCheckOptions& opts) {
  std::vector<Tensor> analytic = grad(loss_fn, params);
  return finite_diff_check(loss_fn, params, analytic, opts);
}

}  // namespace ltstream
