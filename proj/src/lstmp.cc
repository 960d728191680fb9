// ltstream/src/lstmp.cc
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

#include "ltstream/lstmp.h"

#include <string>

namespace ltstream {

LstmpParams LstmpParams::zeros(std::size_t input_dim, std::size_t hidden_dim,
                               std::size_t proj_dim) {
  if (input_dim == 0 || hidden_dim == 0 || proj_dim == 0)
    throw ShapeError("LSTMP dimensions must be >= 1");
  LstmpParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.proj_dim = proj_dim;
  p.gate_weights = Tensor(Shape{4 * hidden_dim, input_dim + proj_dim});
  p.gate_biases = Tensor(Shape{4 * hidden_dim});
  p.proj_weights = Tensor(Shape{proj_dim, hidden_dim});
  return p;
}

LstmpParams LstmpParams::random(std::size_t input_dim, std::size_t hidden_dim,
                                std::size_t proj_dim, Rng& rng, double range) {
  if (!(range > 0)) throw ShapeError("init range must be > 0");
  LstmpParams p = zeros(input_dim, hidden_dim, proj_dim);
  for (double& v : p.gate_weights.data()) v = rng.uniform(-range, range);
  for (std::size_t i = 0; i < p.gate_biases.size(); ++i) {
    p.gate_biases[i] = (i >= hidden_dim && i < 2 * hidden_dim)
                           ? kForgetBiasInit
                           : rng.uniform(-range, range);
  }
  for (double& v : p.proj_weights.data()) v = rng.uniform(-range, range);
  return p;
}

std::size_t LstmpParams::count(std::size_t input_dim, std::size_t hidden_dim,
                               std::size_t proj_dim) {
  return 4 * hidden_dim * (input_dim + proj_dim) + 4 * hidden_dim +
         proj_dim * hidden_dim;
}

void LstmpParams::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || proj_dim == 0)
    throw ShapeError("LSTMP dimensions must be >= 1");
  expect_shape(gate_weights, {4 * hidden_dim, input_dim + proj_dim}, "gate_weights");
  expect_shape(gate_biases, {4 * hidden_dim}, "gate_biases");
  expect_shape(proj_weights, {proj_dim, hidden_dim}, "proj_weights");
}

CellState CellState::zeros(std::size_t hidden_dim, std::size_t proj_dim) {
  return CellState{Tensor(Shape{hidden_dim}), Tensor(Shape{proj_dim})};
}

BoundLstmp bind_constant(Tape& tape, const LstmpParams& params) {
  return BoundLstmp{tape.constant_ref(params.gate_weights),
                    tape.constant_ref(params.gate_biases),
                    tape.constant_ref(params.proj_weights), params.hidden_dim};
}

BoundCell lstmp_step(const BoundLstmp& p, const BoundCell& prev, Var input) {
  const std::size_t h = p.hidden_dim;
  Var z = add(matvec(p.gate_weights, concat(input, prev.output)), p.gate_biases);
  Var in_gate = sigmoid(slice(z, 0, h));
  Var forget_gate = sigmoid(slice(z, h, h));
  Var candidate = tanh(slice(z, 2 * h, h));
  Var out_gate = sigmoid(slice(z, 3 * h, h));
  Var cell = add(mul(forget_gate, prev.cell), mul(in_gate, candidate));
  Var hidden = mul(out_gate, tanh(cell));
  return BoundCell{cell, matvec(p.proj_weights, hidden)};
}

CellState lstmp_step(const LstmpParams& params, const CellState& prev,
                     const Tensor& input) {
  params.validate();
  expect_shape(input, {params.input_dim}, "input");
  expect_shape(prev.cell, {params.hidden_dim}, "prev.cell");
  expect_shape(prev.output, {params.proj_dim}, "prev.output");
  Tape tape(false);
  BoundLstmp p = bind_constant(tape, params);
  BoundCell next = lstmp_step(
      p, BoundCell{tape.constant_ref(prev.cell), tape.constant_ref(prev.output)},
      tape.constant_ref(input));
  return CellState{next.cell.value(), next.output.value()};
}

}  // namespace ltstream
