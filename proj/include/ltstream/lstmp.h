// ltstream/lstmp.h
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
// LSTM cell with a linear output projection and no peepholes.
//
// Gate rows of gate_weights are ordered input, forget, cell-candidate,
// output; each block has hidden_dim rows. Columns are [input ; recurrent]:
//
//   z = W [x ; r_prev] + b
//   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
//   c = f * c_prev + i * g
//   r = P (o * tanh(c))

#ifndef LTSTREAM_LSTMP_H_
#define LTSTREAM_LSTMP_H_

#include <cstddef>
#include <cstdint>
#include <random>

#include "ltstream/tape.h"
#include "ltstream/tensor.h"

namespace ltstream {

// Seeded source for parameter initialization and data generation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline constexpr double kInitRange = 0.05;
inline constexpr double kForgetBiasInit = 1.0;

struct LstmpParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t proj_dim = 0;
  Tensor gate_weights;  // [4*hidden x (input + proj)]
  Tensor gate_biases;   // [4*hidden]
  Tensor proj_weights;  // [proj x hidden]

  static LstmpParams zeros(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t proj_dim);
  // Uniform in [-range, range], forget-gate biases kForgetBiasInit.
  static LstmpParams random(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t proj_dim, Rng& rng, double range = kInitRange);
  static std::size_t count(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t proj_dim);

  void validate() const;
};

struct CellState {
  Tensor cell;    // [hidden]
  Tensor output;  // [proj]

  static CellState zeros(std::size_t hidden_dim, std::size_t proj_dim);
};

CellState lstmp_step(const LstmpParams& params, const CellState& prev,
                     const Tensor& input);

// Tape-level form shared by every model evaluation path.
struct BoundLstmp {
  Var gate_weights;
  Var gate_biases;
  Var proj_weights;
  std::size_t hidden_dim = 0;
};

struct BoundCell {
  Var cell;
  Var output;
};

BoundLstmp bind_constant(Tape& tape, const LstmpParams& params);
BoundCell lstmp_step(const BoundLstmp& params, const BoundCell& prev, Var input);

}  // namespace ltstream

#endif  // LTSTREAM_LSTMP_H_
