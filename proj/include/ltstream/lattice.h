// ltstream/lattice.h
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
// Time-aligned word lattices and log-semiring algorithms over them.
//
// Node ids are a topological order (every arc goes from a lower to a higher
// id); node 0 is the start and the last node is the end. An arc carries a
// word (-1 for silence or epsilon), one senone per frame it covers, and
// separate acoustic and LM log-scores. Path score = sum of ac + lm.

#ifndef LTSTREAM_LATTICE_H_
#define LTSTREAM_LATTICE_H_

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltstream/ngram.h"
#include "ltstream/tensor.h"

namespace ltstream {

class LatticeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PathLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  int word = -1;
  std::vector<int> senones;
  double ac = 0.0;
  double lm = 0.0;

  double score() const { return ac + lm; }
  bool operator==(const Arc&) const = default;
};

struct Lattice {
  std::vector<std::size_t> node_frame;
  std::vector<Arc> arcs;
  std::size_t num_frames = 0;

  std::size_t num_nodes() const { return node_frame.size(); }
  std::size_t start() const { return 0; }
  std::size_t end() const { return node_frame.size() - 1; }
  std::size_t add_node(std::size_t frame) {
    node_frame.push_back(frame);
    return node_frame.size() - 1;
  }
  bool operator==(const Lattice&) const = default;
};

// Throws LatticeError naming the problem: cycle, non-topological order,
// frame/alignment mismatch, or a dead (unreachable / non-coreachable) node.
void validate(const Lattice& lat);

double log_add(double a, double b);

struct ForwardBackward {
  double total = 0.0;
  std::vector<double> alpha;          // per node
  std::vector<double> beta;           // per node
  std::vector<double> arc_posterior;  // per arc
  Tensor occupancy;                   // [T x num_senones]
};

ForwardBackward forward_backward(const Lattice& lat, std::size_t num_senones);

struct LatticePath {
  std::vector<std::size_t> arcs;
  double score = 0.0;
};

inline constexpr std::size_t kDefaultPathCap = 100000;

double count_paths(const Lattice& lat);
std::vector<LatticePath> enumerate_paths(const Lattice& lat, std::size_t cap = kDefaultPathCap);
// Best n complete paths by score, best first (A* with an exact heuristic).
std::vector<LatticePath> nbest(const Lattice& lat, std::size_t n);

WordSeq path_words(const Lattice& lat, const LatticePath& path);
std::vector<int> path_senones(const Lattice& lat, const LatticePath& path);

// Sum of scores(frame, senone) along an alignment starting at `start`.
double alignment_score(const Tensor& scores, std::size_t start, const std::vector<int>& senones);
// Replaces every arc's acoustic score with the sum of `scores` over its
// alignment; LM scores are untouched.
Lattice rescore(const Lattice& lat, const Tensor& scores);

// Highest-scoring path whose words and frame senones equal the given ones.
// Throws LatticeError when no such path exists.
LatticePath find_aligned_path(const Lattice& lat, const WordSeq& words,
                              const std::vector<int>& alignment);

std::string lattice_to_string(const Lattice& lat);
Lattice lattice_from_string(const std::string& text);
void write_lattice(const std::filesystem::path& path, const Lattice& lat);
Lattice read_lattice(const std::filesystem::path& path);

}  // namespace ltstream

#endif  // LTSTREAM_LATTICE_H_
