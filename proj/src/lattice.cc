// ltstream/src/lattice.cc
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

#include "ltstream/lattice.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

#include "ltstream/checkpoint.h"

namespace ltstream {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Index lists of arcs leaving / entering each node, in arc order.
struct Adjacency {
  std::vector<std::vector<std::size_t>> out, in;
  explicit Adjacency(const Lattice& lat) : out(lat.num_nodes()), in(lat.num_nodes()) {
    for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
      out[lat.arcs[i].from].push_back(i);
      in[lat.arcs[i].to].push_back(i);
    }
  }
};

bool has_cycle_from(std::size_t u, const Adjacency& adj, const Lattice& lat,
                    std::vector<int>& color, std::size_t& witness) {
  color[u] = 1;
  for (std::size_t a : adj.out[u]) {
    const std::size_t v = lat.arcs[a].to;
    if (color[v] == 1) {
      witness = v;
      return true;
    }
    if (color[v] == 0 && has_cycle_from(v, adj, lat, color, witness)) return true;
  }
  color[u] = 2;
  return false;
}

}  // namespace

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

void validate(const Lattice& lat) {
  const std::size_t n = lat.num_nodes();
  if (n < 2) throw LatticeError("lattice needs distinct start and end nodes");
  if (lat.node_frame[0] != 0) throw LatticeError("start node must be at frame 0");
  if (lat.node_frame[n - 1] != lat.num_frames)
    throw LatticeError("end node frame " + std::to_string(lat.node_frame[n - 1]) +
                       " differs from utterance length " + std::to_string(lat.num_frames));
  for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
    const Arc& a = lat.arcs[i];
    if (a.from >= n || a.to >= n)
      throw LatticeError("arc " + std::to_string(i) + " references a missing node");
    if (!std::isfinite(a.ac) || !std::isfinite(a.lm))
      throw LatticeError("arc " + std::to_string(i) + " has a non-finite score");
  }
  Adjacency adj(lat);
  for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
    const Arc& a = lat.arcs[i];
    if (a.from >= a.to) {
      std::vector<int> color(n, 0);
      std::size_t witness = 0;
      for (std::size_t u = 0; u < n; ++u)
        if (color[u] == 0 && has_cycle_from(u, adj, lat, color, witness))
          throw LatticeError("cycle through node " + std::to_string(witness));
      throw LatticeError("node ids are not a topological order at arc " + std::to_string(i) +
                         " (" + std::to_string(a.from) + " -> " + std::to_string(a.to) + ")");
    }
    if (lat.node_frame[a.to] < lat.node_frame[a.from] ||
        lat.node_frame[a.to] - lat.node_frame[a.from] != a.senones.size())
      throw LatticeError("arc " + std::to_string(i) + " covers " + std::to_string(a.senones.size()) +
                         " frames but joins frames " + std::to_string(lat.node_frame[a.from]) +
                         " and " + std::to_string(lat.node_frame[a.to]));
  }
  std::vector<char> fwd(n, 0), bwd(n, 0);
  fwd[0] = 1;
  for (std::size_t u = 0; u < n; ++u)
    if (fwd[u])
      for (std::size_t a : adj.out[u]) fwd[lat.arcs[a].to] = 1;
  bwd[n - 1] = 1;
  for (std::size_t u = n; u-- > 0;)
    if (bwd[u])
      for (std::size_t a : adj.in[u]) bwd[lat.arcs[a].from] = 1;
  for (std::size_t u = 0; u < n; ++u) {
    if (!fwd[u]) throw LatticeError("dead node " + std::to_string(u) + ": unreachable from start");
    if (!bwd[u]) throw LatticeError("dead node " + std::to_string(u) + ": cannot reach end");
  }
}

ForwardBackward forward_backward(const Lattice& lat, std::size_t num_senones) {
  validate(lat);
  const std::size_t n = lat.num_nodes();
  Adjacency adj(lat);
  ForwardBackward fb;
  fb.alpha.assign(n, kNegInf);
  fb.beta.assign(n, kNegInf);
  fb.alpha[0] = 0.0;
  for (std::size_t u = 1; u < n; ++u)
    for (std::size_t a : adj.in[u])
      fb.alpha[u] = log_add(fb.alpha[u], fb.alpha[lat.arcs[a].from] + lat.arcs[a].score());
  fb.beta[n - 1] = 0.0;
  for (std::size_t u = n - 1; u-- > 0;)
    for (std::size_t a : adj.out[u])
      fb.beta[u] = log_add(fb.beta[u], lat.arcs[a].score() + fb.beta[lat.arcs[a].to]);
  fb.total = fb.alpha[n - 1];
  fb.arc_posterior.resize(lat.arcs.size());
  if (lat.num_frames > 0) fb.occupancy = Tensor(Shape{lat.num_frames, num_senones});
  for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
    const Arc& a = lat.arcs[i];
    const double p = std::exp(fb.alpha[a.from] + a.score() + fb.beta[a.to] - fb.total);
    fb.arc_posterior[i] = p;
    const std::size_t t0 = lat.node_frame[a.from];
    for (std::size_t j = 0; j < a.senones.size(); ++j) {
      const int s = a.senones[j];
      if (s < 0 || static_cast<std::size_t>(s) >= num_senones)
        throw LatticeError("arc " + std::to_string(i) + " uses senone " + std::to_string(s) +
                           " outside [0, " + std::to_string(num_senones) + ")");
      fb.occupancy.at(t0 + j, static_cast<std::size_t>(s)) += p;
    }
  }
  return fb;
}

double count_paths(const Lattice& lat) {
  validate(lat);
  Adjacency adj(lat);
  std::vector<double> count(lat.num_nodes(), 0.0);
  count[0] = 1.0;
  for (std::size_t u = 1; u < lat.num_nodes(); ++u)
    for (std::size_t a : adj.in[u]) count[u] += count[lat.arcs[a].from];
  return count.back();
}

std::vector<LatticePath> enumerate_paths(const Lattice& lat, std::size_t cap) {
  const double n = count_paths(lat);
  if (n > static_cast<double>(cap))
    throw PathLimitError("lattice has " + format_double(n) + " paths, more than the cap of " +
                         std::to_string(cap));
  Adjacency adj(lat);
  std::vector<LatticePath> out;
  LatticePath cur;
  // Iterative DFS over (node, next outgoing index).
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::vector<double> partial{0.0};
  while (!stack.empty()) {
    auto& [u, k] = stack.back();
    if (u == lat.end()) {
      out.push_back(LatticePath{cur.arcs, partial.back()});
      stack.pop_back();
      partial.pop_back();
      if (!cur.arcs.empty()) cur.arcs.pop_back();
      continue;
    }
    if (k == adj.out[u].size()) {
      stack.pop_back();
      partial.pop_back();
      if (!cur.arcs.empty()) cur.arcs.pop_back();
      continue;
    }
    const std::size_t a = adj.out[u][k++];
    cur.arcs.push_back(a);
    partial.push_back(partial.back() + lat.arcs[a].score());
    stack.emplace_back(lat.arcs[a].to, 0);
  }
  return out;
}

std::vector<LatticePath> nbest(const Lattice& lat, std::size_t n) {
  validate(lat);
  Adjacency adj(lat);
  const std::size_t nodes = lat.num_nodes();
  std::vector<double> h(nodes, kNegInf);
  h[nodes - 1] = 0.0;
  for (std::size_t u = nodes - 1; u-- > 0;)
    for (std::size_t a : adj.out[u]) h[u] = std::max(h[u], lat.arcs[a].score() + h[lat.arcs[a].to]);

  struct Partial {
    std::size_t node;
    std::size_t arc;
    std::size_t parent;  // index into `partials`, npos for the root
    double g;
  };
  struct Item {
    double f;
    std::size_t id;
    bool operator<(const Item& o) const { return f != o.f ? f < o.f : id > o.id; }
  };
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<Partial> partials{{0, kNone, kNone, 0.0}};
  std::priority_queue<Item> queue;
  queue.push({h[0], 0});
  std::vector<LatticePath> out;
  while (!queue.empty() && out.size() < n) {
    const Item it = queue.top();
    queue.pop();
    const Partial p = partials[it.id];
    if (p.node == nodes - 1) {
      LatticePath path;
      path.score = p.g;
      for (std::size_t i = it.id; partials[i].arc != kNone; i = partials[i].parent)
        path.arcs.push_back(partials[i].arc);
      std::reverse(path.arcs.begin(), path.arcs.end());
      out.push_back(std::move(path));
      continue;
    }
    for (std::size_t a : adj.out[p.node]) {
      const double g = p.g + lat.arcs[a].score();
      partials.push_back({lat.arcs[a].to, a, it.id, g});
      queue.push({g + h[lat.arcs[a].to], partials.size() - 1});
    }
  }
  return out;
}

WordSeq path_words(const Lattice& lat, const LatticePath& path) {
  WordSeq out;
  for (std::size_t a : path.arcs)
    if (lat.arcs[a].word >= 0) out.push_back(lat.arcs[a].word);
  return out;
}

std::vector<int> path_senones(const Lattice& lat, const LatticePath& path) {
  std::vector<int> out;
  for (std::size_t a : path.arcs)
    out.insert(out.end(), lat.arcs[a].senones.begin(), lat.arcs[a].senones.end());
  return out;
}

double alignment_score(const Tensor& scores, std::size_t start, const std::vector<int>& senones) {
  if (senones.empty()) return 0.0;
  if (scores.rank() != 2 || start + senones.size() > scores.rows())
    throw LatticeError("alignment runs past the score matrix");
  double s = 0.0;
  for (std::size_t j = 0; j < senones.size(); ++j) {
    if (senones[j] < 0 || static_cast<std::size_t>(senones[j]) >= scores.cols())
      throw LatticeError("senone " + std::to_string(senones[j]) + " outside the score matrix");
    s += scores.at(start + j, static_cast<std::size_t>(senones[j]));
  }
  return s;
}

Lattice rescore(const Lattice& lat, const Tensor& scores) {
  if (scores.rank() != 2 || scores.rows() != lat.num_frames)
    throw LatticeError("score matrix has " + shape_string(scores.shape()) + ", lattice covers " +
                       std::to_string(lat.num_frames) + " frames");
  Lattice out = lat;
  for (Arc& a : out.arcs) a.ac = alignment_score(scores, lat.node_frame[a.from], a.senones);
  return out;
}

LatticePath find_aligned_path(const Lattice& lat, const WordSeq& words,
                              const std::vector<int>& alignment) {
  validate(lat);
  if (alignment.size() != lat.num_frames)
    throw LatticeError("alignment has " + std::to_string(alignment.size()) + " frames, lattice " +
                       std::to_string(lat.num_frames));
  Adjacency adj(lat);
  // best[node][k]: best score reaching node having matched k words.
  const std::size_t K = words.size() + 1;
  std::vector<std::vector<double>> best(lat.num_nodes(), std::vector<double>(K, kNegInf));
  std::vector<std::vector<std::size_t>> back(lat.num_nodes(), std::vector<std::size_t>(K));
  best[0][0] = 0.0;
  for (std::size_t u = 0; u < lat.num_nodes(); ++u) {
    for (std::size_t k = 0; k < K; ++k) {
      if (best[u][k] == kNegInf) continue;
      for (std::size_t ai : adj.out[u]) {
        const Arc& a = lat.arcs[ai];
        std::size_t k2 = k;
        if (a.word >= 0) {
          if (k >= words.size() || words[k] != a.word) continue;
          ++k2;
        }
        const std::size_t t0 = lat.node_frame[u];
        if (!std::equal(a.senones.begin(), a.senones.end(),
                        alignment.begin() + static_cast<std::ptrdiff_t>(t0)))
          continue;
        const double s = best[u][k] + a.score();
        if (s > best[a.to][k2]) {
          best[a.to][k2] = s;
          back[a.to][k2] = ai;
        }
      }
    }
  }
  if (best[lat.end()][K - 1] == kNegInf)
    throw LatticeError("reference path (" + std::to_string(words.size()) +
                       " words) is not contained in the lattice");
  LatticePath path;
  path.score = best[lat.end()][K - 1];
  std::size_t u = lat.end(), k = K - 1;
  while (u != 0) {
    const std::size_t ai = back[u][k];
    path.arcs.push_back(ai);
    if (lat.arcs[ai].word >= 0) --k;
    u = lat.arcs[ai].from;
  }
  std::reverse(path.arcs.begin(), path.arcs.end());
  return path;
}

std::string lattice_to_string(const Lattice& lat) {
  std::ostringstream out;
  out << lat.num_nodes() << ' ' << lat.arcs.size() << ' ' << lat.num_frames << '\n';
  for (std::size_t u = 0; u < lat.num_nodes(); ++u) out << u << ' ' << lat.node_frame[u] << '\n';
  for (const Arc& a : lat.arcs) {
    out << a.from << ' ' << a.to << ' ' << a.word << ' ';
    if (a.senones.empty()) {
      out << '-';
    } else {
      for (std::size_t j = 0; j < a.senones.size(); ++j) out << (j ? "," : "") << a.senones[j];
    }
    out << ' ' << format_double(a.ac) << ' ' << format_double(a.lm) << '\n';
  }
  return out.str();
}

Lattice lattice_from_string(const std::string& text) {
  std::istringstream in(text);
  std::size_t nodes = 0, arcs = 0;
  Lattice lat;
  if (!(in >> nodes >> arcs >> lat.num_frames)) throw LatticeError("bad lattice header");
  for (std::size_t i = 0; i < nodes; ++i) {
    std::size_t id = 0, frame = 0;
    if (!(in >> id >> frame) || id != i)
      throw LatticeError("bad node line " + std::to_string(i) + " (ids must be 0..n-1 in order)");
    lat.node_frame.push_back(frame);
  }
  for (std::size_t i = 0; i < arcs; ++i) {
    Arc a;
    std::string sen, ac, lm;
    if (!(in >> a.from >> a.to >> a.word >> sen >> ac >> lm))
      throw LatticeError("bad arc line " + std::to_string(i));
    if (sen != "-") {
      std::istringstream ss(sen);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          a.senones.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw LatticeError("bad senone list on arc " + std::to_string(i));
        }
      }
    }
    try {
      a.ac = parse_double(ac);
      a.lm = parse_double(lm);
    } catch (const FormatError& e) {
      throw LatticeError("arc " + std::to_string(i) + ": " + e.what());
    }
    lat.arcs.push_back(std::move(a));
  }
  std::string extra;
  if (in >> extra) throw LatticeError("trailing data after lattice");
  return lat;
}

void write_lattice(const std::filesystem::path& path, const Lattice& lat) {
  std::ofstream f(path);
  if (!f) throw LatticeError("cannot write '" + path.string() + "'");
  f << lattice_to_string(lat);
}

Lattice read_lattice(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LatticeError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return lattice_from_string(ss.str());
}

}  // namespace ltstream
