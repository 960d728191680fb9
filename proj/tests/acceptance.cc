// ltstream/tests/acceptance.cc
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
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails. argv[1] is a scratch directory for the recipe runs.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ltstream/fixtures.h"
#include "ltstream/recipe.h"
#include "ltstream/twopass.h"

namespace fs = std::filesystem;
using namespace ltstream;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Collects failure notes; the first few are kept for the summary line.
struct Notes {
  bool ok = true;
  std::vector<std::string> fails;
  void check(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (fails.size() < 3) fails.push_back(what);
  }
  Verdict verdict(const std::string& pass_detail) const {
    if (ok) return {true, pass_detail};
    std::string d;
    for (const auto& f : fails) d += (d.empty() ? "" : "; ") + f;
    return {false, d};
  }
};

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig production(Variant v, std::size_t tau) {
  ModelConfig c;
  c.variant = v;
  c.num_layers = 6;
  c.hidden_dim = 1024;
  c.proj_dim = 512;
  c.input_dim = 80;
  c.num_senones = 9404;
  c.tau = tau;
  return c;
}

// ---- 1, 2, 3 --------------------------------------------------------------------

Verdict latency_table() {
  Notes n;
  const FrameClock clock{10.0, 2};
  const std::vector<std::pair<ModelConfig, double>> rows = {
      {production(Variant::kPlainLstm, 0), 0},  {production(Variant::kLtLstm, 0), 0},
      {production(Variant::kCltLstm, 1), 120}, {production(Variant::kCltLstm, 2), 240},
      {production(Variant::kCltLstm, 4), 480}};
  std::string got;
  for (const auto& [c, want] : rows) {
    const double ms = latency_ms(lookahead_frames(c), clock);
    got += (got.empty() ? "" : "/") + num(ms);
    n.check(ms == want, "got " + num(ms) + " want " + num(want));
  }
  return n.verdict(got + " ms");
}

Verdict lookahead_arithmetic() {
  Notes n;
  std::string got;
  for (auto [tau, want] : {std::pair<std::size_t, std::size_t>{1, 6}, {2, 12}, {4, 24}}) {
    const std::size_t f = lookahead_frames(production(Variant::kCltLstm, tau));
    got += (got.empty() ? "" : "/") + std::to_string(f);
    n.check(f == want, "tau " + std::to_string(tau) + " gave " + std::to_string(f));
  }
  return n.verdict("frames " + got);
}

Verdict param_counts() {
  Notes n;
  ModelConfig plain = production(Variant::kPlainLstm, 0);
  const ModelConfig clt12 = production(Variant::kCltLstm, 2);
  const std::size_t output = plain.num_senones * plain.proj_dim + plain.num_senones;
  const std::size_t time_only = param_count(plain) - output;
  const std::vector<std::tuple<std::string, double, double>> rows = {
      {"LSTM", param_count(plain), 31e6},
      {"ltLSTM", param_count(production(Variant::kLtLstm, 0)), 57e6},
      {"cltLSTM-24", param_count(production(Variant::kCltLstm, 4)), 63e6},
      {"second head", static_cast<double>(param_count(clt12) - time_only), 34e6}};
  std::string d;
  for (const auto& [name, got, want] : rows) {
    const double dev = (got - want) / want;
    d += (d.empty() ? "" : ", ") + name + " " + num(got / 1e6, 4) + "M (" +
         num(100 * dev, 3) + "%)";
    n.check(std::abs(dev) <= 0.10, name + " off by " + num(100 * dev, 3) + "%");
  }
  return n.ok ? Verdict{true, d} : n.verdict(d);
}

// ---- 4 ----------------------------------------------------------------------------

Verdict gradient_suite() {
  Notes n;
  GradCheckOptions opt;  // step 1e-5, tol 1e-4 relative, 1e-7 absolute floor
  const auto rows = run_grad_suite(20, opt);
  double worst_abs = 0.0;
  std::size_t instances = 0;
  for (const GradSuiteRow& r : rows) {
    instances += r.instances;
    worst_abs = std::max(worst_abs, r.max_abs_diff);
    n.check(r.instances >= 20 && r.passed == r.instances,
            std::string(to_string(r.variant)) + "/" + std::string(to_string(r.criterion)) + " " +
                std::to_string(r.passed) + "/" + std::to_string(r.instances) + " worst " +
                num(r.worst) + " at " + r.worst_param);
  }
  return n.verdict(std::to_string(rows.size()) + " pairs, " + std::to_string(instances) +
                   " instances, max |analytic-numeric| " + num(worst_abs, 3));
}

// ---- 5 ----------------------------------------------------------------------------

Verdict lattice_oracles() {
  Notes n;
  constexpr std::size_t kSenones = 5;
  double worst_total = 0.0, worst_post = 0.0, max_paths = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Lattice lat = random_lattice(1000 + seed, 3 + seed % 7, 3, kSenones);
    const double count = count_paths(lat);
    max_paths = std::max(max_paths, count);
    n.check(count <= 1e5, "lattice " + std::to_string(seed) + " has " + num(count) + " paths");
    const ForwardBackward fb = forward_backward(lat, kSenones);
    const auto paths = enumerate_paths(lat);
    double total = -INFINITY;
    for (const auto& p : paths) total = log_add(total, p.score);
    worst_total = std::max(worst_total, std::abs(fb.total - total));
    std::vector<double> post(lat.arcs.size(), 0.0);
    for (const auto& p : paths)
      for (std::size_t a : p.arcs) post[a] += std::exp(p.score - total);
    for (std::size_t a = 0; a < post.size(); ++a)
      worst_post = std::max(worst_post, std::abs(fb.arc_posterior[a] - post[a]));
  }
  n.check(worst_total <= 1e-10, "total off by " + num(worst_total, 3));
  n.check(worst_post <= 1e-9, "arc posterior off by " + num(worst_post, 3));

  // Diamonds: cross entropy of path posteriors, summed by hand over both paths.
  std::mt19937_64 rng(55);
  std::normal_distribution<double> g(0.0, 1.5);
  double worst_ts = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Lattice lat = diamond(g(rng), g(rng), g(rng), g(rng));
    Tensor st(Shape{lat.num_frames, 3}), te(Shape{lat.num_frames, 3});
    for (double& v : st.data()) v = g(rng);
    for (double& v : te.data()) v = g(rng);
    const auto paths = enumerate_paths(lat);
    auto score = [&](const Tensor& m, const LatticePath& p) {
      const Lattice r = rescore(lat, m);
      double s = 0.0;
      for (std::size_t a : p.arcs) s += r.arcs[a].score();
      return s;
    };
    double zs = -INFINITY, zt = -INFINITY;
    for (const auto& p : paths) {
      zs = log_add(zs, score(st, p));
      zt = log_add(zt, score(te, p));
    }
    double expect = 0.0;
    for (const auto& p : paths) expect -= std::exp(score(te, p) - zt) * (score(st, p) - zs);
    worst_ts = std::max(worst_ts, std::abs(seq_ts(st, te, lat).value - expect));
  }
  n.check(worst_ts <= 1e-10, "seq_ts off by " + num(worst_ts, 3));
  return n.verdict("100 lattices (<= " + num(max_paths) + " paths): total " + num(worst_total, 3) +
                   ", arc posterior " + num(worst_post, 3) + "; 50 diamonds: seq_ts " +
                   num(worst_ts, 3));
}

// ---- 6 ----------------------------------------------------------------------------

Verdict combination_identities() {
  Notes n;
  const Tensor a = Tensor::matrix(1, 2, {0.8, 0.2});
  const Tensor b = Tensor::matrix(1, 2, {0.4, 0.6});
  const std::vector<Tensor> ab = {a, b}, aa = {a, a};
  const Tensor mix = frame_combine(ab, std::vector<double>{0.5, 0.5});
  n.check(std::abs(mix[0] - 0.6) < 1e-15 && std::abs(mix[1] - 0.4) < 1e-15, "even mix");
  n.check(frame_combine(ab, std::vector<double>{1.0, 0.0}) == a, "one-hot weights");
  const Tensor same = frame_combine(aa, std::vector<double>{0.3, 0.7});
  n.check(std::abs(same[0] - a[0]) < 1e-15 && std::abs(same[1] - a[1]) < 1e-15,
          "identical teachers");

  // Diamond: teacher 1 puts 0.75 on path A, teacher 2 is even.
  const Lattice dia = diamond(0, 0, 0, 0);
  const Tensor t1 = Tensor::matrix(2, 3, {0, std::log(3.0), 0, 0, 0, 0});
  const Tensor t2(Shape{2, 3});
  const auto table = hyp_combine(dia, std::vector<Tensor>{t1, t2}, std::vector<double>{0.5, 0.5});
  n.check(table.size() == 2, "diamond has two hypotheses");
  for (const auto& h : table) {
    const bool is_a = h.words == WordSeq{0};
    n.check(std::abs(h.combined - (is_a ? 0.625 : 0.375)) < 1e-12, "hyp_combine mixture");
  }

  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 3.0);
  double min_kl = INFINITY;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Lattice lat = random_lattice(5000 + seed, 2 + seed % 6, 3, 4);
    Tensor s(Shape{lat.num_frames, 4}), t(Shape{lat.num_frames, 4});
    for (double& v : s.data()) v = g(rng);
    for (double& v : t.data()) v = g(rng);
    min_kl = std::min(min_kl, seq_ts(s, t, lat).value - lattice_entropy(t, lat));
  }
  n.check(min_kl >= -1e-9, "KL went negative: " + num(min_kl));
  return n.verdict("frame_combine 3/3, hyp_combine 0.625/0.375, min KL over 1000 = " +
                   num(min_kl, 3));
}

// ---- recipe-backed criteria ----------------------------------------------------------

struct Runs {
  RecipeConfig config;
  RecipeResult first;
  fs::path dir_a, dir_b;
  bool second_done = false;
  double seconds_a = 0.0, seconds_b = 0.0;
};

double wer_of(const Runs& r, const std::string& id) { return r.first.stages.at(id).test.wer.wer(); }

Verdict two_head_contracts(const Runs& r) {
  Notes n;
  const TwoHeadOutcome& th = *r.first.two_head;
  n.check(th.shared_checksum_before == th.shared_checksum_after, "shared checksum moved");
  const TwoHeadModel& model = th.checkpoint.model;
  n.check(checksum(model.shared) == th.shared_checksum_before, "saved stack differs");

  const RecipeData rd = prepare_data(r.config);
  const Lexicon lex = r.config.task.lexicon();
  TwoPassConfig cfg;
  cfg.decoder = r.config.decoder;
  cfg.priors = rd.priors;
  cfg.kappa = r.config.kappa;
  std::size_t equal = 0, counted = 0, used = 0;
  for (std::size_t i = 0; i < rd.test.utterances.size() && used < 100; ++i, ++used) {
    const Utterance& u = rd.test.utterances[i];
    const DecodeTimeline tl = two_pass_decode(model, u.features, lex, rd.runtime_lm, cfg);
    if (tl.final_words == standalone_second_pass(model, u.features, lex, rd.runtime_lm, cfg))
      ++equal;
    if (tl.time_stack_evaluations == u.features.rows()) ++counted;
  }
  n.check(used == 100, "only " + std::to_string(used) + " test utterances");
  n.check(equal == used, std::to_string(used - equal) + " final transcripts differ");
  n.check(counted == used, std::to_string(used - counted) + " utterances re-ran the time stack");
  return n.verdict("checksum " + std::to_string(th.shared_checksum_after) + " unchanged; " +
                   std::to_string(equal) + "/" + std::to_string(used) + " finals equal; " +
                   std::to_string(counted) + "/" + std::to_string(used) +
                   " single time-stack passes");
}

Verdict recipe_directions(const Runs& r) {
  Notes n;
  std::string d;
  for (const LadderSpec& l : r.config.ladders)
    for (const StageSpec& s : l.stages) {
      if (s.criterion != Criterion::kMMI && s.criterion != Criterion::kSeqTS) continue;
      const std::string id = l.name + "." + s.name;
      const double before = wer_of(r, s.seed), after = wer_of(r, id);
      d += (d.empty() ? "" : ", ") + id + " " + num(before, 4) + "->" + num(after, 4);
      n.check(after < before, id + " did not reduce WER (" + num(before, 4) + " -> " +
                                  num(after, 4) + ")");
    }
  // Reference arithmetic, to three decimals.
  const double big = relative_wer_reduction(13.01, 9.34);
  const double small = relative_wer_reduction(10.36, 9.34);
  n.check(std::round(big * 1000) == 282, "13.01->9.34 gave " + num(big));
  n.check(std::round(small * 1000) == 98, "10.36->9.34 gave " + num(small));
  return n.verdict(d + "; reductions " + num(big, 3) + ", " + num(small, 3));
}

Verdict lm_strength_report(const Runs& r) {
  Notes n;
  const fs::path file = r.dir_a / "reports" / "lm_strength.json";
  n.check(fs::exists(file), "no lm_strength.json");
  std::string d;
  if (fs::exists(file)) {
    const auto rows = nlohmann::json::parse(slurp(file));
    std::vector<std::size_t> orders;
    for (const auto& row : rows) {
      orders.push_back(row.at("order").get<std::size_t>());
      d += (d.empty() ? "" : ", ") + std::string("order ") + std::to_string(orders.back()) +
           " WER " + num(row.at("test_wer").get<double>(), 4);
    }
    n.check(orders == std::vector<std::size_t>{1, 3}, "orders are not (1, 3)");
    if (rows.size() == 2) {
      const double lo = rows[0].at("test_wer").get<double>(), hi = rows[1].at("test_wer").get<double>();
      d += lo > hi ? " (stronger LM better)" : lo < hi ? " (weaker LM better)" : " (tie)";
    }
  }
  return n.verdict(d);
}

Verdict determinism(const Runs& r) {
  Notes n;
  const std::string a = slurp(r.dir_a / "logs" / "metrics.jsonl");
  const std::string b = slurp(r.dir_b / "logs" / "metrics.jsonl");
  n.check(r.second_done, "second run did not complete");
  n.check(!a.empty(), "empty metrics log");
  n.check(a == b, "metrics logs differ");
  std::size_t lines = 0;
  for (char c : a) lines += c == '\n';
  return n.verdict(std::to_string(lines) + " lines, " + std::to_string(a.size()) +
                   " bytes identical; runs took " + num(r.seconds_a, 3) + " s and " +
                   num(r.seconds_b, 3) + " s");
}

double timed(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Verdict()>& f) {
    Verdict v;
    const double secs = timed([&] {
      try {
        v = f();
      } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
      }
    });
    if (!v.pass) ++failures;
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, v.pass ? "PASS" : "FAIL", name.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "latency table", latency_table);
  report(2, "look-ahead arithmetic", lookahead_arithmetic);
  report(3, "parameter counts", param_counts);
  report(4, "gradient suite", gradient_suite);
  report(5, "lattice oracles", lattice_oracles);
  report(6, "teacher combination", combination_identities);

  Runs runs;
  runs.dir_a = work / "run_a";
  runs.dir_b = work / "run_b";
  std::string setup_error;
  try {
    runs.config = read_recipe(fs::path(LTSTREAM_SOURCE_DIR) / "configs" / "smoke_recipe.json");
    fs::remove_all(runs.dir_a);
    fs::remove_all(runs.dir_b);
    runs.seconds_a = timed([&] { runs.first = run_recipe(runs.config, runs.dir_a); });
    runs.seconds_b = timed([&] { run_recipe(runs.config, runs.dir_b); });
    runs.second_done = true;
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto with_runs = [&](const std::function<Verdict(const Runs&)>& f) {
    return [&, f]() -> Verdict {
      if (!setup_error.empty()) return {false, "smoke recipe failed: " + setup_error};
      return f(runs);
    };
  };
  report(7, "two-head contracts", with_runs(two_head_contracts));
  report(8, "recipe directions", with_runs(recipe_directions));
  report(9, "LM-strength report", with_runs(lm_strength_report));
  report(10, "determinism", with_runs(determinism));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
