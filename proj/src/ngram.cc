// ltstream/src/ngram.cc
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

#include "ltstream/ngram.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ltstream/checkpoint.h"

namespace ltstream {

NGramLM::NGramLM(std::size_t order, std::size_t vocab_size) : order_(order), vocab_(vocab_size) {
  if (order == 0) throw LmError("n-gram order must be >= 1");
  if (vocab_size == 0) throw LmError("vocabulary must be non-empty");
}

void NGramLM::validate_token(int token) const {
  if (token < 0 || token > static_cast<int>(vocab_))
    throw LmError("token " + std::to_string(token) + " outside vocabulary of " +
                  std::to_string(vocab_) + " words");
}

bool NGramLM::is_context(const WordSeq& c) const {
  if (c.empty()) return true;
  if (c.size() >= order_) return false;
  auto it = entries_.find(c);
  if (it == entries_.end()) return false;
  if (it->second.backoff != 0.0) return true;
  // Keys are sorted, so an extension of c would follow it directly.
  auto next = std::next(it);
  return next != entries_.end() && next->first.size() > c.size() &&
         std::equal(c.begin(), c.end(), next->first.begin());
}

double NGramLM::logprob(const WordSeq& history, int token) const {
  validate_token(token);
  const std::size_t keep = std::min(history.size(), order_ - 1);
  WordSeq key(history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
  double backoff = 0.0;
  while (true) {
    key.push_back(token);
    auto it = entries_.find(key);
    if (it != entries_.end()) return backoff + it->second.logprob;
    key.pop_back();
    if (key.empty()) break;
    auto ctx = entries_.find(key);
    if (ctx != entries_.end()) backoff += ctx->second.backoff;
    key.erase(key.begin());
  }
  throw LmError("no unigram entry for token " + std::to_string(token));
}

double NGramLM::sentence_logprob(const WordSeq& words) const {
  WordSeq history{bos()};
  double total = 0.0;
  for (int w : words) {
    if (w < 0 || w >= static_cast<int>(vocab_)) throw LmError("word id out of range");
    total += logprob(history, w);
    history.push_back(w);
  }
  return total + logprob(history, eos());
}

WordSeq NGramLM::start_state() const {
  if (order_ == 1) return {};
  return {bos()};
}

WordSeq NGramLM::next_state(const WordSeq& state, int token) const {
  WordSeq s = state;
  s.push_back(token);
  while (s.size() > order_ - 1) s.erase(s.begin());
  while (!s.empty() && !is_context(s)) s.erase(s.begin());
  return s;
}

NGramLM train_ngram(const std::vector<WordSeq>& corpus, std::size_t order,
                    std::size_t vocab_size, double add_k) {
  NGramLM lm(order, vocab_size);
  if (corpus.empty()) throw LmError("cannot train an LM on an empty corpus");
  if (!(add_k > 0)) throw LmError("add-k smoothing constant must be > 0");
  const int bos = lm.bos();
  const int eos = lm.eos();
  std::map<WordSeq, double> ngram_count;    // history + word
  std::map<WordSeq, double> context_count;  // history
  for (const WordSeq& sentence : corpus) {
    WordSeq tokens{bos};
    for (int w : sentence) {
      if (w < 0 || w >= static_cast<int>(vocab_size)) throw LmError("word id out of range");
      tokens.push_back(w);
    }
    tokens.push_back(eos);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      for (std::size_t k = 0; k < order && k <= i; ++k) {
        WordSeq ctx(tokens.begin() + static_cast<std::ptrdiff_t>(i - k),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i));
        context_count[ctx] += 1;
        ctx.push_back(tokens[i]);
        ngram_count[ctx] += 1;
      }
    }
  }
  const double events = static_cast<double>(vocab_size + 1);
  const double K = add_k * events;

  // Interpolated probabilities for every event after context c, shortest first.
  std::map<WordSeq, std::vector<double>> prob;
  std::vector<double> uniform(vocab_size + 1, 1.0 / events);
  for (std::size_t len = 0; len < order; ++len) {
    for (const auto& [ctx, n_ctx] : context_count) {
      if (ctx.size() != len) continue;
      const std::vector<double>& lower =
          len == 0 ? uniform : prob.at(WordSeq(ctx.begin() + 1, ctx.end()));
      std::vector<double> p(vocab_size + 1);
      for (std::size_t w = 0; w <= vocab_size; ++w) {
        WordSeq key = ctx;
        key.push_back(static_cast<int>(w));
        auto it = ngram_count.find(key);
        const double n = it == ngram_count.end() ? 0.0 : it->second;
        p[w] = (n + K * lower[w]) / (n_ctx + K);
      }
      prob[ctx] = std::move(p);
    }
  }

  auto& entries = lm.mutable_entries();
  const std::vector<double>& unigram = prob.at(WordSeq{});
  for (std::size_t w = 0; w <= vocab_size; ++w)
    entries[WordSeq{static_cast<int>(w)}].logprob = std::log(unigram[w]);
  entries[WordSeq{bos}].logprob = -std::numeric_limits<double>::infinity();
  for (const auto& [key, n] : ngram_count) {
    if (key.size() < 2) continue;
    const WordSeq ctx(key.begin(), key.end() - 1);
    entries[key].logprob = std::log(prob.at(ctx)[static_cast<std::size_t>(key.back())]);
  }
  for (const auto& [ctx, n_ctx] : context_count) {
    if (ctx.empty()) continue;
    entries[ctx].backoff = std::log(K / (n_ctx + K));
  }
  return lm;
}

double perplexity(const NGramLM& lm, const std::vector<WordSeq>& corpus) {
  double total = 0.0;
  double count = 0.0;
  for (const WordSeq& s : corpus) {
    total += lm.sentence_logprob(s);
    count += static_cast<double>(s.size() + 1);
  }
  if (count == 0) throw LmError("perplexity of an empty corpus");
  return std::exp(-total / count);
}

namespace {

std::string token_name(const NGramLM& lm, int t) {
  if (t == lm.bos()) return "<s>";
  if (t == lm.eos()) return "</s>";
  return std::to_string(t);
}

int parse_token(const NGramLM& lm, const std::string& s) {
  if (s == "<s>") return lm.bos();
  if (s == "</s>") return lm.eos();
  std::size_t used = 0;
  int v = -1;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw LmError("bad LM token '" + s + "'");
  }
  if (used != s.size() || v < 0 || v >= static_cast<int>(lm.vocab_size()))
    throw LmError("bad LM token '" + s + "'");
  return v;
}

}  // namespace

std::string lm_to_string(const NGramLM& lm) {
  std::ostringstream out;
  out << "ngram-lm " << lm.order() << ' ' << lm.vocab_size() << '\n';
  for (std::size_t n = 1; n <= lm.order(); ++n) {
    for (const auto& [key, e] : lm.entries()) {
      if (key.size() != n) continue;
      out << n;
      for (int t : key) out << ' ' << token_name(lm, t);
      out << ' ' << format_double(e.logprob) << ' ' << format_double(e.backoff) << '\n';
    }
  }
  return out.str();
}

NGramLM lm_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::size_t order = 0, vocab = 0;
  if (!(in >> magic >> order >> vocab) || magic != "ngram-lm") throw LmError("bad LM header");
  NGramLM lm(order, vocab);
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t n = 0;
    if (!(ls >> n) || n == 0 || n > order)
      throw LmError("LM line " + std::to_string(line_no) + ": bad n-gram order");
    WordSeq key;
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      if (!(ls >> tok)) throw LmError("LM line " + std::to_string(line_no) + ": missing token");
      key.push_back(parse_token(lm, tok));
    }
    std::string lp, bo, extra;
    if (!(ls >> lp >> bo) || (ls >> extra))
      throw LmError("LM line " + std::to_string(line_no) + ": expected logprob and backoff");
    lm.mutable_entries()[key] = NGramLM::Entry{parse_double(lp), parse_double(bo)};
  }
  for (int t = 0; t <= static_cast<int>(vocab); ++t)
    if (!lm.entries().count(WordSeq{t}))
      throw LmError("LM is missing the unigram for token " + token_name(lm, t));
  return lm;
}

void write_lm(const std::filesystem::path& path, const NGramLM& lm) {
  std::ofstream f(path);
  if (!f) throw LmError("cannot write '" + path.string() + "'");
  f << lm_to_string(lm);
}

NGramLM read_lm(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LmError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return lm_from_string(ss.str());
}

}  // namespace ltstream
