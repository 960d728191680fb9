// ltstream/src/decoder.cc
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

#include "ltstream/decoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

namespace ltstream {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

void DecoderConfig::validate() const {
  if (!(beam > 0)) throw std::invalid_argument("decoder beam must be > 0");
  if (max_active == 0) throw std::invalid_argument("decoder max_active must be >= 1");
  if (!(lm_weight >= 0)) throw std::invalid_argument("lm_weight must be >= 0");
}

WordSeq word_ids(const std::vector<WordHyp>& words) {
  WordSeq out;
  for (const WordHyp& w : words) out.push_back(w.word);
  return out;
}

TokenPassingDecoder::TokenPassingDecoder(const Lexicon& lexicon, const NGramLM& lm,
                                         DecoderConfig config)
    : lexicon_(&lexicon), lm_(&lm), config_(config) {
  config_.validate();
  if (lm.vocab_size() != lexicon.num_words)
    throw std::invalid_argument("LM vocabulary (" + std::to_string(lm.vocab_size()) +
                                ") differs from lexicon (" + std::to_string(lexicon.num_words) + ")");
  if (lexicon.senones_per_word == 0 || lexicon.senones_per_word > 255)
    throw std::invalid_argument("senones per word must be in [1, 255]");
}

int TokenPassingDecoder::intern(const WordSeq& state) {
  auto [it, inserted] = lm_ids_.try_emplace(state, static_cast<int>(lm_states_.size()));
  if (inserted) lm_states_.push_back(state);
  return it->second;
}

std::pair<double, int> TokenPassingDecoder::lm_step(int lm_state, int word) {
  auto it = lm_cache_.find({lm_state, word});
  if (it != lm_cache_.end()) return it->second;
  const WordSeq ctx = lm_states_[static_cast<std::size_t>(lm_state)];
  const double lp = config_.lm_weight * lm_->logprob(ctx, word);
  const int next = intern(lm_->next_state(ctx, word));
  return lm_cache_[{lm_state, word}] = {lp, next};
}

void TokenPassingDecoder::advance(std::span<const double> row) {
  if (row.size() != lexicon_->num_senones())
    throw ShapeError("score row has " + std::to_string(row.size()) + " senones, lexicon needs " +
                     std::to_string(lexicon_->num_senones()));
  const std::size_t t = frames_;
  const std::size_t last_state = lexicon_->senones_per_word - 1;
  std::map<std::uint64_t, Token> next;
  auto relax = [&](std::uint64_t k, double s, int link) {
    if (std::isnan(s) || s == kNegInf) return;
    auto [it, inserted] = next.try_emplace(k, Token{s, link});
    if (!inserted && s > it->second.score) it->second = Token{s, link};
  };
  auto enter_words = [&](int lm_state, double base, int link) {
    for (int w = 0; w < static_cast<int>(lexicon_->num_words); ++w) {
      auto [lp, lm_next] = lm_step(lm_state, w);
      const double s = base + lp + row[static_cast<std::size_t>(lexicon_->senone(w, 0))];
      if (std::isnan(s) || s == kNegInf) continue;
      const std::uint64_t k = key(kWord, w, 0, lm_next);
      auto it = next.find(k);
      if (it != next.end() && it->second.score >= s) continue;
      links_.push_back(Link{w, t, link});
      next[k] = Token{s, static_cast<int>(links_.size() - 1)};
    }
  };

  if (t == 0) {
    const int start = intern(lm_->start_state());
    relax(key(kLead, -1, 0, start), row[Lexicon::kSilence], -1);
    enter_words(start, 0.0, -1);
  } else {
    std::map<int, Token> exits;
    for (const auto& [k, tok] : tokens_) {
      const auto kind = static_cast<Kind>(k >> 62);
      const int word = static_cast<int>((k >> 40) & 0x3fffff) - 1;
      const std::size_t state = (k >> 32) & 0xff;
      const int lms = static_cast<int>(k & 0xffffffffu);
      auto note_exit = [&] {
        auto [it, inserted] = exits.try_emplace(lms, tok);
        if (!inserted && tok.score > it->second.score) it->second = tok;
      };
      switch (kind) {
        case kLead:
          relax(k, tok.score + row[Lexicon::kSilence], tok.link);
          note_exit();
          break;
        case kWord:
          relax(k, tok.score + row[static_cast<std::size_t>(lexicon_->senone(word, state))], tok.link);
          if (state < last_state) {
            relax(key(kWord, word, state + 1, lms),
                  tok.score + row[static_cast<std::size_t>(lexicon_->senone(word, state + 1))],
                  tok.link);
          } else {
            note_exit();
            relax(key(kTrail, -1, 0, lms), tok.score + row[Lexicon::kSilence], tok.link);
          }
          break;
        case kTrail:
          relax(k, tok.score + row[Lexicon::kSilence], tok.link);
          break;
      }
    }
    for (const auto& [lms, tok] : exits) enter_words(lms, tok.score, tok.link);
  }

  if (next.empty()) throw SearchError("every hypothesis was pruned at frame " + std::to_string(t), t);
  double best = kNegInf;
  for (const auto& [k, tok] : next) best = std::max(best, tok.score);
  const double threshold = best - config_.beam;
  for (auto it = next.begin(); it != next.end();) {
    if (it->second.score < threshold)
      it = next.erase(it);
    else
      ++it;
  }
  if (next.size() > config_.max_active) {
    std::vector<std::pair<double, std::uint64_t>> order;
    for (const auto& [k, tok] : next) order.emplace_back(-tok.score, k);
    std::sort(order.begin(), order.end());
    std::set<std::uint64_t> keep;
    for (std::size_t i = 0; i < config_.max_active; ++i) keep.insert(order[i].second);
    for (auto it = next.begin(); it != next.end();) {
      if (!keep.count(it->first))
        it = next.erase(it);
      else
        ++it;
    }
  }
  tokens_ = std::move(next);
  best_.push_back(best);
  ++frames_;
}

std::vector<WordHyp> TokenPassingDecoder::chain(int link) const {
  std::vector<WordHyp> out;
  for (int l = link; l >= 0; l = links_[static_cast<std::size_t>(l)].prev)
    out.push_back(WordHyp{links_[static_cast<std::size_t>(l)].word,
                          links_[static_cast<std::size_t>(l)].start});
  std::reverse(out.begin(), out.end());
  return out;
}

PartialResult TokenPassingDecoder::partial() const {
  PartialResult r;
  r.frontier = frames_;
  if (tokens_.empty()) return r;
  std::vector<std::vector<WordHyp>> chains;
  for (const auto& [k, tok] : tokens_) chains.push_back(chain(tok.link));
  std::vector<WordHyp> prefix = chains.front();
  for (const auto& c : chains) {
    std::size_t n = 0;
    while (n < prefix.size() && n < c.size() && prefix[n] == c[n]) ++n;
    prefix.resize(n);
  }
  for (const auto& c : chains)
    if (c.size() > prefix.size()) r.frontier = std::min(r.frontier, c[prefix.size()].start);
  r.words = std::move(prefix);
  return r;
}

DecodeResult TokenPassingDecoder::finalize() const {
  if (tokens_.empty()) throw SearchError("no frames decoded", frames_);
  const std::size_t last_state = lexicon_->senones_per_word - 1;
  const Token* best = nullptr;
  double best_score = kNegInf;
  const Token* fallback = nullptr;
  double fallback_score = kNegInf;
  for (const auto& [k, tok] : tokens_) {
    const auto kind = static_cast<Kind>(k >> 62);
    const std::size_t state = (k >> 32) & 0xff;
    const int lms = static_cast<int>(k & 0xffffffffu);
    const double s = tok.score + config_.lm_weight *
                                     lm_->logprob(lm_states_[static_cast<std::size_t>(lms)], lm_->eos());
    const bool can_end = kind == kTrail || (kind == kWord && state == last_state);
    if (can_end && s > best_score) {
      best_score = s;
      best = &tok;
    }
    if (s > fallback_score) {
      fallback_score = s;
      fallback = &tok;
    }
  }
  if (!best) {
    best = fallback;
    best_score = fallback_score;
  }
  return DecodeResult{chain(best->link), best_score};
}

DecodeResult decode(const Tensor& scores, const Lexicon& lexicon, const NGramLM& lm,
                    const DecoderConfig& config) {
  if (scores.rank() != 2 || scores.rows() == 0) throw ShapeError("scores must be [T x senones], T >= 1");
  TokenPassingDecoder dec(lexicon, lm, config);
  for (std::size_t t = 0; t < scores.rows(); ++t) dec.advance(scores.row(t));
  return dec.finalize();
}

// ---- lattice generation ---------------------------------------------------------

namespace {

// Viterbi alignment of one word starting at a fixed frame, for every end.
class WordAligner {
 public:
  WordAligner(const Tensor& scores, std::vector<int> pron, std::size_t t0)
      : pron_(std::move(pron)), t0_(t0) {
    const std::size_t T = scores.rows();
    const std::size_t K = pron_.size();
    const std::size_t span = T - t0;
    score_.assign(span * K, kNegInf);
    advanced_.assign(span * K, 0);
    score_[0] = scores.at(t0, static_cast<std::size_t>(pron_[0]));
    for (std::size_t u = 1; u < span; ++u) {
      for (std::size_t j = 0; j < K && j <= u; ++j) {
        const double stay = score_[(u - 1) * K + j];
        const double adv = j ? score_[(u - 1) * K + j - 1] : kNegInf;
        const double emit = scores.at(t0 + u, static_cast<std::size_t>(pron_[j]));
        if (adv > stay) {
          score_[u * K + j] = adv + emit;
          advanced_[u * K + j] = 1;
        } else {
          score_[u * K + j] = stay + emit;
        }
      }
    }
  }
  // Score of the word covering [t0, end).
  double score(std::size_t end) const { return score_[(end - t0_ - 1) * pron_.size() + pron_.size() - 1]; }
  std::vector<int> alignment(std::size_t end) const {
    const std::size_t K = pron_.size();
    std::vector<int> out(end - t0_);
    std::size_t j = K - 1;
    for (std::size_t u = end - t0_; u-- > 0;) {
      out[u] = pron_[j];
      if (advanced_[u * K + j]) --j;
    }
    return out;
  }

 private:
  std::vector<int> pron_;
  std::size_t t0_;
  std::vector<double> score_;
  std::vector<char> advanced_;
};

struct Segment {
  int word;  // -1 silence
  std::size_t start, end;
  std::vector<int> senones;
};

std::vector<Segment> parse_reference(const Reference& ref, const Lexicon& lexicon, std::size_t T) {
  if (ref.alignment.size() != T)
    throw LatticeError("reference alignment has " + std::to_string(ref.alignment.size()) +
                       " frames, scores have " + std::to_string(T));
  std::vector<Segment> out;
  std::size_t t = 0;
  auto silence_run = [&] {
    const std::size_t s = t;
    while (t < T && ref.alignment[t] == Lexicon::kSilence) ++t;
    if (t > s) out.push_back(Segment{-1, s, t, std::vector<int>(t - s, Lexicon::kSilence)});
  };
  silence_run();
  for (std::size_t k = 0; k < ref.words.size(); ++k) {
    const int w = ref.words[k];
    lexicon.check(w);
    const std::size_t s = t;
    for (std::size_t j = 0; j < lexicon.senones_per_word; ++j) {
      const int sen = lexicon.senone(w, j);
      const std::size_t run = t;
      while (t < T && ref.alignment[t] == sen) ++t;
      if (t == run)
        throw LatticeError("reference alignment does not follow the lexicon at frame " +
                           std::to_string(t) + " (word " + std::to_string(k) + ")");
    }
    out.push_back(Segment{w, s, t, std::vector<int>(ref.alignment.begin() + static_cast<std::ptrdiff_t>(s),
                                                   ref.alignment.begin() + static_cast<std::ptrdiff_t>(t))});
  }
  silence_run();
  if (t != T) throw LatticeError("reference alignment has extra frames from " + std::to_string(t));
  if (ref.words.empty()) throw LatticeError("reference has no words");
  return out;
}

class LatticeBuilder {
 public:
  using Key = std::tuple<std::size_t, int, WordSeq>;  // frame, phase, LM state

  LatticeBuilder(const Tensor& scores, const Lexicon& lexicon, const NGramLM& lm, double lm_weight)
      : scores_(scores), lexicon_(lexicon), lm_(lm), lm_weight_(lm_weight), T_(scores.rows()) {
    sil_cum_.assign(T_ + 1, 0.0);
    for (std::size_t t = 0; t < T_; ++t)
      sil_cum_[t + 1] = sil_cum_[t] + scores.at(t, Lexicon::kSilence);
  }

  std::size_t node(std::size_t frame, int phase, const WordSeq& ctx) {
    auto [it, inserted] = ids_.try_emplace(Key{frame, phase, ctx}, keys_.size());
    if (inserted) {
      keys_.push_back(it->first);
      alpha_.push_back(kNegInf);
    }
    return it->second;
  }

  std::size_t add_arc(std::size_t from, std::size_t to, int word, std::vector<int> senones,
                      double ac, double lm) {
    auto sig = std::make_tuple(from, to, word, senones);
    auto it = arc_ids_.find(sig);
    if (it != arc_ids_.end()) return it->second;
    arcs_.push_back(Arc{from, to, word, std::move(senones), ac, lm});
    arc_ids_[sig] = arcs_.size() - 1;
    alpha_[to] = std::max(alpha_[to], alpha_[from] + ac + lm);
    return arcs_.size() - 1;
  }

  double silence(std::size_t a, std::size_t b) const { return sil_cum_[b] - sil_cum_[a]; }
  double lm_score(const WordSeq& ctx, int token) const { return lm_weight_ * lm_.logprob(ctx, token); }

  const WordAligner& aligner(std::size_t t0, int w) {
    auto it = aligners_.find({t0, w});
    if (it == aligners_.end())
      it = aligners_.emplace(std::make_pair(t0, w), WordAligner(scores_, lexicon_.pronunciation(w), t0)).first;
    return it->second;
  }

  // Inserts a complete path given as segments; returns its arc indices.
  std::vector<std::size_t> insert(const std::vector<Segment>& segments) {
    std::vector<std::size_t> path;
    WordSeq ctx = lm_.start_state();
    int phase = 0;
    std::size_t cur = node(0, 0, ctx);
    for (const Segment& s : segments) {
      if (s.word < 0) {
        const std::size_t to = node(s.end, phase, ctx);
        path.push_back(add_arc(cur, to, -1, s.senones, alignment_score(scores_, s.start, s.senones), 0.0));
        cur = to;
      } else {
        const double lm = lm_score(ctx, s.word);
        ctx = lm_.next_state(ctx, s.word);
        phase = 1;
        const std::size_t to = node(s.end, phase, ctx);
        path.push_back(add_arc(cur, to, s.word, s.senones, alignment_score(scores_, s.start, s.senones), lm));
        cur = to;
      }
    }
    const std::size_t fin = final_node();
    path.push_back(add_arc(cur, fin, -1, {}, 0.0, lm_score(ctx, lm_.eos())));
    return path;
  }

  std::size_t final_node() { return node(T_, 2, WordSeq{}); }

  std::size_t T_value() const { return T_; }
  const std::map<Key, std::size_t>& ids() const { return ids_; }
  const std::vector<Key>& keys() const { return keys_; }
  std::vector<double>& alpha() { return alpha_; }
  std::vector<Arc>& arcs() { return arcs_; }

 private:
  const Tensor& scores_;
  const Lexicon& lexicon_;
  const NGramLM& lm_;
  double lm_weight_;
  std::size_t T_;
  std::vector<double> sil_cum_;
  std::map<Key, std::size_t> ids_;
  std::vector<Key> keys_;
  std::vector<double> alpha_;
  std::vector<Arc> arcs_;
  std::map<std::tuple<std::size_t, std::size_t, int, std::vector<int>>, std::size_t> arc_ids_;
  std::map<std::pair<std::size_t, int>, WordAligner> aligners_;
};

}  // namespace

Lattice generate_lattice(const Tensor& scores, const Lexicon& lexicon, const NGramLM& lm,
                         const LatticeConfig& config, const std::optional<Reference>& reference) {
  if (scores.rank() != 2 || scores.rows() == 0 || scores.cols() != lexicon.num_senones())
    throw ShapeError("scores must be [T x " + std::to_string(lexicon.num_senones()) + "], got " +
                     shape_string(scores.shape()));
  if (!(config.lattice_beam >= 0)) throw std::invalid_argument("lattice_beam must be >= 0");
  if (config.max_arcs == 0) throw std::invalid_argument("max_arcs must be >= 1");
  const std::size_t T = scores.rows();
  const std::size_t K = lexicon.senones_per_word;

  TokenPassingDecoder dec(lexicon, lm, config.search);
  for (std::size_t t = 0; t < T; ++t) dec.advance(scores.row(t));
  const std::vector<double>& best_prefix = dec.best_per_frame();
  const DecodeResult one_best = dec.finalize();
  const double beam = config.search.beam;
  auto survives = [&](double prefix, std::size_t end) {
    return prefix >= best_prefix[end - 1] - beam;
  };

  LatticeBuilder b(scores, lexicon, lm, config.search.lm_weight);
  const WordSeq start_ctx = lm.start_state();
  const std::size_t start = b.node(0, 0, start_ctx);
  b.alpha()[start] = 0.0;
  for (std::size_t f = 1; f < T; ++f)
    if (survives(b.silence(0, f), f))
      b.add_arc(start, b.node(f, 0, start_ctx), -1, std::vector<int>(f, Lexicon::kSilence),
                b.silence(0, f), 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::size_t> here;
    for (auto it = b.ids().lower_bound(LatticeBuilder::Key{t, 0, WordSeq{}});
         it != b.ids().end() && std::get<0>(it->first) == t; ++it)
      here.push_back(it->second);
    for (std::size_t n : here) {
      const double alpha = b.alpha()[n];
      if (alpha == kNegInf || (t > 0 && !survives(alpha, t))) continue;
      const auto [frame, phase, ctx] = b.keys()[n];
      for (int w = 0; w < static_cast<int>(lexicon.num_words); ++w) {
        const double lp = b.lm_score(ctx, w);
        const WordSeq next = lm.next_state(ctx, w);
        const WordAligner& al = b.aligner(t, w);
        const std::size_t last_end = std::min(T, t + config.max_word_frames);
        for (std::size_t e = t + K; e <= last_end; ++e) {
          const double ac = al.score(e);
          if (ac == kNegInf || !survives(alpha + lp + ac, e)) continue;
          b.add_arc(n, b.node(e, 1, next), w, al.alignment(e), ac, lp);
        }
      }
      if (phase == 1 && survives(alpha + b.silence(t, T), T))
        b.add_arc(n, b.node(T, 1, ctx), -1, std::vector<int>(T - t, Lexicon::kSilence),
                  b.silence(t, T), 0.0);
    }
  }
  const std::size_t fin = b.final_node();
  {
    std::vector<std::size_t> ends;
    for (auto it = b.ids().lower_bound(LatticeBuilder::Key{T, 1, WordSeq{}});
         it != b.ids().end() && std::get<0>(it->first) == T && std::get<1>(it->first) == 1; ++it)
      ends.push_back(it->second);
    for (std::size_t n : ends) {
      if (b.alpha()[n] == kNegInf) continue;
      b.add_arc(n, fin, -1, {}, 0.0, b.lm_score(std::get<2>(b.keys()[n]), lm.eos()));
    }
  }

  // Protected paths: the decoder's best and the reference.
  std::set<std::size_t> protect;
  {
    std::vector<Segment> segs;
    const auto& words = one_best.words;
    if (words.empty()) throw SearchError("decoder produced no words", T - 1);
    if (words.front().start > 0)
      segs.push_back(Segment{-1, 0, words.front().start,
                             std::vector<int>(words.front().start, Lexicon::kSilence)});
    for (std::size_t k = 0; k + 1 < words.size(); ++k) {
      const WordAligner& al = b.aligner(words[k].start, words[k].word);
      segs.push_back(Segment{words[k].word, words[k].start, words[k + 1].start,
                             al.alignment(words[k + 1].start)});
    }
    const WordHyp& last = words.back();
    const WordAligner& al = b.aligner(last.start, last.word);
    std::size_t best_end = T;
    double best_tail = kNegInf;
    for (std::size_t e = last.start + K; e <= T; ++e) {
      const double s = al.score(e) + b.silence(e, T);
      if (s > best_tail) {
        best_tail = s;
        best_end = e;
      }
    }
    if (best_tail == kNegInf) throw SearchError("best hypothesis cannot end at the last frame", T - 1);
    segs.push_back(Segment{last.word, last.start, best_end, al.alignment(best_end)});
    if (best_end < T) segs.push_back(Segment{-1, best_end, T, std::vector<int>(T - best_end, Lexicon::kSilence)});
    for (std::size_t a : b.insert(segs)) protect.insert(a);
  }
  if (reference)
    for (std::size_t a : b.insert(parse_reference(*reference, lexicon, T))) protect.insert(a);

  // Node ids follow key order, which is topological (frame, then phase).
  const std::size_t N = b.keys().size();
  std::vector<std::size_t> order_of(N);
  {
    std::size_t i = 0;
    for (const auto& [key, id] : b.ids()) order_of[id] = i++;
  }
  std::vector<Arc> arcs = b.arcs();
  for (Arc& a : arcs) {
    a.from = order_of[a.from];
    a.to = order_of[a.to];
  }
  std::vector<std::size_t> frame_of(N);
  for (const auto& [key, id] : b.ids()) frame_of[order_of[id]] = std::get<0>(key);

  // Viterbi alpha/beta for lattice-beam pruning.
  std::vector<std::vector<std::size_t>> in(N), out(N);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    out[arcs[i].from].push_back(i);
    in[arcs[i].to].push_back(i);
  }
  std::vector<double> va(N, kNegInf), vb(N, kNegInf);
  va[0] = 0.0;
  for (std::size_t u = 1; u < N; ++u)
    for (std::size_t i : in[u]) va[u] = std::max(va[u], va[arcs[i].from] + arcs[i].score());
  vb[N - 1] = 0.0;
  for (std::size_t u = N - 1; u-- > 0;)
    for (std::size_t i : out[u]) vb[u] = std::max(vb[u], arcs[i].score() + vb[arcs[i].to]);
  const double best_total = vb[0];
  if (best_total == kNegInf) throw SearchError("no hypothesis reaches the final frame", T - 1);

  std::vector<std::pair<double, std::size_t>> optional_arcs;
  std::vector<char> keep(arcs.size(), 0);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const double through = va[arcs[i].from] + arcs[i].score() + vb[arcs[i].to];
    if (protect.count(i)) {
      keep[i] = 1;
      ++kept;
    } else if (through >= best_total - config.lattice_beam && through != kNegInf) {
      optional_arcs.emplace_back(-through, i);
    }
  }
  std::sort(optional_arcs.begin(), optional_arcs.end());
  for (const auto& [neg, i] : optional_arcs) {
    if (kept >= config.max_arcs) break;
    keep[i] = 1;
    ++kept;
  }

  // Connectivity trim and renumbering.
  std::vector<char> fwd(N, 0), bwd(N, 0);
  fwd[0] = 1;
  for (std::size_t u = 0; u < N; ++u)
    if (fwd[u])
      for (std::size_t i : out[u])
        if (keep[i]) fwd[arcs[i].to] = 1;
  bwd[N - 1] = 1;
  for (std::size_t u = N; u-- > 0;)
    if (bwd[u])
      for (std::size_t i : in[u])
        if (keep[i]) bwd[arcs[i].from] = 1;
  std::vector<std::size_t> new_id(N, 0);
  Lattice lat;
  lat.num_frames = T;
  for (std::size_t u = 0; u < N; ++u) {
    if (fwd[u] && bwd[u]) {
      new_id[u] = lat.num_nodes();
      lat.add_node(frame_of[u]);
    }
  }
  std::vector<std::size_t> kept_arcs;
  for (std::size_t i = 0; i < arcs.size(); ++i)
    if (keep[i] && fwd[arcs[i].from] && bwd[arcs[i].from] && fwd[arcs[i].to] && bwd[arcs[i].to])
      kept_arcs.push_back(i);
  std::stable_sort(kept_arcs.begin(), kept_arcs.end(), [&](std::size_t x, std::size_t y) {
    return std::tie(arcs[x].from, arcs[x].to) < std::tie(arcs[y].from, arcs[y].to);
  });
  for (std::size_t i : kept_arcs) {
    Arc a = arcs[i];
    a.from = new_id[a.from];
    a.to = new_id[a.to];
    lat.arcs.push_back(std::move(a));
  }
  validate(lat);
  return lat;
}

}  // namespace ltstream
