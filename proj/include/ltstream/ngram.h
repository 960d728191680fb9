// ltstream/ngram.h
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
// Small backoff n-gram LM over integer word ids.
//
// Training uses interpolated add-k smoothing,
//
//   P(w | c) = (n(c, w) + K P(w | c')) / (n(c) + K),   K = k (V + 1),
//
// with c' the context minus its oldest token and the empty context backing
// off to the uniform distribution over the V words plus </s>. The result is
// stored in backoff form (explicit entries for seen n-grams, one backoff
// weight per seen context) and every query goes through that table.
//
// Token ids: words are 0..V-1, </s> is V, <s> is V+1. A sentence is scored
// as <s> w_1 .. w_m </s>; histories never reach past <s>.

#ifndef LTSTREAM_NGRAM_H_
#define LTSTREAM_NGRAM_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltstream {

class LmError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using WordSeq = std::vector<int>;

class NGramLM {
 public:
  NGramLM() = default;
  NGramLM(std::size_t order, std::size_t vocab_size);

  std::size_t order() const { return order_; }
  std::size_t vocab_size() const { return vocab_; }
  int bos() const { return static_cast<int>(vocab_) + 1; }
  int eos() const { return static_cast<int>(vocab_); }

  // Natural-log probability of `token` (a word or eos) after `history`.
  double logprob(const WordSeq& history, int token) const;
  double sentence_logprob(const WordSeq& words) const;

  // Minimal LM state: the longest suffix of (state + token) that is a seen
  // context, at most order-1 tokens. Probabilities depend on the state only.
  WordSeq start_state() const;
  WordSeq next_state(const WordSeq& state, int token) const;

  struct Entry {
    double logprob = 0.0;
    double backoff = 0.0;  // backoff weight of history+word as a context
  };
  // Keyed by history followed by the word.
  const std::map<WordSeq, Entry>& entries() const { return entries_; }
  std::map<WordSeq, Entry>& mutable_entries() { return entries_; }
  bool is_context(const WordSeq& c) const;

  void validate_token(int token) const;

 private:
  std::size_t order_ = 0;
  std::size_t vocab_ = 0;
  std::map<WordSeq, Entry> entries_;
};

NGramLM train_ngram(const std::vector<WordSeq>& corpus, std::size_t order,
                    std::size_t vocab_size, double add_k = 0.5);

// exp(-(sum of log-probs) / (words + sentence ends)).
double perplexity(const NGramLM& lm, const std::vector<WordSeq>& corpus);

// Text form: "ngram-lm <order> <vocab>" then "<n> <tokens...> <logprob> <backoff>".
void write_lm(const std::filesystem::path& path, const NGramLM& lm);
NGramLM read_lm(const std::filesystem::path& path);
std::string lm_to_string(const NGramLM& lm);
NGramLM lm_from_string(const std::string& text);

}  // namespace ltstream

#endif  // LTSTREAM_NGRAM_H_
