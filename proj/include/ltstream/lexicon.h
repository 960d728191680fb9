// ltstream/lexicon.h
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
// Fixed pronunciations: senone 0 is silence, word w owns senones
// 1 + w*k .. k + w*k for k senones per word.

#ifndef LTSTREAM_LEXICON_H_
#define LTSTREAM_LEXICON_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltstream {

struct Lexicon {
  std::size_t num_words = 20;
  std::size_t senones_per_word = 3;

  static constexpr int kSilence = 0;

  std::size_t num_senones() const { return 1 + num_words * senones_per_word; }
  int senone(int word, std::size_t state) const {
    return 1 + word * static_cast<int>(senones_per_word) + static_cast<int>(state);
  }
  std::vector<int> pronunciation(int word) const {
    check(word);
    std::vector<int> out;
    for (std::size_t j = 0; j < senones_per_word; ++j) out.push_back(senone(word, j));
    return out;
  }
  // Word owning a senone, -1 for silence.
  int word_of(int senone) const {
    if (senone == kSilence) return -1;
    return (senone - 1) / static_cast<int>(senones_per_word);
  }
  void check(int word) const {
    if (word < 0 || word >= static_cast<int>(num_words))
      throw std::out_of_range("word id " + std::to_string(word) + " outside lexicon");
  }
};

}  // namespace ltstream

#endif  // LTSTREAM_LEXICON_H_
