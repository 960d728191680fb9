// ltstream/src/json_util.h
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
// JSON helpers shared by the config readers. Unknown keys are errors.

#ifndef LTSTREAM_SRC_JSON_UTIL_H_
#define LTSTREAM_SRC_JSON_UTIL_H_

#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "ltstream/corpus.h"
#include "ltstream/model.h"

namespace ltstream {

using Json = nlohmann::json;

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw SchemaError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read_opt(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!j.at(key).is_number_unsigned())
      throw SchemaError(where + "." + key + ": expected a non-negative integer");
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(where + "." + key + ": wrong type");
  }
}

Json to_json(const ToyTaskSpec& s);
ToyTaskSpec task_from_json(const Json& j, const std::string& where);
Json to_json(const ModelConfig& c);
ModelConfig model_from_json(const Json& j, const std::string& where);

}  // namespace ltstream

#endif  // LTSTREAM_SRC_JSON_UTIL_H_
