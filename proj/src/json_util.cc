// ltstream/src/json_util.cc
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

#include "json_util.h"

namespace ltstream {

Json to_json(const ModelConfig& c) {
  return Json{{"variant", std::string(to_string(c.variant))},
              {"num_layers", c.num_layers},
              {"hidden_dim", c.hidden_dim},
              {"proj_dim", c.proj_dim},
              {"input_dim", c.input_dim},
              {"num_senones", c.num_senones},
              {"tau", c.tau},
              {"learn_current_context", c.learn_current_context}};
}

ModelConfig model_from_json(const Json& j, const std::string& where) {
  check_keys(j,
             {"variant", "num_layers", "hidden_dim", "proj_dim", "input_dim", "num_senones", "tau",
              "learn_current_context"},
             where);
  ModelConfig c;
  std::string variant = std::string(to_string(c.variant));
  read_opt(j, "variant", variant, where);
  try {
    c.variant = parse_variant(variant);
  } catch (const std::exception& e) {
    throw SchemaError(where + ".variant: " + e.what());
  }
  read_opt(j, "num_layers", c.num_layers, where);
  read_opt(j, "hidden_dim", c.hidden_dim, where);
  read_opt(j, "proj_dim", c.proj_dim, where);
  read_opt(j, "input_dim", c.input_dim, where);
  read_opt(j, "num_senones", c.num_senones, where);
  read_opt(j, "tau", c.tau, where);
  read_opt(j, "learn_current_context", c.learn_current_context, where);
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return c;
}

}  // namespace ltstream
