// ltstream/checkpoint.h
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
// Self-describing binary container: string metadata plus named f64
// tensors, little-endian regardless of host. Layout in docs/formats.md.

#ifndef LTSTREAM_CHECKPOINT_H_
#define LTSTREAM_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltstream/model.h"

namespace ltstream {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kContainerMagic[4] = {'L', 'T', 'C', 'K'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  const std::string& get(const std::string& key) const;
};

std::string encode(const Container& c);
Container decode(const std::string& bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// Lossless text for doubles and lists of doubles (%.17g).
std::string format_double(double v);
double parse_double(const std::string& s);
std::string format_doubles(const std::vector<double>& v);
std::vector<double> parse_doubles(const std::string& s);

struct Checkpoint {
  LayerTrajectoryModel model;
  std::string stage;  // "init", "CE", "MMI", "EMBR", "SEQ_TS"
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
};

struct TwoHeadCheckpoint {
  TwoHeadModel model;
  std::string stage;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
};

void put_config(Container& c, const ModelConfig& config);
ModelConfig get_config(const Container& c);

Container to_container(const Checkpoint& ck);
Checkpoint checkpoint_from(const Container& c);
Container to_container(const TwoHeadCheckpoint& ck);
TwoHeadCheckpoint two_head_from(const Container& c);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const TwoHeadCheckpoint& ck);
TwoHeadCheckpoint load_two_head_checkpoint(const std::filesystem::path& path);

}  // namespace ltstream

#endif  // LTSTREAM_CHECKPOINT_H_
