// ltstream/src/checkpoint.cc
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

#include "ltstream/checkpoint.h"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ltstream {

const Tensor& Container::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("container has no tensor '" + name + "'");
}

const std::string& Container::get(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("container has no metadata key '" + key + "'");
  return it->second;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}
  std::uint64_t uint(int bytes) {
    need(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::string str() {
    const std::size_t n = uint(4);
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > b_.size())
      throw FormatError("truncated container at byte " + std::to_string(pos_));
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode(const Container& c) {
  std::string out(kContainerMagic, 4);
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Container decode(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kContainerMagic, 4) != 0)
    throw FormatError("not an LTCK container (bad magic)");
  Reader r(bytes);
  r.uint(4);
  const std::uint64_t version = r.uint(4);
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version));
  Container c;
  const std::size_t n_meta = r.uint(4);
  for (std::size_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    c.meta[k] = r.str();
  }
  const std::size_t n_tensors = r.uint(4);
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::size_t rank = r.uint(4);
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + name + "' has bad rank");
    Shape shape;
    std::size_t n = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      shape.push_back(r.uint(8));
      if (shape.back() == 0 || shape.back() > (std::size_t{1} << 32))
        throw FormatError("tensor '" + name + "' has bad extent");
      n *= shape.back();
    }
    std::vector<double> data(n);
    for (double& v : data) v = std::bit_cast<double>(r.uint(8));
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw FormatError("trailing bytes after container");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = encode(c);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed for '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode(ss.str());
}

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "-inf") return -INFINITY;
  if (s == "inf") return INFINITY;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

std::string format_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(parse_double(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void put_config(Container& c, const ModelConfig& config) {
  c.meta["config.num_layers"] = std::to_string(config.num_layers);
  c.meta["config.hidden_dim"] = std::to_string(config.hidden_dim);
  c.meta["config.proj_dim"] = std::to_string(config.proj_dim);
  c.meta["config.input_dim"] = std::to_string(config.input_dim);
  c.meta["config.num_senones"] = std::to_string(config.num_senones);
  c.meta["config.tau"] = std::to_string(config.tau);
  c.meta["config.variant"] = std::string(to_string(config.variant));
  c.meta["config.learn_current_context"] = config.learn_current_context ? "1" : "0";
}

namespace {

std::size_t get_size(const Container& c, const std::string& key) {
  const std::string& s = c.get(key);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError("bad integer for " + key);
  return static_cast<std::size_t>(v);
}

template <class Visit>
void load_tensors(const Container& c, Visit&& visit) {
  std::size_t seen = 0;
  visit([&](const std::string& name, Tensor& t) {
    const Tensor& stored = c.tensor(name);
    if (stored.shape() != t.shape())
      throw FormatError("tensor '" + name + "' has shape " + shape_string(stored.shape()) +
                        ", config implies " + shape_string(t.shape()));
    t = stored;
    ++seen;
  });
  if (seen != c.tensors.size()) throw FormatError("container holds unexpected tensors");
}

}  // namespace

ModelConfig get_config(const Container& c) {
  ModelConfig config;
  config.num_layers = get_size(c, "config.num_layers");
  config.hidden_dim = get_size(c, "config.hidden_dim");
  config.proj_dim = get_size(c, "config.proj_dim");
  config.input_dim = get_size(c, "config.input_dim");
  config.num_senones = get_size(c, "config.num_senones");
  config.tau = get_size(c, "config.tau");
  config.variant = parse_variant(c.get("config.variant"));
  config.learn_current_context = c.get("config.learn_current_context") == "1";
  config.validate();
  return config;
}

Container to_container(const Checkpoint& ck) {
  Container c;
  c.meta["kind"] = "model";
  put_config(c, ck.model.config);
  c.meta["stage"] = ck.stage;
  c.meta["seed"] = std::to_string(ck.seed);
  c.meta["epoch"] = std::to_string(ck.epoch);
  c.meta["train_loss"] = format_doubles(ck.train_loss);
  c.meta["valid_loss"] = format_doubles(ck.valid_loss);
  for_each_param(ck.model, [&](const std::string& name, const Tensor& t) {
    c.tensors.emplace_back(name, t);
  });
  return c;
}

Checkpoint checkpoint_from(const Container& c) {
  if (c.get("kind") != "model") throw FormatError("container is not a model checkpoint");
  Checkpoint ck;
  ck.model = LayerTrajectoryModel::zeros(get_config(c));
  load_tensors(c, [&](auto&& f) { for_each_param(ck.model, f); });
  ck.stage = c.get("stage");
  ck.seed = get_size(c, "seed");
  ck.epoch = get_size(c, "epoch");
  ck.train_loss = parse_doubles(c.get("train_loss"));
  ck.valid_loss = parse_doubles(c.get("valid_loss"));
  return ck;
}

Container to_container(const TwoHeadCheckpoint& ck) {
  Container c;
  c.meta["kind"] = "two_head";
  put_config(c, ck.model.config);
  c.meta["frozen_shared"] = ck.model.frozen_shared ? "1" : "0";
  c.meta["stage"] = ck.stage;
  c.meta["seed"] = std::to_string(ck.seed);
  c.meta["train_loss"] = format_doubles(ck.train_loss);
  c.meta["valid_loss"] = format_doubles(ck.valid_loss);
  for_each_two_head_param(ck.model, [&](const std::string& name, const Tensor& t) {
    c.tensors.emplace_back(name, t);
  });
  return c;
}

TwoHeadCheckpoint two_head_from(const Container& c) {
  if (c.get("kind") != "two_head") throw FormatError("container is not a two-head checkpoint");
  TwoHeadCheckpoint ck;
  ck.model.config = get_config(c);
  LayerTrajectoryModel clt = LayerTrajectoryModel::zeros(ck.model.config);
  ck.model.shared = clt.time;
  ck.model.head_clt = clt.head;
  ck.model.head_lt = zero_head(ck.model.lt_config());
  ck.model.frozen_shared = c.get("frozen_shared") == "1";
  load_tensors(c, [&](auto&& f) { for_each_two_head_param(ck.model, f); });
  ck.stage = c.get("stage");
  ck.seed = get_size(c, "seed");
  ck.train_loss = parse_doubles(c.get("train_loss"));
  ck.valid_loss = parse_doubles(c.get("valid_loss"));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_container(path, to_container(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from(read_container(path));
}

void save_checkpoint(const std::filesystem::path& path, const TwoHeadCheckpoint& ck) {
  write_container(path, to_container(ck));
}

TwoHeadCheckpoint load_two_head_checkpoint(const std::filesystem::path& path) {
  return two_head_from(read_container(path));
}

}  // namespace ltstream
