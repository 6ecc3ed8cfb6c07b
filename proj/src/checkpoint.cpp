// Copyright 2026 The G2GT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "g2gt/pipeline.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace g2gt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', '2', 'G', 'T', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError(source_ + ": checkpoint payload is truncated");
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> model_settings(const Checkpoint& c) {
  const ModelConfig& m = c.model.config();
  std::map<std::string, std::string> kv;
  kv["d"] = std::to_string(m.encoder.d);
  kv["heads"] = std::to_string(m.encoder.heads);
  kv["d_ff"] = std::to_string(m.encoder.d_ff);
  kv["layers"] = std::to_string(m.encoder.layers);
  kv["use_key_term"] = m.encoder.use_key_term ? "1" : "0";
  kv["use_value_term"] = m.encoder.use_value_term ? "1" : "0";
  kv["freeze_none_relation"] = m.encoder.freeze_none_relation ? "1" : "0";
  std::ostringstream eps;
  eps.precision(17);
  eps << m.encoder.layer_norm_eps;
  kv["layer_norm_eps"] = eps.str();
  kv["edge_dim"] = std::to_string(m.edge_dim);
  kv["vocab_size"] = std::to_string(m.vocab_size);
  kv["max_positions"] = std::to_string(m.max_positions);
  kv["task"] = m.task == TaskKind::kDependency ? "dependency" : "coreference";
  kv["input_mode"] = m.input_mode == GraphInputMode::kLabeled ? "labeled" : "unlabeled";
  kv["t_max"] = std::to_string(c.refinement.t_max);
  kv["t_train"] = std::to_string(c.refinement.t_train);
  return kv;
}

const std::string& setting(const std::map<std::string, std::string>& kv, const std::string& key,
                           const std::string& source) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError(source + ": checkpoint lacks setting '" + key + "'");
  return it->second;
}

Index setting_int(const std::map<std::string, std::string>& kv, const std::string& key,
                  const std::string& source) {
  try {
    return std::stoll(setting(kv, key, source));
  } catch (const std::logic_error&) {
    throw DataError(source + ": checkpoint setting '" + key + "' is not an integer");
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  Writer w;
  const auto kv = model_settings(c);
  w.pod(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(c.vocab.tokens().size()));
  for (const auto& t : c.vocab.tokens()) w.str(t);
  w.pod(static_cast<std::uint32_t>(c.vocab.deprels().size()));
  for (const auto& d : c.vocab.deprels()) w.str(d);

  const ParameterSet& params = c.model.params();
  w.pod(static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    w.str(p.name);
    w.pod(static_cast<std::uint8_t>(p.trainable ? 1 : 0));
    const Shape& shape = p.tensor.shape();
    w.pod(static_cast<std::uint32_t>(shape.size()));
    for (Index e : shape) w.pod(static_cast<std::uint64_t>(e));
    const Matrix& v = p.tensor.value();
    for (Index k = 0; k < v.size(); ++k) w.pod(v.data()[k]);
  }

  const std::string& payload = w.bytes();
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t size = payload.size();
  const std::uint64_t checksum = fnv1a(payload);
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&size), sizeof(size));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(source + ": not a checkpoint file (bad magic)");
  }
  std::uint32_t version = 0;
  std::uint64_t size = 0;
  if (!in.read(reinterpret_cast<char*>(&version), sizeof(version))) {
    throw DataError(source + ": checkpoint header is truncated");
  }
  if (version != kCheckpointVersion) {
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (!in.read(reinterpret_cast<char*>(&size), sizeof(size))) {
    throw DataError(source + ": checkpoint header is truncated");
  }
  if (size > (std::uint64_t{1} << 36)) throw DataError(source + ": implausible payload size");
  std::string payload(size, '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(size))) {
    throw DataError(source + ": checkpoint payload is truncated");
  }
  std::uint64_t checksum = 0;
  if (!in.read(reinterpret_cast<char*>(&checksum), sizeof(checksum))) {
    throw DataError(source + ": checkpoint checksum is missing");
  }
  if (checksum != fnv1a(payload)) throw DataError(source + ": checkpoint checksum mismatch");

  Reader r(payload, source);
  std::map<std::string, std::string> kv;
  const auto settings = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < settings; ++i) {
    std::string k = r.str();
    kv[k] = r.str();
  }
  std::vector<std::string> tokens(r.pod<std::uint32_t>());
  for (auto& t : tokens) t = r.str();
  std::vector<std::string> deprels(r.pod<std::uint32_t>());
  for (auto& d : deprels) d = r.str();

  ParameterSet params;
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const bool trainable = r.pod<std::uint8_t>() != 0;
    Shape shape(r.pod<std::uint32_t>());
    for (auto& e : shape) e = static_cast<Index>(r.pod<std::uint64_t>());
    const Index numel = shape_numel(shape);
    if (numel < 0 || numel > (Index{1} << 32)) throw DataError(source + ": implausible shape");
    Matrix data(1, numel);
    r.raw(data.data(), static_cast<std::size_t>(numel) * sizeof(Scalar));
    params.add(name, std::move(data), std::move(shape), trainable);
  }
  if (!r.done()) throw DataError(source + ": trailing bytes in checkpoint payload");

  ModelConfig m;
  m.encoder.d = setting_int(kv, "d", source);
  m.encoder.heads = setting_int(kv, "heads", source);
  m.encoder.d_ff = setting_int(kv, "d_ff", source);
  m.encoder.layers = setting_int(kv, "layers", source);
  m.encoder.use_key_term = setting_int(kv, "use_key_term", source) != 0;
  m.encoder.use_value_term = setting_int(kv, "use_value_term", source) != 0;
  m.encoder.freeze_none_relation = setting_int(kv, "freeze_none_relation", source) != 0;
  m.encoder.layer_norm_eps = std::stod(setting(kv, "layer_norm_eps", source));
  m.edge_dim = setting_int(kv, "edge_dim", source);
  m.vocab_size = setting_int(kv, "vocab_size", source);
  m.max_positions = setting_int(kv, "max_positions", source);
  m.task = setting(kv, "task", source) == "dependency" ? TaskKind::kDependency
                                                       : TaskKind::kCoreference;
  m.input_mode = setting(kv, "input_mode", source) == "labeled" ? GraphInputMode::kLabeled
                                                                : GraphInputMode::kUnlabeled;
  RefinementConfig refinement;
  refinement.t_max = static_cast<int>(setting_int(kv, "t_max", source));
  refinement.t_train = static_cast<int>(setting_int(kv, "t_train", source));

  Vocab vocab = Vocab::from_tables(std::move(tokens), std::move(deprels));
  try {
    G2GTModel model(m, vocab.relations(), std::move(params));
    return Checkpoint{std::move(vocab), refinement, std::move(model)};
  } catch (const ValueError& e) {
    throw DataError(source + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, checkpoint);
  out.flush();
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace g2gt
