// Copyright 2026 The seqreward Authors. All rights reserved.
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

#include "seqreward/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "seqreward/errors.h"

namespace seqreward {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'Q', 'R', 'W', 'C', 'K', 'P', 'T'};

template <typename T>
void Append(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Read() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string ReadBytes(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint truncated");
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

}  // namespace

void Checkpoint::Put(NamedArray array) {
  std::int64_t count = 1;
  for (auto d : array.shape) count *= d;
  if (count != static_cast<std::int64_t>(array.values.size())) {
    throw ContractViolation("checkpoint array " + array.name +
                            ": shape does not match value count");
  }
  for (auto& a : arrays_) {
    if (a.name == array.name) {
      a = std::move(array);
      return;
    }
  }
  arrays_.push_back(std::move(array));
}

void Checkpoint::PutMatrix(const std::string& name, const Eigen::MatrixXd& m) {
  NamedArray a{name, {m.rows(), m.cols()}, {}};
  a.values.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.values.push_back(m(r, c));
  Put(std::move(a));
}

bool Checkpoint::Has(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return true;
  return false;
}

const NamedArray& Checkpoint::Get(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw ConfigError("checkpoint has no array named " + name);
}

Eigen::MatrixXd Checkpoint::GetMatrix(const std::string& name) const {
  const NamedArray& a = Get(name);
  if (a.shape.size() != 2) {
    throw ConfigError("checkpoint array " + name + " is not a matrix");
  }
  Eigen::MatrixXd m(a.shape[0], a.shape[1]);
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.values[k++];
  return m;
}

std::string Checkpoint::Serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  Append<std::uint32_t>(out, kFormatVersion);
  const std::string meta = metadata_.dump();
  Append<std::uint64_t>(out, meta.size());
  out += meta;
  Append<std::uint64_t>(out, arrays_.size());
  for (const auto& a : arrays_) {
    Append<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    Append<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) Append<std::int64_t>(out, d);
    for (double v : a.values) Append<double>(out, v);
  }
  return out;
}

Checkpoint Checkpoint::Deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.ReadBytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ConfigError("not a seqreward checkpoint");
  }
  const auto version = r.Read<std::uint32_t>();
  if (version != kFormatVersion) {
    throw ConfigError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  Checkpoint ckpt;
  const auto meta_len = r.Read<std::uint64_t>();
  try {
    ckpt.metadata_ = nlohmann::json::parse(r.ReadBytes(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint metadata: ") + e.what());
  }
  const auto count = r.Read<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.ReadBytes(r.Read<std::uint32_t>());
    const auto ndim = r.Read<std::uint32_t>();
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      a.shape.push_back(r.Read<std::int64_t>());
      if (a.shape.back() < 0) throw ConfigError("negative checkpoint dim");
      n *= a.shape.back();
    }
    a.values.resize(n);
    for (auto& v : a.values) v = r.Read<double>();
    ckpt.arrays_.push_back(std::move(a));
  }
  if (!r.AtEnd()) throw ConfigError("trailing bytes in checkpoint");
  return ckpt;
}

void Checkpoint::Save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  const std::string bytes = Serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

}  // namespace seqreward
