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

#ifndef SEQREWARD_CHECKPOINT_H_
#define SEQREWARD_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace seqreward {

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> values;  // row-major

  bool operator==(const NamedArray&) const = default;
};

// Versioned container of named arrays plus a JSON metadata header.
//
// Binary layout (little-endian):
//   "SQRWCKPT"  u32 version  u64 meta_len  meta_json
//   u64 count   { u32 name_len name  u32 ndim  i64 dims[ndim]
//                 f64 values[prod(dims)] } * count
//
// Values are stored as raw IEEE-754 doubles, so Save/Load round-trips are
// bit-exact.
class Checkpoint {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  // Replaces an existing array with the same name.
  void Put(NamedArray array);
  void PutMatrix(const std::string& name, const Eigen::MatrixXd& m);
  bool Has(const std::string& name) const;
  // Throws ConfigError when absent.
  const NamedArray& Get(const std::string& name) const;
  Eigen::MatrixXd GetMatrix(const std::string& name) const;

  std::string Serialize() const;
  static Checkpoint Deserialize(const std::string& bytes);

  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);

  bool operator==(const Checkpoint&) const = default;

 private:
  nlohmann::json metadata_ = nlohmann::json::object();
  std::vector<NamedArray> arrays_;
};

}  // namespace seqreward

#endif  // SEQREWARD_CHECKPOINT_H_
