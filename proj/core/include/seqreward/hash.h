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

#ifndef SEQREWARD_HASH_H_
#define SEQREWARD_HASH_H_

#include <filesystem>
#include <string>
#include <string_view>

namespace seqreward {

// Lowercase hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view bytes);

// SHA-256 of a file's contents. Throws ConfigError if unreadable.
std::string Sha256File(const std::filesystem::path& path);

// First 16 hex characters; used in manifests and file names.
inline std::string ShortHash(const std::string& hex) { return hex.substr(0, 16); }

}  // namespace seqreward

#endif  // SEQREWARD_HASH_H_
