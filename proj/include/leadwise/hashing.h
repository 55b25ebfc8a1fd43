// Copyright 2026 The Leadwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LEADWISE_HASHING_H_
#define LEADWISE_HASHING_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace leadwise {

// 64-bit FNV-1a, rendered as 16 lowercase hex digits. Used for content
// fingerprints (vocabularies, configs, parameter snapshots).
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const double> data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
inline std::string content_hash(std::string_view data) {
  return hex64(fnv1a64(data));
}

// SHA-1 of "blob <size>\0<content>", i.e. the object id git would assign.
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

}  // namespace leadwise

#endif  // LEADWISE_HASHING_H_
