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

#ifndef LEADWISE_VOCABULARY_H_
#define LEADWISE_VOCABULARY_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace leadwise {

class VocabularyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lowercase, collapse internal whitespace, trim, strip trailing punctuation.
std::string normalize_entity(std::string_view raw);

// Mined cardiac-entity vocabulary with synonym and hierarchy structure.
struct EntityVocabulary {
  std::vector<std::string> entities;                // ordered, unique
  std::map<std::string, std::string> merge_map;     // raw -> canonical
  std::map<std::string, std::vector<std::string>> superclasses;

  std::size_t size() const { return entities.size(); }
  std::optional<std::size_t> index_of(std::string_view entity) const;
  // Resolves a raw mention through merge_map (or identity when the raw string
  // is itself an entity).
  std::optional<std::string> canonical(std::string_view raw) const;

  // Throws VocabularyError when an invariant is violated.
  void validate() const;
  std::string hash() const;

  nlohmann::json to_json() const;  // includes "hash"
  static EntityVocabulary from_json(const nlohmann::json& j);
};

void write_vocabulary(const std::filesystem::path& path,
                      const EntityVocabulary& vocab);
EntityVocabulary read_vocabulary(const std::filesystem::path& path);

// Binary label vector aligned with EntityVocabulary::entities.
struct LabelVector {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  std::vector<std::size_t> indices() const;
  std::vector<double> as_targets() const;
  bool operator==(const LabelVector&) const = default;
};

struct RecordLabels {
  std::string record_id;
  LabelVector labels;
};

// JSON lines: {"record_id": ..., "indices": [...], "size": Q}. Reading also
// accepts {"record_id": ..., "bits": "<base64 little-endian bitset>", "size": Q}.
void write_labels(const std::filesystem::path& path,
                  const std::vector<RecordLabels>& labels);
std::vector<RecordLabels> read_labels(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace leadwise

#endif  // LEADWISE_VOCABULARY_H_
