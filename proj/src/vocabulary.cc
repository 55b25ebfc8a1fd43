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

#include "leadwise/vocabulary.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "leadwise/hashing.h"

namespace leadwise {

std::string normalize_entity(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) {
    out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  return out;
}

std::optional<std::size_t> EntityVocabulary::index_of(
    std::string_view entity) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i] == entity) return i;
  }
  return std::nullopt;
}

std::optional<std::string> EntityVocabulary::canonical(
    std::string_view raw) const {
  const std::string key = normalize_entity(raw);
  if (auto it = merge_map.find(key); it != merge_map.end()) return it->second;
  if (index_of(key)) return key;
  return std::nullopt;
}

void EntityVocabulary::validate() const {
  std::set<std::string> seen;
  for (const std::string& e : entities) {
    if (e.empty()) throw VocabularyError("empty entity name");
    if (!seen.insert(e).second) throw VocabularyError("duplicate entity: " + e);
  }
  for (const auto& [raw, merged] : merge_map) {
    if (!seen.count(merged)) {
      throw VocabularyError("merge target not in vocabulary: " + raw + " -> " +
                            merged);
    }
  }
  for (const auto& [super, members] : superclasses) {
    if (!seen.count(super)) {
      throw VocabularyError("superclass not in vocabulary: " + super);
    }
    for (const std::string& m : members) {
      if (!seen.count(m)) {
        throw VocabularyError("superclass member not in vocabulary: " + m);
      }
      if (m == super) {
        throw VocabularyError("superclass lists itself as member: " + super);
      }
    }
  }
}

nlohmann::json EntityVocabulary::to_json() const {
  nlohmann::json j;
  j["entities"] = entities;
  j["merge_map"] = merge_map;
  j["superclasses"] = superclasses;
  j["hash"] = hash();
  return j;
}

std::string EntityVocabulary::hash() const {
  nlohmann::json j;
  j["entities"] = entities;
  j["merge_map"] = merge_map;
  j["superclasses"] = superclasses;
  return content_hash(j.dump());
}

EntityVocabulary EntityVocabulary::from_json(const nlohmann::json& j) {
  EntityVocabulary v;
  try {
    v.entities = j.at("entities").get<std::vector<std::string>>();
    v.merge_map = j.value("merge_map", std::map<std::string, std::string>{});
    v.superclasses = j.value("superclasses",
                             std::map<std::string, std::vector<std::string>>{});
  } catch (const nlohmann::json::exception& e) {
    throw VocabularyError(std::string("malformed vocabulary: ") + e.what());
  }
  v.validate();
  if (j.contains("hash") && j["hash"].get<std::string>() != v.hash()) {
    throw VocabularyError("vocabulary hash mismatch");
  }
  return v;
}

void write_vocabulary(const std::filesystem::path& path,
                      const EntityVocabulary& vocab) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw VocabularyError("cannot write " + path.string());
  out << vocab.to_json().dump(2) << "\n";
}

EntityVocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VocabularyError("cannot read " + path.string());
  try {
    return EntityVocabulary::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw VocabularyError(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> LabelVector::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.push_back(i);
  }
  return out;
}

std::vector<double> LabelVector::as_targets() const {
  return std::vector<double>(bits.begin(), bits.end());
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw VocabularyError("invalid base64 length");
  std::string out(3 * text.size() / 4 + 1, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw VocabularyError("invalid base64 payload");
  // EVP_DecodeBlock does not account for '=' padding.
  std::size_t len = static_cast<std::size_t>(n);
  for (std::size_t i = text.size(); i > 0 && text[i - 1] == '='; --i) --len;
  out.resize(len);
  return out;
}

void write_labels(const std::filesystem::path& path,
                  const std::vector<RecordLabels>& labels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw VocabularyError("cannot write " + path.string());
  for (const RecordLabels& r : labels) {
    nlohmann::json j;
    j["record_id"] = r.record_id;
    j["size"] = r.labels.size();
    j["indices"] = r.labels.indices();
    out << j.dump() << "\n";
  }
}

std::vector<RecordLabels> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VocabularyError("cannot read " + path.string());
  std::vector<RecordLabels> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RecordLabels r;
      r.record_id = j.at("record_id").get<std::string>();
      const std::size_t size = j.at("size").get<std::size_t>();
      r.labels.bits.assign(size, 0);
      if (j.contains("indices")) {
        for (std::size_t idx : j["indices"].get<std::vector<std::size_t>>()) {
          if (idx >= size) throw VocabularyError("label index out of range");
          r.labels.bits[idx] = 1;
        }
      } else {
        const std::string raw = base64_decode(j.at("bits").get<std::string>());
        for (std::size_t i = 0; i < size; ++i) {
          const std::size_t byte = i / 8;
          if (byte < raw.size() &&
              (static_cast<unsigned char>(raw[byte]) >> (i % 8)) & 1u) {
            r.labels.bits[i] = 1;
          }
        }
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw VocabularyError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return out;
}

}  // namespace leadwise
