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

// Turns free-text reports into an entity vocabulary and per-report label
// vectors in three prompted stages: extraction with verification, synonym
// merging, and superclass aggregation.

#ifndef LEADWISE_KNOWLEDGE_MINER_H_
#define LEADWISE_KNOWLEDGE_MINER_H_

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/http.h"
#include "leadwise/vocabulary.h"

namespace leadwise::miner {

class MinerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using MergeMap = std::map<std::string, std::string>;
using SuperclassMap = std::map<std::string, std::vector<std::string>>;

// --- Prompts ---------------------------------------------------------------

std::string extraction_prompt(std::string_view report);
std::string verification_prompt(std::string_view report, std::string_view entity);
std::string merge_prompt(std::span<const std::string> entities);
std::string superclass_prompt(std::span<const std::string> entities);

// --- Clients ---------------------------------------------------------------

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  // Identifies everything besides the prompt that determines a response.
  virtual std::string identity() const = 0;
  // Drops any stored response for `prompt` before a retry.
  virtual void forget(const std::string& /*prompt*/) {}
};

struct LlmClientConfig {
  std::string url;  // chat-completion endpoint
  std::string model;
  double temperature = 0.0;
  int max_retries = 3;
  int initial_backoff_ms = 500;
  double timeout_seconds = 120.0;
  std::string auth_header = "Authorization";
  std::string auth_value;  // e.g. "Bearer <token>"; empty for none
  std::filesystem::path cache_dir;  // empty disables caching
};

// POSTs {"model", "messages": [{"role": "user", "content"}], "temperature"}
// and returns choices[0].message.content. Thread-safe.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(LlmClientConfig cfg);
  std::string complete(const std::string& prompt) override;
  std::string identity() const override;

 private:
  LlmClientConfig cfg_;
};

struct RuleTables {
  std::vector<std::string> dictionary;          // recognizable terms
  std::map<std::string, std::string> synonyms;  // term -> merged name
  SuperclassMap hierarchy;                      // superclass -> subtypes
  // A cue earlier in the same clause marks a term as negated.
  std::vector<std::string> negation_cues;

  static RuleTables from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Clinical terms plus the synthetic classes of the ecg-data generator.
RuleTables default_rules();

// Deterministic offline client that answers the four prompts from tables.
class RuleBasedClient : public ChatClient {
 public:
  explicit RuleBasedClient(RuleTables tables);
  std::string complete(const std::string& prompt) override;
  std::string identity() const override;

  // Longest-match, non-negated dictionary terms in order of appearance.
  std::vector<std::string> find_terms(std::string_view report) const;

 private:
  RuleTables tables_;
  std::vector<std::string> terms_;  // dictionary plus synonym keys, normalized
};

// Serves repeated (identity, prompt) pairs from JSON files in `dir`.
class CachingChatClient : public ChatClient {
 public:
  CachingChatClient(ChatClient& inner, std::filesystem::path dir);
  std::string complete(const std::string& prompt) override;
  std::string identity() const override { return inner_.identity(); }
  void forget(const std::string& prompt) override;

  int hits() const { return hits_; }
  int misses() const { return misses_; }

 private:
  std::filesystem::path entry_path(const std::string& prompt) const;

  ChatClient& inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
  int hits_ = 0;
  int misses_ = 0;
};

// --- Pipeline --------------------------------------------------------------

struct MinerOptions {
  int max_parse_retries = 2;
  std::size_t concurrency = 1;  // reports extracted in parallel
};

// Parses "[a, b]" with or without quotes. Throws MinerError without brackets.
std::vector<std::string> parse_entity_list(std::string_view reply);

// Extraction, YES/NO verification of every candidate, then the substring
// guard. Returned entities are normalized and unique.
std::vector<std::string> extract_entities(std::string_view report, ChatClient& client,
                                          const MinerOptions& options = {});

// Total map over `entities`; unmentioned entities map to themselves.
MergeMap merge_entities(std::span<const std::string> entities, ChatClient& client,
                        const MinerOptions& options = {});

// Members outside `entities` are dropped; superclasses without members too.
SuperclassMap aggregate_superclasses(std::span<const std::string> entities,
                                     ChatClient& client,
                                     const MinerOptions& options = {});

// Sorted canonical entities followed by sorted superclasses that are new.
EntityVocabulary build_vocabulary(const MergeMap& merge_map,
                                  const SuperclassMap& superclasses);

// Sets bits for the canonical forms of `entities` and closes the result
// under the superclass relation. Unknown entities are ignored.
LabelVector label_report(std::span<const std::string> entities,
                         const EntityVocabulary& vocab);

struct MiningResult {
  std::vector<std::vector<std::string>> extracted;  // per report
  MergeMap merge_map;
  SuperclassMap superclasses;
  EntityVocabulary vocabulary;
  std::vector<LabelVector> labels;  // per report
};

MiningResult mine_corpus(std::span<const std::string> reports, ChatClient& client,
                         const MinerOptions& options = {});

}  // namespace leadwise::miner

#endif  // LEADWISE_KNOWLEDGE_MINER_H_
