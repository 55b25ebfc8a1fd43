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

// Run configuration: every module config plus seeds, output location, and
// ablation toggles, read from JSON and adjusted with dotted-path overrides.

#ifndef LEADWISE_RUN_CONFIG_H_
#define LEADWISE_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/evaluation.h"
#include "leadwise/model.h"
#include "leadwise/training.h"

namespace leadwise {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  int pretrain_records = 64;
  int num_classes = 4;
  double pretrain_valid_fraction = 0.0;
  int downstream_records = 96;
  double downstream_valid_fraction = 1.0 / 6.0;
  double downstream_test_fraction = 1.0 / 3.0;
};

struct LlmSettings {
  std::string url;  // chat-completion endpoint
  std::string model;
  double temperature = 0.0;
  int max_retries = 3;
  int initial_backoff_ms = 500;
  double timeout_seconds = 120.0;
  std::string auth_header = "Authorization";
  std::string auth_env = "LEADWISE_LLM_TOKEN";  // variable holding the token
  std::string auth_prefix = "Bearer ";
};

struct MinerConfig {
  std::string client = "rule";  // "rule" or "llm"
  std::string rules_path;       // empty = built-in tables
  LlmSettings llm;
  bool cache = true;
  int max_parse_retries = 2;
  std::size_t concurrency = 1;
};

struct EvalConfig {
  std::vector<std::string> class_names;  // empty = downstream manifest classes
  std::string checkpoint = "final";      // "final" or "best"
  std::string lead_mode = "native";      // "native" or "zero_pad"
  std::string sweep_mode = "zero_shot";  // "zero_shot" or "probe"
  double overlap_threshold = 0.95;
};

struct GradcheckConfig {
  std::size_t records = 2;
  std::size_t embed_dim = 8;
  std::size_t num_layers = 1;
  std::size_t num_heads = 2;
  std::size_t token_length = 25;
  std::size_t segments = 8;
  double threshold = 1e-4;
  std::size_t max_coords_per_tensor = 0;  // 0 = every coordinate
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "runs/default";
  DataConfig data;
  MinerConfig miner;
  ModelConfig model;
  train::PretrainConfig train;
  eval::ProbeConfig probe;
  EvalConfig eval;
  GradcheckConfig gradcheck;

  // Desk-scale defaults: 300 optimizer steps at lr 1e-3 with 30 warmup steps.
  RunConfig();

  // Seeds derived from `seed`.
  std::uint64_t pretrain_data_seed() const { return seed; }
  std::uint64_t downstream_data_seed() const { return seed + 1; }

  // Throws ConfigError on inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;
  nlohmann::json seeds_json() const;
  // Starts from defaults; unknown keys and mistyped values throw ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  // Sets a dotted path ("train.mask_ratio") or a short alias
  // ("mask_ratio") to `value`, parsed as JSON when possible and as a string
  // otherwise. Setting model.encoder.token_length also rescales segments so
  // records keep their length.
  void set(std::string_view key, std::string_view value);
};

// Expands short ablation aliases to dotted paths.
std::string resolve_config_key(std::string_view key);

}  // namespace leadwise

#endif  // LEADWISE_RUN_CONFIG_H_
