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

// The pretrained model: ECG encoder, reference text encoder, and cardiac
// query network sharing one parameter store, plus checkpoint I/O.

#ifndef LEADWISE_MODEL_H_
#define LEADWISE_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/cardiac_query.h"
#include "leadwise/checkpoint.h"
#include "leadwise/ecg_data.h"
#include "leadwise/lead_encoder.h"
#include "leadwise/text_encoder.h"

namespace leadwise {

struct ModelConfig {
  encoder::TokenizerConfig encoder;
  text::ReferenceTextConfig text;
  cq::CardiacQueryConfig query;

  // Throws std::invalid_argument when tower widths disagree.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys throw.
  static ModelConfig from_json(const nlohmann::json& j);
  // Sets query widths from the encoder and text configs.
  ModelConfig& tie_widths();
};

class LeadwiseModel {
 public:
  static LeadwiseModel create(const ModelConfig& cfg, text::TextVocabulary vocab,
                              std::uint64_t seed);
  // Rebuilds the model described by a checkpoint and restores its weights.
  static LeadwiseModel load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {}) const;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const encoder::EcgEncoder& ecg() const { return ecg_; }
  const text::ReferenceTextEncoder& text() const { return text_; }
  const cq::CardiacQueryNetwork& query() const { return query_; }

  // Hash of parameter values, and of config plus text vocabulary.
  std::string parameter_hash() const;
  std::string config_hash() const;

  // Per-class logits for one record against precomputed query embeddings.
  nn::Tensor score(const encoder::TokenGrid& grid, const nn::Tensor& queries) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  encoder::EcgEncoder ecg_;
  text::ReferenceTextEncoder text_;
  cq::CardiacQueryNetwork query_;
};

// Per-lead standardization applied to every record before tokenization.
ecg::EcgRecord prepare_record(const ecg::EcgRecord& rec);

// Text vocabulary over training reports and entity names.
text::TextVocabulary build_text_vocabulary(std::span<const std::string> reports,
                                           std::span<const std::string> entities);

}  // namespace leadwise

#endif  // LEADWISE_MODEL_H_
