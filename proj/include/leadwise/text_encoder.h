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

// Text towers that map reports and entity names to unit vectors in the
// shared embedding space.

#ifndef LEADWISE_TEXT_ENCODER_H_
#define LEADWISE_TEXT_ENCODER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/http.h"
#include "leadwise/layers.h"
#include "leadwise/rng.h"
#include "leadwise/tensor.h"

namespace leadwise::text {

// Lowercased runs of letters and digits; everything else separates words.
std::vector<std::string> split_words(std::string_view text);

class TextVocabulary {
 public:
  static constexpr std::string_view kUnknown = "[unk]";

  // Id 0 is the unknown token; remaining words sorted for stable ids.
  static TextVocabulary build(std::span<const std::string> corpus);
  static TextVocabulary from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t id(std::string_view word) const;  // 0 when unknown
  // Never empty: text without words becomes the unknown-token singleton.
  std::vector<std::size_t> encode(std::string_view text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t dim() const = 0;
  // Rows are L2-normalized embeddings, [texts x dim]. Differentiable with
  // respect to the encoder's parameters when it is trainable.
  virtual nn::Tensor embed(std::span<const std::string> texts) const = 0;
};

struct ReferenceTextConfig {
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t shared_dim = 64;
};

// Token embeddings -> pre-norm transformer blocks -> mean pool -> P_t.
// Word order is not encoded.
class ReferenceTextEncoder : public TextEncoder {
 public:
  static ReferenceTextEncoder create(nn::ParamStore& store,
                                     const ReferenceTextConfig& cfg,
                                     TextVocabulary vocab, Rng& rng,
                                     const std::string& prefix = "text");

  std::size_t dim() const override { return cfg_.shared_dim; }
  nn::Tensor embed(std::span<const std::string> texts) const override;
  nn::Tensor embed_one(std::string_view text) const;  // [shared_dim]

  const TextVocabulary& vocabulary() const { return vocab_; }
  const ReferenceTextConfig& config() const { return cfg_; }

 private:
  ReferenceTextConfig cfg_;
  TextVocabulary vocab_;
  nn::Tensor token_embeddings_;
  std::vector<nn::EncoderBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Projector projector_;
};

struct ExternalEmbedderConfig {
  std::string url;
  std::string auth_header;  // e.g. "Authorization"; empty for none
  std::string auth_value;
  double timeout_seconds = 30.0;
  int max_retries = 3;
  int initial_backoff_ms = 250;
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 32;
  std::size_t shared_dim = 64;
  // When set, service vectors of another width are mapped to shared_dim by
  // a fixed Gaussian matrix drawn from this seed.
  std::optional<std::uint64_t> projection_seed;
};

// Frozen client for a service answering {"texts": [...]} with
// {"embeddings": [[...], ...]}.
class HttpTextEmbedder : public TextEncoder {
 public:
  explicit HttpTextEmbedder(ExternalEmbedderConfig cfg);

  std::size_t dim() const override { return cfg_.shared_dim; }
  nn::Tensor embed(std::span<const std::string> texts) const override;

 private:
  std::vector<std::vector<double>> request(std::span<const std::string> texts) const;
  std::vector<double> to_shared(std::vector<double> v) const;

  ExternalEmbedderConfig cfg_;
};

// Cosine similarity of two unit vectors.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace leadwise::text

#endif  // LEADWISE_TEXT_ENCODER_H_
