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

// Lead-aware ECG encoder. Each lead is cut into M segments of p samples;
// every segment becomes one token carrying a lead embedding and a temporal
// embedding. Masked tokens are dropped before the transformer, so a record
// that never had a lead and one whose lead was masked encode identically.

#ifndef LEADWISE_LEAD_ENCODER_H_
#define LEADWISE_LEAD_ENCODER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "leadwise/ecg_data.h"
#include "leadwise/layers.h"
#include "leadwise/rng.h"
#include "leadwise/tensor.h"

namespace leadwise::encoder {

class EncoderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TokenizerConfig {
  std::size_t token_length = 100;  // p
  std::size_t segments = 50;       // M; signals must hold exactly p * M samples
  std::size_t embed_dim = 64;      // d
  std::size_t num_layers = 3;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t shared_dim = 64;  // output of the projector

  std::size_t signal_length() const { return token_length * segments; }
  // Throws EncoderError on zero sizes or embed_dim % num_heads != 0.
  void validate() const;
};

// Raw segments of the present leads, rows in canonical lead order.
struct TokenGrid {
  std::size_t token_length = 0;
  std::size_t segments = 0;
  std::vector<int> lead_ids;       // one per row
  std::vector<double> samples;     // [rows x segments x token_length]
  std::vector<std::uint8_t> keep;  // [rows x segments]

  std::size_t num_rows() const { return lead_ids.size(); }
  bool kept(std::size_t row, std::size_t segment) const {
    return keep[row * segments + segment] != 0;
  }
  std::size_t kept_in_row(std::size_t row) const;
  std::size_t kept_count() const;
};

TokenGrid tokenize(const ecg::EcgRecord& rec, const TokenizerConfig& cfg);

// Removes the rows of `leads`; leads absent from the grid are ignored.
TokenGrid mask_leads(const TokenGrid& grid, std::span<const int> leads);

// Drops a count drawn uniformly from [min_masked, max_masked] of distinct
// leads chosen uniformly. Requires a full 12-lead grid.
TokenGrid dynamic_lead_mask(const TokenGrid& grid, Rng& rng, int min_masked = 9,
                            int max_masked = 11);

// Masks floor(ratio * M) distinct segments in every row, independently per
// row. Requires 0 <= ratio < 1.
TokenGrid segment_mask(const TokenGrid& grid, Rng& rng, double ratio = 0.25);

std::size_t masked_per_lead(std::size_t segments, double ratio);

struct EncodeOutput {
  nn::Tensor tokens;     // z_e: [kept x d], lead-major, segment-minor
  nn::Tensor features;   // mean over kept tokens: [d]
  nn::Tensor embedding;  // L2-normalized projector output: [shared_dim]
  std::vector<int> leads_used;
};

class EcgEncoder {
 public:
  // Registers parameters under `prefix` in `store`.
  static EcgEncoder create(nn::ParamStore& store, const TokenizerConfig& cfg,
                           Rng& rng, const std::string& prefix = "ecg");

  const TokenizerConfig& config() const { return cfg_; }

  // Token embeddings of the kept tokens before the transformer:
  // W x + b + lead_embedding[l] + temporal_embedding[m].
  nn::Tensor embed_tokens(const TokenGrid& grid) const;
  // Throws EncoderError when no token is kept.
  EncodeOutput encode(const TokenGrid& grid) const;

  const nn::Tensor& lead_embeddings() const { return lead_embeddings_; }
  const nn::Tensor& temporal_embeddings() const { return temporal_embeddings_; }

 private:
  TokenizerConfig cfg_;
  nn::Linear patch_;
  nn::Tensor lead_embeddings_;      // [12 x d]
  nn::Tensor temporal_embeddings_;  // [M x d]
  std::vector<nn::EncoderBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Projector projector_;
};

}  // namespace leadwise::encoder

#endif  // LEADWISE_LEAD_ENCODER_H_
