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

// Cardiac query network: text-embedded entity queries attend to ECG token
// features and each query is scored by one shared linear head.

#ifndef LEADWISE_CARDIAC_QUERY_H_
#define LEADWISE_CARDIAC_QUERY_H_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leadwise/layers.h"
#include "leadwise/rng.h"
#include "leadwise/tensor.h"

namespace leadwise::cq {

class QueryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CardiacQueryConfig {
  std::size_t query_dim = 64;  // text embedding width
  std::size_t token_dim = 64;  // ECG token width
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;

  // Throws QueryError on zero sizes or query_dim % num_heads != 0.
  void validate() const;
};

// Pre-norm decoder layer: self-attention over queries, cross-attention onto
// the ECG tokens, then an MLP, each with a residual connection.
struct QueryLayer {
  nn::LayerNorm self_norm, cross_norm, mlp_norm;
  nn::Attention self_attn, cross_attn;
  nn::Mlp mlp;

  nn::Tensor operator()(const nn::Tensor& queries, const nn::Tensor& tokens) const;
};

class CardiacQueryNetwork {
 public:
  static CardiacQueryNetwork create(nn::ParamStore& store,
                                    const CardiacQueryConfig& cfg, Rng& rng,
                                    const std::string& prefix = "cq");

  const CardiacQueryConfig& config() const { return cfg_; }

  // queries: [Q x query_dim], tokens: [K x token_dim] -> logits [Q].
  // Throws QueryError when either set is empty or widths disagree.
  nn::Tensor forward(const nn::Tensor& queries, const nn::Tensor& tokens) const;

 private:
  CardiacQueryConfig cfg_;
  std::vector<QueryLayer> layers_;
  nn::LayerNorm final_norm_;
  nn::Linear head_;  // [query_dim x 1], shared across queries
};

// Mean BCE over queries on logits; labels must be 0 or 1.
nn::Tensor cq_loss(const nn::Tensor& logits, std::span<const double> labels);

// Mean over records of the per-record cq_loss.
nn::Tensor cq_loss_batch(std::span<const nn::Tensor> logits,
                         std::span<const std::vector<double>> labels);

}  // namespace leadwise::cq

#endif  // LEADWISE_CARDIAC_QUERY_H_
