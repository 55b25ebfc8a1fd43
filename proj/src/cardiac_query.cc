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

#include "leadwise/cardiac_query.h"

#include "leadwise/ops.h"

namespace leadwise::cq {

void CardiacQueryConfig::validate() const {
  if (query_dim == 0 || token_dim == 0 || num_layers == 0 || num_heads == 0 ||
      mlp_ratio == 0) {
    throw QueryError("cardiac query sizes must be positive");
  }
  if (query_dim % num_heads != 0) {
    throw QueryError("query_dim must be divisible by num_heads");
  }
}

nn::Tensor QueryLayer::operator()(const nn::Tensor& queries,
                                  const nn::Tensor& tokens) const {
  const nn::Tensor h = self_norm(queries);
  nn::Tensor x = nn::add(queries, self_attn(h, h));
  x = nn::add(x, cross_attn(cross_norm(x), tokens));
  return nn::add(x, mlp(mlp_norm(x)));
}

CardiacQueryNetwork CardiacQueryNetwork::create(nn::ParamStore& store,
                                                const CardiacQueryConfig& cfg,
                                                Rng& rng, const std::string& prefix) {
  cfg.validate();
  CardiacQueryNetwork net;
  net.cfg_ = cfg;
  const std::size_t d = cfg.query_dim;
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    QueryLayer layer;
    layer.self_norm = nn::LayerNorm::create(store, p + ".self_norm", d);
    layer.self_attn = nn::Attention::create(store, p + ".self_attn", d, d, cfg.num_heads, rng);
    layer.cross_norm = nn::LayerNorm::create(store, p + ".cross_norm", d);
    layer.cross_attn = nn::Attention::create(store, p + ".cross_attn", d, cfg.token_dim,
                                             cfg.num_heads, rng);
    layer.mlp_norm = nn::LayerNorm::create(store, p + ".mlp_norm", d);
    layer.mlp = nn::Mlp::create(store, p + ".mlp", d, d * cfg.mlp_ratio, rng);
    net.layers_.push_back(std::move(layer));
  }
  net.final_norm_ = nn::LayerNorm::create(store, prefix + ".norm", d);
  net.head_ = nn::Linear::create(store, prefix + ".head", d, 1, rng);
  return net;
}

nn::Tensor CardiacQueryNetwork::forward(const nn::Tensor& queries,
                                        const nn::Tensor& tokens) const {
  if (queries.rank() != 2 || queries.rows() == 0) throw QueryError("empty query set");
  if (tokens.rank() != 2 || tokens.rows() == 0) throw QueryError("empty token set");
  if (queries.cols() != cfg_.query_dim) throw QueryError("query width mismatch");
  if (tokens.cols() != cfg_.token_dim) throw QueryError("token width mismatch");
  nn::Tensor x = queries;
  for (const QueryLayer& layer : layers_) x = layer(x, tokens);
  const nn::Tensor scores = head_(final_norm_(x));  // [Q x 1]
  const std::vector<std::size_t> column(scores.rows(), 0);
  return nn::pick(scores, column);
}

nn::Tensor cq_loss(const nn::Tensor& logits, std::span<const double> labels) {
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw QueryError("cq_loss: labels must be 0 or 1");
  }
  if (logits.size() != labels.size()) throw QueryError("cq_loss: length mismatch");
  return nn::bce_with_logits(logits, labels);
}

nn::Tensor cq_loss_batch(std::span<const nn::Tensor> logits,
                         std::span<const std::vector<double>> labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw QueryError("cq_loss_batch: need one label vector per record");
  }
  nn::Tensor total = cq_loss(logits[0], labels[0]);
  for (std::size_t i = 1; i < logits.size(); ++i) {
    total = nn::add(total, cq_loss(logits[i], labels[i]));
  }
  return nn::scale(total, 1.0 / static_cast<double>(logits.size()));
}

}  // namespace leadwise::cq
