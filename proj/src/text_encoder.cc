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

#include "leadwise/text_encoder.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <set>
#include <stdexcept>

#include "leadwise/ops.h"

namespace leadwise::text {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

TextVocabulary TextVocabulary::build(std::span<const std::string> corpus) {
  std::set<std::string> seen;
  for (const std::string& text : corpus) {
    for (std::string& w : split_words(text)) seen.insert(std::move(w));
  }
  TextVocabulary v;
  v.words_.emplace_back(kUnknown);
  v.words_.insert(v.words_.end(), seen.begin(), seen.end());
  for (std::size_t i = 0; i < v.words_.size(); ++i) v.index_[v.words_[i]] = i;
  return v;
}

TextVocabulary TextVocabulary::from_json(const nlohmann::json& j) {
  TextVocabulary v;
  v.words_ = j.at("words").get<std::vector<std::string>>();
  if (v.words_.empty() || v.words_[0] != kUnknown) {
    throw std::invalid_argument("text vocabulary must start with the unknown token");
  }
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.index_.emplace(v.words_[i], i).second) {
      throw std::invalid_argument("duplicate word in text vocabulary: " + v.words_[i]);
    }
  }
  return v;
}

nlohmann::json TextVocabulary::to_json() const { return {{"words", words_}}; }

std::size_t TextVocabulary::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::size_t> TextVocabulary::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const std::string& w : split_words(text)) ids.push_back(id(w));
  if (ids.empty()) ids.push_back(0);
  return ids;
}

ReferenceTextEncoder ReferenceTextEncoder::create(nn::ParamStore& store,
                                                  const ReferenceTextConfig& cfg,
                                                  TextVocabulary vocab, Rng& rng,
                                                  const std::string& prefix) {
  if (cfg.embed_dim == 0 || cfg.num_heads == 0 || cfg.embed_dim % cfg.num_heads != 0) {
    throw std::invalid_argument("text embed_dim must be a positive multiple of num_heads");
  }
  ReferenceTextEncoder enc;
  enc.cfg_ = cfg;
  enc.vocab_ = std::move(vocab);
  enc.token_embeddings_ = store.add_normal(
      prefix + ".token_embeddings", {enc.vocab_.size(), cfg.embed_dim}, 0.02, rng);
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    enc.blocks_.push_back(nn::EncoderBlock::create(
        store, prefix + ".block" + std::to_string(i), cfg.embed_dim, cfg.num_heads,
        cfg.mlp_ratio, rng));
  }
  enc.final_norm_ = nn::LayerNorm::create(store, prefix + ".norm", cfg.embed_dim);
  enc.projector_ = nn::Projector::create(store, prefix + ".projector", cfg.embed_dim,
                                         cfg.shared_dim, rng);
  return enc;
}

nn::Tensor ReferenceTextEncoder::embed_one(std::string_view text) const {
  const std::vector<std::size_t> ids = vocab_.encode(text);
  nn::Tensor h = nn::gather_rows(token_embeddings_, ids);
  for (const nn::EncoderBlock& block : blocks_) h = block(h);
  h = final_norm_(h);
  return nn::l2_normalize(projector_(nn::mean_pool(h, 0)));
}

nn::Tensor ReferenceTextEncoder::embed(std::span<const std::string> texts) const {
  if (texts.empty()) throw std::invalid_argument("embed: no texts");
  std::vector<nn::Tensor> rows;
  rows.reserve(texts.size());
  for (const std::string& t : texts) rows.push_back(embed_one(t));
  return nn::concat(rows, 0);
}

HttpTextEmbedder::HttpTextEmbedder(ExternalEmbedderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.url.empty()) throw std::invalid_argument("external embedder URL is empty");
  if (cfg_.max_in_flight == 0 || cfg_.batch_size == 0 || cfg_.shared_dim == 0) {
    throw std::invalid_argument("external embedder sizes must be positive");
  }
}

std::vector<std::vector<double>> HttpTextEmbedder::request(
    std::span<const std::string> texts) const {
  HttpOptions opts;
  opts.timeout_seconds = cfg_.timeout_seconds;
  opts.max_retries = cfg_.max_retries;
  opts.initial_backoff_ms = cfg_.initial_backoff_ms;
  if (!cfg_.auth_header.empty()) opts.headers.emplace_back(cfg_.auth_header, cfg_.auth_value);
  const nlohmann::json body = {
      {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const nlohmann::json reply = post_json(cfg_.url, body, opts);
  std::vector<std::vector<double>> out;
  try {
    out = reply.at("embeddings").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw HttpError(std::string("embedder reply lacks embeddings: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw HttpError("embedder returned " + std::to_string(out.size()) +
                    " vectors for " + std::to_string(texts.size()) + " texts");
  }
  return out;
}

std::vector<double> HttpTextEmbedder::to_shared(std::vector<double> v) const {
  const std::size_t d = cfg_.shared_dim;
  if (v.size() != d) {
    if (!cfg_.projection_seed) {
      throw std::runtime_error("embedder dimension " + std::to_string(v.size()) +
                               " != shared dimension " + std::to_string(d) +
                               " and no projection is configured");
    }
    // The matrix depends only on (seed, input width), so it is fixed across calls.
    Rng rng = Rng::stream(*cfg_.projection_seed, v.size());
    std::vector<double> projected(d, 0.0);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (double x : v) {
      for (std::size_t j = 0; j < d; ++j) projected[j] += x * s * rng.normal();
    }
    v = std::move(projected);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::runtime_error("embedder returned a zero or non-finite vector");
  }
  for (double& x : v) x /= norm;
  return v;
}

nn::Tensor HttpTextEmbedder::embed(std::span<const std::string> texts) const {
  if (texts.empty()) throw std::invalid_argument("embed: no texts");
  std::vector<std::span<const std::string>> batches;
  for (std::size_t i = 0; i < texts.size(); i += cfg_.batch_size) {
    batches.push_back(texts.subspan(i, std::min(cfg_.batch_size, texts.size() - i)));
  }
  std::vector<std::vector<std::vector<double>>> replies(batches.size());
  // At most max_in_flight requests at a time.
  for (std::size_t wave = 0; wave < batches.size(); wave += cfg_.max_in_flight) {
    std::vector<std::future<std::vector<std::vector<double>>>> pending;
    const std::size_t end = std::min(batches.size(), wave + cfg_.max_in_flight);
    for (std::size_t b = wave; b < end; ++b) {
      pending.push_back(std::async(std::launch::async,
                                   [this, batch = batches[b]] { return request(batch); }));
    }
    for (std::size_t b = wave; b < end; ++b) replies[b] = pending[b - wave].get();
  }
  std::vector<double> flat;
  flat.reserve(texts.size() * cfg_.shared_dim);
  for (auto& reply : replies) {
    for (auto& v : reply) {
      const std::vector<double> unit = to_shared(std::move(v));
      flat.insert(flat.end(), unit.begin(), unit.end());
    }
  }
  return nn::Tensor::from_values({texts.size(), cfg_.shared_dim}, std::move(flat));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace leadwise::text
