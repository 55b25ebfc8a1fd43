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

#include "leadwise/model.h"

#include <set>
#include <stdexcept>

#include "leadwise/hashing.h"

namespace leadwise {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("unknown key " + where + "." + key);
  }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  query.validate();
  if (text.embed_dim == 0 || text.num_layers == 0 || text.num_heads == 0 ||
      text.mlp_ratio == 0 || text.shared_dim == 0 || text.embed_dim % text.num_heads != 0) {
    throw std::invalid_argument("invalid text encoder sizes");
  }
  if (encoder.shared_dim != text.shared_dim) {
    throw std::invalid_argument("encoder.shared_dim must equal text.shared_dim");
  }
  if (query.query_dim != text.shared_dim) {
    throw std::invalid_argument("query.query_dim must equal text.shared_dim");
  }
  if (query.token_dim != encoder.embed_dim) {
    throw std::invalid_argument("query.token_dim must equal encoder.embed_dim");
  }
}

ModelConfig& ModelConfig::tie_widths() {
  query.query_dim = text.shared_dim;
  query.token_dim = encoder.embed_dim;
  return *this;
}

json ModelConfig::to_json() const {
  return {
      {"encoder",
       {{"token_length", encoder.token_length},
        {"segments", encoder.segments},
        {"embed_dim", encoder.embed_dim},
        {"num_layers", encoder.num_layers},
        {"num_heads", encoder.num_heads},
        {"mlp_ratio", encoder.mlp_ratio},
        {"shared_dim", encoder.shared_dim}}},
      {"text",
       {{"embed_dim", text.embed_dim},
        {"num_layers", text.num_layers},
        {"num_heads", text.num_heads},
        {"mlp_ratio", text.mlp_ratio},
        {"shared_dim", text.shared_dim}}},
      {"query",
       {{"query_dim", query.query_dim},
        {"token_dim", query.token_dim},
        {"num_layers", query.num_layers},
        {"num_heads", query.num_heads},
        {"mlp_ratio", query.mlp_ratio}}},
  };
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  reject_unknown(j, {"encoder", "text", "query"}, "model");
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    reject_unknown(e, {"token_length", "segments", "embed_dim", "num_layers", "num_heads",
                       "mlp_ratio", "shared_dim"},
                   "model.encoder");
    read(e, "token_length", c.encoder.token_length);
    read(e, "segments", c.encoder.segments);
    read(e, "embed_dim", c.encoder.embed_dim);
    read(e, "num_layers", c.encoder.num_layers);
    read(e, "num_heads", c.encoder.num_heads);
    read(e, "mlp_ratio", c.encoder.mlp_ratio);
    read(e, "shared_dim", c.encoder.shared_dim);
  }
  if (j.contains("text")) {
    const json& t = j["text"];
    reject_unknown(t, {"embed_dim", "num_layers", "num_heads", "mlp_ratio", "shared_dim"},
                   "model.text");
    read(t, "embed_dim", c.text.embed_dim);
    read(t, "num_layers", c.text.num_layers);
    read(t, "num_heads", c.text.num_heads);
    read(t, "mlp_ratio", c.text.mlp_ratio);
    read(t, "shared_dim", c.text.shared_dim);
  }
  c.tie_widths();
  if (j.contains("query")) {
    const json& q = j["query"];
    reject_unknown(q, {"query_dim", "token_dim", "num_layers", "num_heads", "mlp_ratio"},
                   "model.query");
    read(q, "query_dim", c.query.query_dim);
    read(q, "token_dim", c.query.token_dim);
    read(q, "num_layers", c.query.num_layers);
    read(q, "num_heads", c.query.num_heads);
    read(q, "mlp_ratio", c.query.mlp_ratio);
  }
  return c;
}

LeadwiseModel LeadwiseModel::create(const ModelConfig& cfg, text::TextVocabulary vocab,
                                    std::uint64_t seed) {
  cfg.validate();
  LeadwiseModel m;
  m.cfg_ = cfg;
  // Separate streams keep each tower's init independent of the others' sizes.
  Rng ecg_rng = Rng::stream(seed, 1);
  Rng text_rng = Rng::stream(seed, 2);
  Rng query_rng = Rng::stream(seed, 3);
  m.ecg_ = encoder::EcgEncoder::create(m.store_, cfg.encoder, ecg_rng);
  m.text_ = text::ReferenceTextEncoder::create(m.store_, cfg.text, std::move(vocab), text_rng);
  m.query_ = cq::CardiacQueryNetwork::create(m.store_, cfg.query, query_rng);
  return m;
}

LeadwiseModel LeadwiseModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (!ckpt.meta.contains("model") || !ckpt.meta.contains("text_vocabulary")) {
    throw nn::CheckpointError(path.string() + ": missing model metadata");
  }
  LeadwiseModel m = create(ModelConfig::from_json(ckpt.meta["model"]),
                           text::TextVocabulary::from_json(ckpt.meta["text_vocabulary"]), 0);
  if (ckpt.config_hash != m.config_hash()) {
    throw nn::CheckpointError(path.string() + ": config hash mismatch");
  }
  nn::restore_parameters(ckpt, m.store_.all());
  return m;
}

void LeadwiseModel::save(const std::filesystem::path& path, const json& extra_meta) const {
  json meta = extra_meta.is_object() ? extra_meta : json::object();
  meta["model"] = cfg_.to_json();
  meta["text_vocabulary"] = text_.vocabulary().to_json();
  nn::save_checkpoint(path, store_.all(), config_hash(), meta);
}

std::string LeadwiseModel::parameter_hash() const {
  return nn::parameter_hash(store_.all());
}

std::string LeadwiseModel::config_hash() const {
  const json j = {{"model", cfg_.to_json()},
                  {"text_vocabulary", text_.vocabulary().to_json()}};
  return content_hash(j.dump());
}

nn::Tensor LeadwiseModel::score(const encoder::TokenGrid& grid,
                                const nn::Tensor& queries) const {
  return query_.forward(queries, ecg_.encode(grid).tokens);
}

ecg::EcgRecord prepare_record(const ecg::EcgRecord& rec) {
  return ecg::normalize_record(rec);
}

text::TextVocabulary build_text_vocabulary(std::span<const std::string> reports,
                                           std::span<const std::string> entities) {
  std::vector<std::string> corpus(reports.begin(), reports.end());
  corpus.insert(corpus.end(), entities.begin(), entities.end());
  return text::TextVocabulary::build(corpus);
}

}  // namespace leadwise
