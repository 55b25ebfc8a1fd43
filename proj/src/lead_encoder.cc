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

#include "leadwise/lead_encoder.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "leadwise/ops.h"

namespace leadwise::encoder {

namespace {

constexpr double kEmbeddingInitStd = 0.02;

TokenGrid keep_rows(const TokenGrid& grid, const std::vector<bool>& drop) {
  TokenGrid out;
  out.token_length = grid.token_length;
  out.segments = grid.segments;
  const std::size_t row_samples = grid.segments * grid.token_length;
  for (std::size_t r = 0; r < grid.num_rows(); ++r) {
    if (drop[r]) continue;
    out.lead_ids.push_back(grid.lead_ids[r]);
    out.samples.insert(out.samples.end(),
                       grid.samples.begin() + r * row_samples,
                       grid.samples.begin() + (r + 1) * row_samples);
    out.keep.insert(out.keep.end(), grid.keep.begin() + r * grid.segments,
                    grid.keep.begin() + (r + 1) * grid.segments);
  }
  return out;
}

}  // namespace

void TokenizerConfig::validate() const {
  if (token_length == 0 || segments == 0 || embed_dim == 0 || num_heads == 0 ||
      mlp_ratio == 0 || shared_dim == 0) {
    throw EncoderError("encoder sizes must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw EncoderError("embed_dim " + std::to_string(embed_dim) +
                       " not divisible by num_heads " + std::to_string(num_heads));
  }
}

std::size_t TokenGrid::kept_in_row(std::size_t row) const {
  return static_cast<std::size_t>(
      std::count(keep.begin() + row * segments,
                 keep.begin() + (row + 1) * segments, std::uint8_t{1}));
}

std::size_t TokenGrid::kept_count() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

TokenGrid tokenize(const ecg::EcgRecord& rec, const TokenizerConfig& cfg) {
  cfg.validate();
  if (rec.num_leads() == 0) throw EncoderError(rec.id + ": record has no leads");
  if (rec.length % cfg.token_length != 0) {
    throw EncoderError(rec.id + ": token length " + std::to_string(cfg.token_length) +
                       " does not divide signal length " + std::to_string(rec.length));
  }
  if (rec.length != cfg.signal_length()) {
    throw EncoderError(rec.id + ": signal length " + std::to_string(rec.length) +
                       " gives " + std::to_string(rec.length / cfg.token_length) +
                       " segments, encoder expects " + std::to_string(cfg.segments));
  }
  // Canonical row order makes the grid independent of the record's lead order.
  std::vector<std::size_t> order(rec.num_leads());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rec.lead_ids[a] < rec.lead_ids[b];
  });

  TokenGrid grid;
  grid.token_length = cfg.token_length;
  grid.segments = cfg.segments;
  grid.samples.reserve(rec.signal.size());
  for (std::size_t row : order) {
    const int id = rec.lead_ids[row];
    if (id < 1 || id > ecg::kNumLeads) {
      throw EncoderError(rec.id + ": lead id " + std::to_string(id) + " outside 1..12");
    }
    if (!grid.lead_ids.empty() && grid.lead_ids.back() == id) {
      throw EncoderError(rec.id + ": duplicate lead " + std::to_string(id));
    }
    grid.lead_ids.push_back(id);
    for (float v : rec.lead(row)) grid.samples.push_back(v);
  }
  grid.keep.assign(grid.num_rows() * grid.segments, 1);
  return grid;
}

TokenGrid mask_leads(const TokenGrid& grid, std::span<const int> leads) {
  std::vector<bool> drop(grid.num_rows(), false);
  for (std::size_t r = 0; r < grid.num_rows(); ++r) {
    drop[r] = std::find(leads.begin(), leads.end(), grid.lead_ids[r]) != leads.end();
  }
  return keep_rows(grid, drop);
}

TokenGrid dynamic_lead_mask(const TokenGrid& grid, Rng& rng, int min_masked,
                            int max_masked) {
  if (grid.num_rows() != static_cast<std::size_t>(ecg::kNumLeads)) {
    throw EncoderError("dynamic lead masking needs all 12 leads, grid has " +
                       std::to_string(grid.num_rows()));
  }
  if (min_masked < 0 || min_masked > max_masked || max_masked > ecg::kNumLeads - 1) {
    throw EncoderError("masked lead range must satisfy 0 <= min <= max <= 11");
  }
  const auto count = static_cast<std::size_t>(rng.uniform_int(min_masked, max_masked));
  std::vector<bool> drop(grid.num_rows(), false);
  for (std::size_t r : rng.sample_without_replacement(grid.num_rows(), count)) {
    drop[r] = true;
  }
  return keep_rows(grid, drop);
}

std::size_t masked_per_lead(std::size_t segments, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw EncoderError("mask ratio must lie in [0, 1)");
  }
  // The small slack keeps ratios such as 0.3 * 10 from rounding down to 2.
  return static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(segments) + 1e-9));
}

TokenGrid segment_mask(const TokenGrid& grid, Rng& rng, double ratio) {
  const std::size_t count = masked_per_lead(grid.segments, ratio);
  TokenGrid out = grid;
  if (count == 0) return out;
  for (std::size_t r = 0; r < out.num_rows(); ++r) {
    for (std::size_t m : rng.sample_without_replacement(out.segments, count)) {
      out.keep[r * out.segments + m] = 0;
    }
  }
  return out;
}

EcgEncoder EcgEncoder::create(nn::ParamStore& store, const TokenizerConfig& cfg,
                              Rng& rng, const std::string& prefix) {
  cfg.validate();
  EcgEncoder enc;
  enc.cfg_ = cfg;
  const std::size_t d = cfg.embed_dim;
  enc.patch_ = nn::Linear::create(store, prefix + ".patch", cfg.token_length, d, rng);
  enc.lead_embeddings_ = store.add_normal(
      prefix + ".lead_embeddings", {static_cast<std::size_t>(ecg::kNumLeads), d},
      kEmbeddingInitStd, rng);
  enc.temporal_embeddings_ = store.add_normal(
      prefix + ".temporal_embeddings", {cfg.segments, d}, kEmbeddingInitStd, rng);
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    enc.blocks_.push_back(nn::EncoderBlock::create(
        store, prefix + ".block" + std::to_string(i), d, cfg.num_heads,
        cfg.mlp_ratio, rng));
  }
  enc.final_norm_ = nn::LayerNorm::create(store, prefix + ".norm", d);
  enc.projector_ =
      nn::Projector::create(store, prefix + ".projector", d, cfg.shared_dim, rng);
  return enc;
}

nn::Tensor EcgEncoder::embed_tokens(const TokenGrid& grid) const {
  if (grid.token_length != cfg_.token_length || grid.segments != cfg_.segments) {
    throw EncoderError("token grid shape does not match encoder configuration");
  }
  const std::size_t p = grid.token_length;
  std::vector<double> raw;
  std::vector<std::size_t> lead_rows, segment_rows;
  for (std::size_t r = 0; r < grid.num_rows(); ++r) {
    for (std::size_t m = 0; m < grid.segments; ++m) {
      if (!grid.kept(r, m)) continue;
      const auto begin = grid.samples.begin() + (r * grid.segments + m) * p;
      raw.insert(raw.end(), begin, begin + p);
      lead_rows.push_back(static_cast<std::size_t>(grid.lead_ids[r] - 1));
      segment_rows.push_back(m);
    }
  }
  if (lead_rows.empty()) throw EncoderError("no kept tokens to encode");
  const nn::Tensor x = nn::Tensor::from_values({lead_rows.size(), p}, std::move(raw));
  return nn::add(nn::add(patch_(x), nn::gather_rows(lead_embeddings_, lead_rows)),
                 nn::gather_rows(temporal_embeddings_, segment_rows));
}

EncodeOutput EcgEncoder::encode(const TokenGrid& grid) const {
  nn::Tensor h = embed_tokens(grid);
  for (const nn::EncoderBlock& block : blocks_) h = block(h);
  EncodeOutput out;
  out.tokens = final_norm_(h);
  out.features = nn::mean_pool(out.tokens, 0);
  out.embedding = nn::l2_normalize(projector_(out.features));
  for (std::size_t r = 0; r < grid.num_rows(); ++r) {
    if (grid.kept_in_row(r) > 0) out.leads_used.push_back(grid.lead_ids[r]);
  }
  return out;
}

}  // namespace leadwise::encoder
