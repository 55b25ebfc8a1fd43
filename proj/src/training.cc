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

#include "leadwise/training.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "leadwise/ops.h"
#include "leadwise/optim.h"

namespace leadwise::train {
namespace {

using nlohmann::json;

// Stream tags for the per-run random sources.
constexpr std::uint64_t kShuffleTag = 0x5348554646000000ULL;
constexpr std::uint64_t kMaskTag = 0x4d41534b00000000ULL;
constexpr std::uint64_t kValidTag = 0x56414c4944000000ULL;

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size,
                                                   std::size_t min_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    const std::size_t e = std::min(order.size(), b + batch_size);
    if (e - b < min_size) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

struct Split {
  std::vector<ecg::EcgRecord> records;
  std::vector<Example> examples;
};

void append_jsonl(std::ofstream& out, const json& j) {
  out << j.dump() << "\n";
  out.flush();
}

}  // namespace

void PretrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (use_contrast && batch_size < 2) {
    throw std::invalid_argument("contrastive loss needs batch_size >= 2");
  }
  if (epochs == 0 && max_steps == 0) throw std::invalid_argument("no training steps");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(lr > 0.0) || weight_decay < 0.0) throw std::invalid_argument("invalid lr or weight_decay");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw std::invalid_argument("mask_ratio must be in [0, 1)");
  }
  if (min_masked_leads < 0 || max_masked_leads > 11 || min_masked_leads > max_masked_leads) {
    throw std::invalid_argument("masked lead counts must satisfy 0 <= min <= max <= 11");
  }
  if (!use_contrast && !use_cq) throw std::invalid_argument("both loss terms disabled");
}

json PretrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"temperature", temperature},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"warmup_steps", warmup_steps},
          {"mask_ratio", mask_ratio},
          {"min_masked_leads", min_masked_leads},
          {"max_masked_leads", max_masked_leads},
          {"dynamic_lead_masking", dynamic_lead_masking},
          {"segment_masking", segment_masking},
          {"use_contrast", use_contrast},
          {"use_cq", use_cq},
          {"symmetric", symmetric},
          {"seed", seed},
          {"valid_every", valid_every}};
}

PretrainConfig PretrainConfig::from_json(const json& j) {
  PretrainConfig c;
  if (!j.is_object()) throw std::invalid_argument("train config must be an object");
  const json known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown key train." + key);
  }
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "max_steps", c.max_steps);
  read(j, "temperature", c.temperature);
  read(j, "lr", c.lr);
  read(j, "weight_decay", c.weight_decay);
  read(j, "warmup_steps", c.warmup_steps);
  read(j, "mask_ratio", c.mask_ratio);
  read(j, "min_masked_leads", c.min_masked_leads);
  read(j, "max_masked_leads", c.max_masked_leads);
  read(j, "dynamic_lead_masking", c.dynamic_lead_masking);
  read(j, "segment_masking", c.segment_masking);
  read(j, "use_contrast", c.use_contrast);
  read(j, "use_cq", c.use_cq);
  read(j, "symmetric", c.symmetric);
  read(j, "seed", c.seed);
  read(j, "valid_every", c.valid_every);
  return c;
}

nn::Tensor contrastive_loss(const nn::Tensor& ecg, const nn::Tensor& text, double eta,
                            bool symmetric) {
  if (ecg.rank() != 2 || ecg.shape() != text.shape()) {
    throw TrainingError("contrastive_loss: ECG and text embeddings must share shape [L x d]");
  }
  if (ecg.rows() < 2) throw TrainingError("contrastive_loss: need at least two pairs");
  if (!(eta > 0.0)) throw TrainingError("contrastive_loss: temperature must be positive");
  for (const nn::Tensor* t : {&ecg, &text}) {
    const auto v = t->values();
    for (std::size_t r = 0; r < t->rows(); ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < t->cols(); ++c) sq += v[r * t->cols() + c] * v[r * t->cols() + c];
      if (sq < 1e-24) throw TrainingError("contrastive_loss: zero-norm embedding row");
    }
  }
  std::vector<std::size_t> diag(ecg.rows());
  std::iota(diag.begin(), diag.end(), 0);
  const nn::Tensor logits = nn::scale(nn::matmul(ecg, nn::transpose(text)), 1.0 / eta);
  const nn::Tensor e2t = nn::scale(nn::mean(nn::pick(nn::log_softmax(logits), diag)), -1.0);
  if (!symmetric) return e2t;
  const nn::Tensor t2e =
      nn::scale(nn::mean(nn::pick(nn::log_softmax(nn::transpose(logits)), diag)), -1.0);
  return nn::scale(nn::add(e2t, t2e), 0.5);
}

LossBreakdown total_loss(const LeadwiseModel& model, std::span<const Example> batch,
                         std::span<const std::string> entities,
                         const PretrainConfig& cfg, Rng& rng) {
  if (batch.empty()) throw TrainingError("total_loss: empty batch");
  if (!cfg.use_contrast && !cfg.use_cq) throw TrainingError("total_loss: no loss enabled");
  if (cfg.use_cq && entities.empty()) throw TrainingError("total_loss: no entity queries");

  std::vector<nn::Tensor> embeddings, tokens;
  std::vector<std::string> reports;
  std::vector<std::vector<double>> labels;
  for (const Example& ex : batch) {
    encoder::TokenGrid grid = encoder::tokenize(*ex.record, model.config().encoder);
    if (cfg.dynamic_lead_masking) {
      grid = encoder::dynamic_lead_mask(grid, rng, cfg.min_masked_leads, cfg.max_masked_leads);
    }
    if (cfg.segment_masking) grid = encoder::segment_mask(grid, rng, cfg.mask_ratio);
    encoder::EncodeOutput out = model.ecg().encode(grid);
    embeddings.push_back(out.embedding);
    tokens.push_back(out.tokens);
    reports.push_back(ex.report);
    if (cfg.use_cq && ex.labels.size() != entities.size()) {
      throw TrainingError("total_loss: label vector length does not match entity count");
    }
    labels.push_back(ex.labels);
  }

  LossBreakdown out;
  if (cfg.use_contrast) {
    const nn::Tensor text = model.text().embed(reports);
    const nn::Tensor l = contrastive_loss(nn::concat(embeddings, 0), text, cfg.temperature,
                                          cfg.symmetric);
    out.contrast = l.item();
    out.total = l;
  }
  if (cfg.use_cq) {
    const nn::Tensor queries = model.text().embed(entities);
    std::vector<nn::Tensor> logits;
    logits.reserve(tokens.size());
    for (const nn::Tensor& t : tokens) logits.push_back(model.query().forward(queries, t));
    const nn::Tensor l = cq::cq_loss_batch(logits, labels);
    out.cq = l.item();
    out.total = out.total.defined() ? nn::add(out.total, l) : l;
  }
  return out;
}

PretrainResult pretrain(const PretrainInputs& in) {
  const PretrainConfig& cfg = in.train;
  cfg.validate();
  in.model.validate();

  const EntityVocabulary vocab = read_vocabulary(in.vocabulary);
  std::map<std::string, std::vector<double>> label_by_id;
  for (const RecordLabels& r : read_labels(in.labels)) {
    if (r.labels.size() != vocab.size()) {
      throw TrainingError("label vector for " + r.record_id + " has size " +
                          std::to_string(r.labels.size()) + ", vocabulary has " +
                          std::to_string(vocab.size()));
    }
    label_by_id[r.record_id] = r.labels.as_targets();
  }

  const ecg::DatasetManifest manifest = ecg::load_manifest(in.manifest);
  Split train, valid;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ecg::Split s = manifest.entries[i].split;
    if (s == ecg::Split::kTest) continue;
    Split& dst = s == ecg::Split::kTrain ? train : valid;
    dst.records.push_back(prepare_record(ecg::load_record(manifest, i)));
  }
  if (train.records.empty()) throw TrainingError("manifest has no training records");
  for (Split* split : {&train, &valid}) {
    for (const ecg::EcgRecord& rec : split->records) {
      auto it = label_by_id.find(rec.id);
      if (it == label_by_id.end()) throw TrainingError("no labels for record " + rec.id);
      split->examples.push_back({&rec, rec.report, it->second});
    }
  }

  std::vector<std::string> reports;
  for (const Example& ex : train.examples) reports.push_back(ex.report);
  LeadwiseModel model =
      LeadwiseModel::create(in.model, build_text_vocabulary(reports, vocab.entities), cfg.seed);
  nn::AdamW opt(model.params().tensors(), {.lr = cfg.lr, .weight_decay = cfg.weight_decay});

  const std::size_t min_batch = cfg.use_contrast ? 2 : 1;
  if (train.examples.size() < min_batch) throw TrainingError("too few training records");
  const std::size_t steps_per_epoch =
      make_batches(std::vector<std::size_t>(train.examples.size()), cfg.batch_size, min_batch)
          .size();
  const std::size_t total_steps = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch;

  std::filesystem::create_directories(in.out_dir);
  PretrainResult result;
  result.metrics = in.out_dir / "metrics.jsonl";
  result.best_checkpoint = in.out_dir / "checkpoint_best.ckpt";
  result.final_checkpoint = in.out_dir / "checkpoint_final.ckpt";
  std::ofstream metrics(result.metrics, std::ios::trunc);
  std::ofstream valid_log(in.out_dir / "valid.jsonl", std::ios::trunc);
  if (!metrics || !valid_log) throw TrainingError("cannot write to " + in.out_dir.string());

  const auto meta = [&](std::size_t step, double loss) {
    return json{{"step", step},
                {"loss", loss},
                {"entities", vocab.entities},
                {"vocabulary_hash", vocab.hash()},
                {"train", cfg.to_json()}};
  };

  const auto validation_loss = [&]() {
    nn::NoGradGuard no_grad;
    Rng rng = Rng::stream(cfg.seed, kValidTag);
    std::vector<std::size_t> order(valid.examples.size());
    std::iota(order.begin(), order.end(), 0);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& b : make_batches(order, cfg.batch_size, min_batch)) {
      std::vector<Example> batch;
      for (std::size_t i : b) batch.push_back(valid.examples[i]);
      sum += total_loss(model, batch, vocab.entities, cfg, rng).total.item() *
             static_cast<double>(b.size());
      count += b.size();
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  };
  const bool has_valid = valid.examples.size() >= min_batch;

  double best = std::numeric_limits<double>::infinity();
  double epoch_sum = 0.0;
  std::size_t epoch_steps = 0;
  const auto consider = [&](std::size_t step) {
    double loss = has_valid ? validation_loss() : epoch_sum / static_cast<double>(epoch_steps);
    append_jsonl(valid_log, {{"step", step}, {"loss", loss}, {"source", has_valid ? "valid" : "train"}});
    if (loss < best) {
      best = loss;
      model.save(result.best_checkpoint, meta(step, loss));
    }
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total_steps; ++epoch) {
    std::vector<std::size_t> order(train.examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = Rng::stream(cfg.seed, kShuffleTag + epoch);
    shuffle.shuffle(order);
    epoch_sum = 0.0;
    epoch_steps = 0;
    const auto batches = make_batches(order, cfg.batch_size, min_batch);
    for (std::size_t bi = 0; bi < batches.size() && step < total_steps; ++bi, ++step) {
      std::vector<Example> batch;
      for (std::size_t i : batches[bi]) batch.push_back(train.examples[i]);
      const double lr = nn::cosine_schedule(static_cast<std::int64_t>(step),
                                            static_cast<std::int64_t>(total_steps), cfg.lr,
                                            static_cast<std::int64_t>(cfg.warmup_steps));
      opt.set_lr(lr);
      opt.zero_grad();
      Rng mask_rng = Rng::stream(cfg.seed, kMaskTag + step);
      const auto fail = [&](const std::string& reason, double contrast, double cq) {
        json dump = {{"step", step}, {"lr", lr}, {"reason", reason},
                     {"loss_contrast", contrast}, {"loss_cq", cq},
                     {"records", json::array()}, {"nonfinite_parameters", json::array()}};
        for (const Example& ex : batch) dump["records"].push_back(ex.record->id);
        for (const auto& p : model.params().all()) {
          const auto v = p.tensor.values();
          if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
            dump["nonfinite_parameters"].push_back(p.name);
          }
        }
        std::ofstream(in.out_dir / "nonfinite_dump.json") << dump.dump(2) << "\n";
        throw TrainingError("training step " + std::to_string(step) + " failed (" + reason +
                            "); see nonfinite_dump.json");
      };
      LossBreakdown loss;
      try {
        loss = total_loss(model, batch, vocab.entities, cfg, mask_rng);
      } catch (const nn::ShapeError& e) {
        // Overflowing activations surface as degenerate normalizations.
        fail(e.what(), std::numeric_limits<double>::quiet_NaN(),
             std::numeric_limits<double>::quiet_NaN());
      }
      const double value = loss.total.item();
      if (!std::isfinite(value)) fail("non-finite loss", loss.contrast, loss.cq);
      loss.total.backward();
      opt.step();
      append_jsonl(metrics, {{"step", step},
                             {"lr", lr},
                             {"loss_total", value},
                             {"loss_contrast", loss.contrast},
                             {"loss_cq", loss.cq}});
      if (step == 0) result.initial_loss = value;
      result.final_loss = value;
      epoch_sum += value;
      ++epoch_steps;
      const bool end_of_epoch = bi + 1 == batches.size() || step + 1 == total_steps;
      if (cfg.valid_every > 0 ? (step + 1) % cfg.valid_every == 0 || step + 1 == total_steps
                              : end_of_epoch) {
        consider(step);
      }
    }
  }
  spdlog::info("pretraining finished after {} steps, final loss {:.6f}", step, result.final_loss);
  result.steps = step;
  result.best_loss = best;
  model.save(result.final_checkpoint, meta(step, result.final_loss));
  return result;
}

}  // namespace leadwise::train
