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

// Pretraining objective and loop: ECG-to-report contrastive alignment plus
// cardiac query supervision, with lead and segment masking applied per step.

#ifndef LEADWISE_TRAINING_H_
#define LEADWISE_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/model.h"
#include "leadwise/vocabulary.h"

namespace leadwise::train {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PretrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::size_t max_steps = 0;  // when nonzero, stops after this many steps
  double temperature = 0.07;
  double lr = 2e-4;
  double weight_decay = 1e-5;
  std::size_t warmup_steps = 0;
  double mask_ratio = 0.25;
  int min_masked_leads = 9;
  int max_masked_leads = 11;
  bool dynamic_lead_masking = true;
  bool segment_masking = true;
  bool use_contrast = true;
  bool use_cq = true;
  bool symmetric = false;  // adds the report-to-ECG direction
  std::uint64_t seed = 0;
  std::size_t valid_every = 0;  // steps between validations; 0 = once per epoch

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys throw.
  static PretrainConfig from_json(const nlohmann::json& j);
};

// Mean over rows of -log softmax(s_i / eta)_i with s = ecg * text^T.
// Rows must be L2-normalized; throws TrainingError on fewer than two rows,
// mismatched shapes, non-positive eta, or a zero-norm row. With `symmetric`
// the loss averages both directions.
nn::Tensor contrastive_loss(const nn::Tensor& ecg, const nn::Tensor& text, double eta,
                            bool symmetric = false);

struct Example {
  const ecg::EcgRecord* record = nullptr;  // already prepared
  std::string report;
  std::vector<double> labels;  // one per entity query
};

struct LossBreakdown {
  nn::Tensor total;
  double contrast = 0.0;  // 0 when disabled
  double cq = 0.0;        // 0 when disabled
};

// One forward pass over a batch: tokenize, mask, encode, then the enabled
// loss terms, summed with equal weight. `rng` drives the masks.
LossBreakdown total_loss(const LeadwiseModel& model, std::span<const Example> batch,
                         std::span<const std::string> entities,
                         const PretrainConfig& cfg, Rng& rng);

struct PretrainInputs {
  std::filesystem::path manifest;
  std::filesystem::path vocabulary;  // entity vocabulary from the miner
  std::filesystem::path labels;      // label vectors from the miner
  ModelConfig model;
  PretrainConfig train;
  std::filesystem::path out_dir;
};

struct PretrainResult {
  std::size_t steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double best_loss = 0.0;  // validation loss, or epoch-mean loss without a valid split
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics;
};

// Writes metrics.jsonl ({step, lr, loss_total, loss_contrast, loss_cq} per
// step), valid.jsonl, checkpoint_best.ckpt and checkpoint_final.ckpt into
// `out_dir`. A non-finite loss writes nonfinite_dump.json and throws.
PretrainResult pretrain(const PretrainInputs& inputs);

}  // namespace leadwise::train

#endif  // LEADWISE_TRAINING_H_
