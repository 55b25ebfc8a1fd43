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

// Downstream evaluation: zero-shot classification through the cardiac query
// network, linear probing on frozen features, partial-lead sweeps, seen and
// unseen class splitting, and AUC/F1 metrics.

#ifndef LEADWISE_EVALUATION_H_
#define LEADWISE_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/model.h"
#include "leadwise/text_encoder.h"

namespace leadwise::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Area under the ROC curve as the Mann-Whitney rank statistic, ties counted
// as one half. nullopt when only one label value is present. Throws
// EvalError on empty or mismatched inputs.
std::optional<double> compute_auc(std::span<const double> scores,
                                  std::span<const std::uint8_t> labels);

// F1 of predictions score >= threshold. 0 when there are no positive labels
// and no positive predictions.
double compute_f1(std::span<const double> scores, std::span<const std::uint8_t> labels,
                  double threshold = 0.5);

struct ClassMetrics {
  std::string name;
  std::optional<double> auc;  // nullopt when undefined
  double f1 = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct EvalReport {
  std::string task;
  std::vector<ClassMetrics> classes;
  // Unweighted means over classes with both label values present.
  std::optional<double> macro_auc;
  std::optional<double> macro_f1;
  std::vector<std::string> skipped_classes;
  std::vector<int> leads;  // lead ids presented to the model
  double data_fraction = 1.0;
  std::string config_hash;
  std::size_t num_records = 0;

  nlohmann::json to_json() const;
  // name,auc,f1,positives,negatives; undefined AUCs are empty cells.
  std::string per_class_csv() const;
};

// scores and labels are row-major [records x classes].
EvalReport summarize(std::string task, std::span<const std::string> class_names,
                     std::span<const double> scores, std::span<const std::uint8_t> labels);

// Runs fn(i) for i in [0, n) across worker threads. Each index is handled
// exactly once, so results written to per-index slots are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t max_threads = 0);

// Downstream records of one split with binary labels for `class_names`.
struct LabeledSet {
  std::vector<ecg::EcgRecord> records;  // prepared
  std::vector<std::uint8_t> labels;     // [records x classes]
};
LabeledSet load_split(const std::filesystem::path& manifest, ecg::Split split,
                      std::span<const std::string> class_names);

// Class names in first-seen order across all records of the manifest.
std::vector<std::string> manifest_classes(const std::filesystem::path& manifest);

enum class LeadMode {
  kNative,   // only the selected leads are tokenized
  kZeroPad,  // all 12 leads, unselected ones replaced by zeros
};

// Leads the model sees for one record: the first k canonical leads it
// carries (all of them when k is 0).
struct LeadSelection {
  int k = 0;
  LeadMode mode = LeadMode::kNative;
};

// Sigmoid probabilities [records x classes] from the cardiac query network.
std::vector<double> zero_shot_scores(const LeadwiseModel& model,
                                     std::span<const ecg::EcgRecord> records,
                                     std::span<const std::string> class_names,
                                     const LeadSelection& leads = {});

struct ZeroShotInputs {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::vector<std::string> class_names;  // empty = all manifest classes
  ecg::Split split = ecg::Split::kTest;
  LeadSelection leads;
};
EvalReport zero_shot(const ZeroShotInputs& in);

struct ProbeConfig {
  double fraction = 1.0;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 5;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ProbeConfig from_json(const nlohmann::json& j);
};

// Seeded, class-stratified subset of ceil(fraction * n) records in which
// every class has at least one positive. Throws EvalError otherwise.
std::vector<std::size_t> sample_fraction(std::span<const std::uint8_t> labels,
                                         std::size_t num_classes, double fraction,
                                         std::uint64_t seed);

// Mean-pooled token features before the projector, [records x d].
std::vector<double> encoder_features(const LeadwiseModel& model,
                                     std::span<const ecg::EcgRecord> records,
                                     const LeadSelection& leads = {});

struct ProbeInputs {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::vector<std::string> class_names;  // empty = all manifest classes
  ProbeConfig probe;
  LeadSelection leads;
};
// Trains a linear head with BCE on the sampled training records, keeps the
// weights with the lowest validation loss, and reports test metrics. Throws
// std::logic_error if encoder parameters change.
EvalReport linear_probe(const ProbeInputs& in);

enum class SweepMode { kZeroShot, kProbe };

struct SweepInputs {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::vector<std::string> class_names;
  SweepMode mode = SweepMode::kZeroShot;
  LeadMode lead_mode = LeadMode::kNative;
  ProbeConfig probe;  // used in probe mode
};
// One report per k = 1..12 over the canonical lead order.
std::vector<EvalReport> lead_sweep(const SweepInputs& in);
// k,macro_auc,macro_f1 rows for plotting.
std::string sweep_csv(std::span<const EvalReport> reports);

struct OverlapResult {
  std::vector<std::string> seen;
  std::vector<std::string> unseen;
  std::vector<double> max_similarity;     // per class, -inf with no entities
  std::vector<std::string> nearest_entity;  // per class, empty with no entities
};
// A class is seen when its best cosine similarity to any vocabulary entity
// exceeds `threshold`.
OverlapResult seen_unseen_split(std::span<const std::string> entities,
                                std::span<const std::string> class_names,
                                const text::TextEncoder& embedder,
                                double threshold = 0.95);

}  // namespace leadwise::eval

#endif  // LEADWISE_EVALUATION_H_
