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

// Run-directory pipeline behind the command-line tool. Each stage reads the
// artifacts of the previous ones from a run directory:
//
//   <out>/config.json, seeds.json, hashes.json
//   <out>/data/{pretrain,downstream}/manifest.json
//   <out>/mining/{vocabulary.json, labels.jsonl, extracted.jsonl, cache/}
//   <out>/pretrain/{metrics.jsonl, valid.jsonl, checkpoint_*.ckpt}
//   <out>/eval/...
//   <out>/logs/<command>.log

#ifndef LEADWISE_PIPELINE_H_
#define LEADWISE_PIPELINE_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leadwise/evaluation.h"
#include "leadwise/run_config.h"
#include "leadwise/training.h"

namespace leadwise::pipeline {

struct RunPaths {
  std::filesystem::path root;

  explicit RunPaths(std::filesystem::path r) : root(std::move(r)) {}
  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path seeds() const { return root / "seeds.json"; }
  std::filesystem::path hashes() const { return root / "hashes.json"; }
  std::filesystem::path pretrain_manifest() const {
    return root / "data" / "pretrain" / "manifest.json";
  }
  std::filesystem::path downstream_manifest() const {
    return root / "data" / "downstream" / "manifest.json";
  }
  std::filesystem::path mining_dir() const { return root / "mining"; }
  std::filesystem::path vocabulary() const { return mining_dir() / "vocabulary.json"; }
  std::filesystem::path labels() const { return mining_dir() / "labels.jsonl"; }
  std::filesystem::path extracted() const { return mining_dir() / "extracted.jsonl"; }
  std::filesystem::path cache_dir() const { return mining_dir() / "cache"; }
  std::filesystem::path pretrain_dir() const { return root / "pretrain"; }
  std::filesystem::path metrics() const { return pretrain_dir() / "metrics.jsonl"; }
  // `which` is "final" or "best".
  std::filesystem::path checkpoint(const std::string& which) const {
    return pretrain_dir() / ("checkpoint_" + which + ".ckpt");
  }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path logs_dir() const { return root / "logs"; }
};

// Writes config.json, seeds.json, and hashes.json (git blob hashes of the
// config and of the running executable). With a nonempty `command`, the
// config goes to logs/<command>.config.json instead, leaving the run's
// config.json untouched; evaluation commands use this so that per-call flags
// do not carry over to later commands.
void write_run_metadata(const RunConfig& cfg, const std::string& command = "");

struct SynthSummary {
  std::size_t pretrain_records = 0;
  std::size_t downstream_records = 0;
  std::vector<std::string> class_names;
};
SynthSummary run_synth(const RunConfig& cfg);

struct MineSummary {
  std::size_t reports = 0;
  std::size_t entities = 0;
  int cache_hits = 0;
  int cache_misses = 0;
};
MineSummary run_mine(const RunConfig& cfg);

train::PretrainResult run_pretrain(const RunConfig& cfg);

// `leads` > 0 restricts records to the first `leads` leads of the canonical
// order. Reports land in <out>/eval.
eval::EvalReport run_zeroshot(const RunConfig& cfg, int leads = 0);
eval::EvalReport run_linprobe(const RunConfig& cfg, int leads = 0);
std::vector<eval::EvalReport> run_leadsweep(const RunConfig& cfg);

struct GradcheckSummary {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  double seconds = 0.0;
  bool passed = false;
};
// Checks the full pretraining objective on a small model and batch built
// from cfg.gradcheck. Writes <out>/gradcheck.json.
GradcheckSummary run_gradcheck(const RunConfig& cfg);

// Runs synth, mine, pretrain, and zeroshot in order.
eval::EvalReport run_all(const RunConfig& cfg);

struct GridAxis {
  std::string key;  // dotted path or alias
  std::vector<std::string> values;
};
// Parses "key=v1,v2,...".
GridAxis parse_grid_axis(const std::string& spec);

struct AblationRun {
  std::string name;  // "key=v" parts joined by '_'
  std::filesystem::path dir;
  double final_loss = 0.0;
  std::optional<double> zero_shot_macro_auc;
};
// Runs the full pipeline once per point of the Cartesian product of `grid`,
// in <out>/ablate/<name>/, and writes <out>/ablate/summary.csv.
std::vector<AblationRun> run_ablate(const RunConfig& cfg, const std::vector<GridAxis>& grid);

}  // namespace leadwise::pipeline

#endif  // LEADWISE_PIPELINE_H_
