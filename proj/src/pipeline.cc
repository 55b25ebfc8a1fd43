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

#include "leadwise/pipeline.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "leadwise/ecg_data.h"
#include "leadwise/gradcheck.h"
#include "leadwise/hashing.h"
#include "leadwise/knowledge_miner.h"

namespace leadwise::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw std::runtime_error(path.string() + " not found; run `" + producer + "` first");
  }
}

std::vector<std::string> class_names_for(const RunConfig& cfg, const RunPaths& paths) {
  if (!cfg.eval.class_names.empty()) return cfg.eval.class_names;
  return eval::manifest_classes(paths.downstream_manifest());
}

eval::LeadMode lead_mode(const RunConfig& cfg) {
  return cfg.eval.lead_mode == "zero_pad" ? eval::LeadMode::kZeroPad
                                          : eval::LeadMode::kNative;
}

fs::path eval_checkpoint(const RunConfig& cfg, const RunPaths& paths) {
  const fs::path ckpt = paths.checkpoint(cfg.eval.checkpoint);
  require(ckpt, "pretrain");
  require(paths.downstream_manifest(), "synth");
  return ckpt;
}

std::string lead_suffix(int leads, eval::LeadMode mode) {
  std::string s;
  if (leads > 0) s += "_k" + std::to_string(leads);
  if (mode == eval::LeadMode::kZeroPad) s += "_zeropad";
  return s;
}

void write_report(const fs::path& dir, const std::string& stem, const eval::EvalReport& r) {
  write_json(dir / (stem + ".json"), r.to_json());
  write_text(dir / (stem + "_per_class.csv"), r.per_class_csv());
}

std::string format_fraction(double f) {
  std::ostringstream os;
  os << f;
  return os.str();
}

}  // namespace

void write_run_metadata(const RunConfig& cfg, const std::string& command) {
  const RunPaths paths(cfg.out_dir);
  const std::string config_text = cfg.to_json().dump(2) + "\n";
  if (!command.empty()) {
    write_text(paths.logs_dir() / (command + ".config.json"), config_text);
    return;
  }
  write_text(paths.config(), config_text);
  write_json(paths.seeds(), cfg.seeds_json());
  json hashes = {{"config", git_blob_hash(config_text)}};
  std::error_code ec;
  const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  hashes["code"] = ec ? "" : git_blob_hash_file(exe);
  write_json(paths.hashes(), hashes);
}

SynthSummary run_synth(const RunConfig& cfg) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  ecg::SyntheticOptions pre;
  pre.num_records = cfg.data.pretrain_records;
  pre.num_classes = cfg.data.num_classes;
  pre.seed = cfg.pretrain_data_seed();
  pre.valid_fraction = cfg.data.pretrain_valid_fraction;
  pre.id_prefix = "pt";
  const ecg::SyntheticDataset pretrain = ecg::generate_synthetic(pre);
  ecg::write_dataset(paths.pretrain_manifest(), pretrain.records);
  write_vocabulary(paths.pretrain_manifest().parent_path() / "ground_truth_vocabulary.json",
                   pretrain.vocabulary);

  ecg::SyntheticOptions down;
  down.num_records = cfg.data.downstream_records;
  down.num_classes = cfg.data.num_classes;
  down.seed = cfg.downstream_data_seed();
  down.with_labels = true;
  down.valid_fraction = cfg.data.downstream_valid_fraction;
  down.test_fraction = cfg.data.downstream_test_fraction;
  down.id_prefix = "ds";
  const ecg::SyntheticDataset downstream = ecg::generate_synthetic(down);
  ecg::write_dataset(paths.downstream_manifest(), downstream.records);

  spdlog::info("synthesized {} pretraining and {} downstream records",
               pretrain.records.size(), downstream.records.size());
  return {pretrain.records.size(), downstream.records.size(), downstream.class_names};
}

MineSummary run_mine(const RunConfig& cfg) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  require(paths.pretrain_manifest(), "synth");
  const ecg::DatasetManifest manifest = ecg::load_manifest(paths.pretrain_manifest());
  std::vector<std::string> reports;
  for (const ecg::ManifestEntry& e : manifest.entries) reports.push_back(e.report);

  std::unique_ptr<miner::ChatClient> base;
  if (cfg.miner.client == "llm") {
    miner::LlmClientConfig llm;
    llm.url = cfg.miner.llm.url;
    llm.model = cfg.miner.llm.model;
    llm.temperature = cfg.miner.llm.temperature;
    llm.max_retries = cfg.miner.llm.max_retries;
    llm.initial_backoff_ms = cfg.miner.llm.initial_backoff_ms;
    llm.timeout_seconds = cfg.miner.llm.timeout_seconds;
    llm.auth_header = cfg.miner.llm.auth_header;
    if (const char* token = std::getenv(cfg.miner.llm.auth_env.c_str())) {
      llm.auth_value = cfg.miner.llm.auth_prefix + token;
    }
    base = std::make_unique<miner::HttpChatClient>(llm);
  } else {
    miner::RuleTables tables = miner::default_rules();
    if (!cfg.miner.rules_path.empty()) {
      std::ifstream in(cfg.miner.rules_path);
      if (!in) throw miner::MinerError("cannot read rules " + cfg.miner.rules_path);
      tables = miner::RuleTables::from_json(json::parse(in));
    }
    base = std::make_unique<miner::RuleBasedClient>(std::move(tables));
  }
  std::unique_ptr<miner::CachingChatClient> cache;
  miner::ChatClient* client = base.get();
  if (cfg.miner.cache) {
    cache = std::make_unique<miner::CachingChatClient>(*base, paths.cache_dir());
    client = cache.get();
  }

  const miner::MinerOptions options{.max_parse_retries = cfg.miner.max_parse_retries,
                                    .concurrency = cfg.miner.concurrency};
  const miner::MiningResult mined = miner::mine_corpus(reports, *client, options);

  write_vocabulary(paths.vocabulary(), mined.vocabulary);
  std::vector<RecordLabels> labels;
  std::string extracted;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    labels.push_back({manifest.entries[i].id, mined.labels[i]});
    extracted += json{{"record_id", manifest.entries[i].id},
                      {"entities", mined.extracted[i]}}.dump() + "\n";
  }
  write_labels(paths.labels(), labels);
  write_text(paths.extracted(), extracted);

  MineSummary s{reports.size(), mined.vocabulary.size(), 0, 0};
  if (cache) {
    s.cache_hits = cache->hits();
    s.cache_misses = cache->misses();
  }
  spdlog::info("mined {} entities from {} reports (cache {} hits, {} misses)", s.entities,
               s.reports, s.cache_hits, s.cache_misses);
  return s;
}

train::PretrainResult run_pretrain(const RunConfig& cfg) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  require(paths.pretrain_manifest(), "synth");
  require(paths.vocabulary(), "mine");
  require(paths.labels(), "mine");
  return train::pretrain({.manifest = paths.pretrain_manifest(),
                          .vocabulary = paths.vocabulary(),
                          .labels = paths.labels(),
                          .model = cfg.model,
                          .train = cfg.train,
                          .out_dir = paths.pretrain_dir()});
}

eval::EvalReport run_zeroshot(const RunConfig& cfg, int leads) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  const fs::path ckpt = eval_checkpoint(cfg, paths);
  const std::vector<std::string> classes = class_names_for(cfg, paths);
  const eval::LeadMode mode = lead_mode(cfg);
  const eval::EvalReport report = eval::zero_shot({.manifest = paths.downstream_manifest(),
                                                   .checkpoint = ckpt,
                                                   .class_names = classes,
                                                   .leads = {leads, mode}});
  write_report(paths.eval_dir(), "zeroshot" + lead_suffix(leads, mode), report);

  if (fs::exists(paths.vocabulary())) {
    const EntityVocabulary vocab = read_vocabulary(paths.vocabulary());
    const LeadwiseModel model = LeadwiseModel::load(ckpt);
    const eval::OverlapResult overlap = eval::seen_unseen_split(
        vocab.entities, classes, model.text(), cfg.eval.overlap_threshold);
    json per_class = json::array();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const double sim = overlap.max_similarity[c];
      per_class.push_back({{"name", classes[c]},
                           {"max_similarity", std::isfinite(sim) ? json(sim) : json(nullptr)},
                           {"nearest_entity", overlap.nearest_entity[c]}});
    }
    write_json(paths.eval_dir() / "overlap.json", {{"threshold", cfg.eval.overlap_threshold},
                                                   {"seen", overlap.seen},
                                                   {"unseen", overlap.unseen},
                                                   {"classes", per_class}});
  }
  spdlog::info("zero-shot macro AUC {}",
               report.macro_auc ? std::to_string(*report.macro_auc) : "undefined");
  return report;
}

eval::EvalReport run_linprobe(const RunConfig& cfg, int leads) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  const fs::path ckpt = eval_checkpoint(cfg, paths);
  const eval::LeadMode mode = lead_mode(cfg);
  const eval::EvalReport report = eval::linear_probe({.manifest = paths.downstream_manifest(),
                                                      .checkpoint = ckpt,
                                                      .class_names = class_names_for(cfg, paths),
                                                      .probe = cfg.probe,
                                                      .leads = {leads, mode}});
  write_report(paths.eval_dir(),
               "linprobe_f" + format_fraction(cfg.probe.fraction) + lead_suffix(leads, mode),
               report);
  spdlog::info("linear probe macro AUC {}",
               report.macro_auc ? std::to_string(*report.macro_auc) : "undefined");
  return report;
}

std::vector<eval::EvalReport> run_leadsweep(const RunConfig& cfg) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  const fs::path ckpt = eval_checkpoint(cfg, paths);
  const bool probe = cfg.eval.sweep_mode == "probe";
  const eval::LeadMode mode = lead_mode(cfg);
  const std::vector<eval::EvalReport> reports =
      eval::lead_sweep({.manifest = paths.downstream_manifest(),
                        .checkpoint = ckpt,
                        .class_names = class_names_for(cfg, paths),
                        .mode = probe ? eval::SweepMode::kProbe : eval::SweepMode::kZeroShot,
                        .lead_mode = mode,
                        .probe = cfg.probe});
  const std::string stem = "leadsweep_" + cfg.eval.sweep_mode + lead_suffix(0, mode);
  json all = json::array();
  for (const eval::EvalReport& r : reports) all.push_back(r.to_json());
  write_json(paths.eval_dir() / (stem + ".json"), all);
  write_text(paths.eval_dir() / (stem + ".csv"), eval::sweep_csv(reports));
  return reports;
}

GradcheckSummary run_gradcheck(const RunConfig& cfg) {
  cfg.validate();
  const GradcheckConfig& g = cfg.gradcheck;
  const auto start = std::chrono::steady_clock::now();

  ecg::SyntheticOptions opts;
  opts.num_classes = cfg.data.num_classes;
  opts.num_records = std::max(static_cast<int>(g.records), opts.num_classes);
  opts.seed = cfg.pretrain_data_seed();
  ecg::SyntheticDataset data = ecg::generate_synthetic(opts);
  data.records.resize(g.records);

  const std::size_t length = g.token_length * g.segments;
  std::vector<ecg::EcgRecord> records;
  std::vector<std::string> reports;
  for (const ecg::EcgRecord& full : data.records) {
    ecg::EcgRecord rec = full;
    rec.length = length;
    rec.signal.clear();
    for (std::size_t row = 0; row < full.num_leads(); ++row) {
      const auto lead = full.lead(row);
      rec.signal.insert(rec.signal.end(), lead.begin(), lead.begin() + length);
    }
    records.push_back(prepare_record(rec));
    reports.push_back(rec.report);
  }

  miner::RuleBasedClient client(miner::default_rules());
  const miner::MiningResult mined = miner::mine_corpus(reports, client);
  const std::vector<std::string>& entities = mined.vocabulary.entities;
  std::vector<train::Example> batch;
  for (std::size_t i = 0; i < records.size(); ++i) {
    batch.push_back({&records[i], reports[i], mined.labels[i].as_targets()});
  }

  ModelConfig m;
  m.encoder.token_length = g.token_length;
  m.encoder.segments = g.segments;
  m.encoder.embed_dim = m.encoder.shared_dim = g.embed_dim;
  m.encoder.num_layers = g.num_layers;
  m.encoder.num_heads = g.num_heads;
  m.encoder.mlp_ratio = 2;
  m.text.embed_dim = m.text.shared_dim = g.embed_dim;
  m.text.num_layers = g.num_layers;
  m.text.num_heads = g.num_heads;
  m.text.mlp_ratio = 2;
  m.query.num_layers = g.num_layers;
  m.query.num_heads = g.num_heads;
  m.query.mlp_ratio = 2;
  m.tie_widths();
  LeadwiseModel model =
      LeadwiseModel::create(m, build_text_vocabulary(reports, entities), cfg.seed);

  train::PretrainConfig tc = cfg.train;
  tc.batch_size = records.size();
  const std::uint64_t mask_seed = cfg.seed;
  const nn::GradCheckResult r = nn::check_gradients(
      [&] {
        Rng rng(mask_seed);  // identical DLM/LSM draws for every evaluation
        return train::total_loss(model, batch, entities, tc, rng).total;
      },
      model.params().all(),
      {.max_coords_per_tensor = g.max_coords_per_tensor, .seed = cfg.seed});

  GradcheckSummary s;
  s.max_rel_error = r.max_rel_error;
  s.worst_tensor = r.worst_tensor;
  s.worst_index = r.worst_index;
  s.worst_analytic = r.worst_analytic;
  s.worst_numeric = r.worst_numeric;
  s.coords_checked = r.coords_checked;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.passed = r.max_rel_error < g.threshold;
  write_json(fs::path(cfg.out_dir) / "gradcheck.json",
             {{"max_rel_error", s.max_rel_error},
              {"threshold", g.threshold},
              {"passed", s.passed},
              {"worst_tensor", s.worst_tensor},
              {"worst_index", s.worst_index},
              {"worst_analytic", s.worst_analytic},
              {"worst_numeric", s.worst_numeric},
              {"coords_checked", s.coords_checked},
              {"records", records.size()},
              {"entities", entities.size()}});
  return s;
}

eval::EvalReport run_all(const RunConfig& cfg) {
  write_run_metadata(cfg);
  run_synth(cfg);
  run_mine(cfg);
  run_pretrain(cfg);
  return run_zeroshot(cfg);
}

GridAxis parse_grid_axis(const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("grid axis must look like key=v1,v2: " + spec);
  }
  GridAxis axis{spec.substr(0, eq), {}};
  std::stringstream values(spec.substr(eq + 1));
  std::string v;
  while (std::getline(values, v, ',')) {
    if (v.empty()) throw ConfigError("empty value in grid axis: " + spec);
    axis.values.push_back(v);
  }
  return axis;
}

std::vector<AblationRun> run_ablate(const RunConfig& cfg, const std::vector<GridAxis>& grid) {
  if (grid.empty()) throw ConfigError("ablate needs at least one grid axis");
  for (const GridAxis& axis : grid) {
    if (axis.values.empty()) throw ConfigError("grid axis without values: " + axis.key);
  }
  // Resolve every point up front so a bad value fails before any training.
  std::vector<std::pair<std::string, RunConfig>> points;
  std::vector<std::size_t> idx(grid.size(), 0);
  const fs::path root = fs::path(cfg.out_dir) / "ablate";
  while (true) {
    RunConfig point = cfg;
    std::string name;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      point.set(grid[a].key, grid[a].values[idx[a]]);
      if (!name.empty()) name += "_";
      name += grid[a].key + "=" + grid[a].values[idx[a]];
    }
    point.out_dir = (root / name).string();
    point.validate();
    points.emplace_back(name, std::move(point));
    std::size_t a = grid.size();
    while (a > 0 && ++idx[a - 1] == grid[a - 1].values.size()) idx[--a] = 0;
    if (a == 0) break;
  }

  std::vector<AblationRun> runs;
  std::string csv;
  for (const GridAxis& axis : grid) csv += axis.key + ",";
  csv += "final_loss,zero_shot_macro_auc\n";
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& [name, point] = points[p];
    spdlog::info("ablation {}/{}: {}", p + 1, points.size(), name);
    write_run_metadata(point);
    run_synth(point);
    run_mine(point);
    const train::PretrainResult trained = run_pretrain(point);
    const eval::EvalReport report = run_zeroshot(point);
    runs.push_back({name, point.out_dir, trained.final_loss, report.macro_auc});

    std::size_t rem = p;
    std::vector<std::string> cells(grid.size());
    for (std::size_t a = grid.size(); a-- > 0;) {
      cells[a] = grid[a].values[rem % grid[a].values.size()];
      rem /= grid[a].values.size();
    }
    for (const std::string& c : cells) csv += c + ",";
    std::ostringstream row;
    row.precision(17);
    row << trained.final_loss << ",";
    if (report.macro_auc) row << *report.macro_auc;
    csv += row.str() + "\n";
  }
  write_text(root / "summary.csv", csv);
  return runs;
}

}  // namespace leadwise::pipeline
