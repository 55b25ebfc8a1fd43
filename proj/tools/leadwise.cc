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

// leadwise: synth | mine | pretrain | zeroshot | linprobe | leadsweep |
// gradcheck | ablate. Every command works on one run directory (--out).

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "leadwise/checkpoint.h"
#include "leadwise/ecg_data.h"
#include "leadwise/http.h"
#include "leadwise/knowledge_miner.h"
#include "leadwise/pipeline.h"
#include "leadwise/run_config.h"

namespace {

namespace fs = std::filesystem;
using leadwise::RunConfig;
using nlohmann::json;

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string client;
  int leads = 0;
  std::vector<std::string> grid;
  std::string mode;
  bool zero_pad = false;
  std::optional<double> fraction;
  std::string log_level = "info";
};

RunConfig resolve_config(const Flags& f) {
  RunConfig cfg;
  const fs::path out = f.out.empty() ? fs::path(cfg.out_dir) : fs::path(f.out);
  if (!f.config.empty()) {
    cfg = RunConfig::load(f.config);
  } else if (fs::exists(out / "config.json")) {
    cfg = RunConfig::load(out / "config.json");
  }
  if (!f.out.empty()) cfg.set("out_dir", json(f.out).dump());
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (!f.client.empty()) cfg.set("miner.client", json(f.client).dump());
  if (!f.mode.empty()) cfg.set("eval.sweep_mode", json(f.mode).dump());
  if (f.zero_pad) cfg.set("eval.lead_mode", "\"zero_pad\"");
  if (f.fraction) cfg.set("probe.fraction", json(*f.fraction).dump());
  for (const std::string& kv : f.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw leadwise::ConfigError("--set expects key=value, got: " + kv);
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void setup_logging(const RunConfig& cfg, const std::string& command, const std::string& level) {
  const fs::path log = leadwise::pipeline::RunPaths(cfg.out_dir).logs_dir() / (command + ".log");
  fs::create_directories(log.parent_path());
  auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(log.string(), true);
  auto logger = std::make_shared<spdlog::logger>("leadwise", spdlog::sinks_init_list{console, file});
  logger->set_level(spdlog::level::from_str(level));
  logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

void write_latest(const RunConfig& cfg) {
  const fs::path out = fs::absolute(cfg.out_dir);
  std::ofstream latest(out.parent_path() / "LATEST", std::ios::trunc);
  if (latest) latest << out.string() << "\n";
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const leadwise::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const leadwise::ecg::DataError*>(&e)) return "data";
  if (dynamic_cast<const leadwise::miner::MinerError*>(&e)) return "mining";
  if (dynamic_cast<const leadwise::VocabularyError*>(&e)) return "vocabulary";
  if (dynamic_cast<const leadwise::train::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const leadwise::eval::EvalError*>(&e)) return "evaluation";
  if (dynamic_cast<const leadwise::nn::CheckpointError*>(&e)) return "checkpoint";
  if (dynamic_cast<const leadwise::HttpError*>(&e)) return "http";
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "json";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  return "runtime";
}

json report_json(const leadwise::eval::EvalReport& r) {
  return {{"task", r.task},
          {"macro_auc", r.macro_auc ? json(*r.macro_auc) : json(nullptr)},
          {"macro_f1", r.macro_f1 ? json(*r.macro_f1) : json(nullptr)},
          {"num_records", r.num_records}};
}

// Returns the process exit code.
int run_command(const std::string& command, const Flags& f) {
  namespace pl = leadwise::pipeline;
  const RunConfig cfg = resolve_config(f);
  setup_logging(cfg, command, f.log_level);
  const bool evaluation =
      command == "zeroshot" || command == "linprobe" || command == "leadsweep";
  pl::write_run_metadata(cfg, evaluation ? command : "");
  write_latest(cfg);

  json out;
  int code = 0;
  if (command == "synth") {
    const pl::SynthSummary s = pl::run_synth(cfg);
    out = {{"pretrain_records", s.pretrain_records},
           {"downstream_records", s.downstream_records},
           {"class_names", s.class_names}};
  } else if (command == "mine") {
    const pl::MineSummary s = pl::run_mine(cfg);
    out = {{"reports", s.reports},
           {"entities", s.entities},
           {"cache_hits", s.cache_hits},
           {"cache_misses", s.cache_misses}};
  } else if (command == "pretrain") {
    const leadwise::train::PretrainResult r = pl::run_pretrain(cfg);
    out = {{"steps", r.steps},
           {"initial_loss", r.initial_loss},
           {"final_loss", r.final_loss},
           {"best_loss", r.best_loss},
           {"final_checkpoint", r.final_checkpoint.string()},
           {"best_checkpoint", r.best_checkpoint.string()}};
  } else if (command == "zeroshot") {
    out = report_json(pl::run_zeroshot(cfg, f.leads));
  } else if (command == "linprobe") {
    out = report_json(pl::run_linprobe(cfg, f.leads));
  } else if (command == "leadsweep") {
    out = json::array();
    for (const auto& r : pl::run_leadsweep(cfg)) out.push_back(report_json(r));
  } else if (command == "gradcheck") {
    const pl::GradcheckSummary s = pl::run_gradcheck(cfg);
    out = {{"max_rel_error", s.max_rel_error},
           {"threshold", cfg.gradcheck.threshold},
           {"passed", s.passed},
           {"worst_tensor", s.worst_tensor},
           {"worst_index", s.worst_index},
           {"coords_checked", s.coords_checked},
           {"seconds", s.seconds}};
    code = s.passed ? 0 : 1;
  } else if (command == "ablate") {
    std::vector<pl::GridAxis> grid;
    for (const std::string& g : f.grid) grid.push_back(pl::parse_grid_axis(g));
    out = json::array();
    for (const pl::AblationRun& r : pl::run_ablate(cfg, grid)) {
      out.push_back({{"name", r.name},
                     {"dir", r.dir.string()},
                     {"final_loss", r.final_loss},
                     {"zero_shot_macro_auc",
                      r.zero_shot_macro_auc ? json(*r.zero_shot_macro_auc) : json(nullptr)}});
    }
  }
  std::cout << out.dump(2) << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lead-aware ECG/report pretraining and evaluation"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Run config JSON")->check(CLI::ExistingFile);
  app.add_option("--set", f.sets, "Override key=value (repeatable)");
  app.add_option("--seed", f.seed, "Top-level seed");
  app.add_option("--out", f.out, "Run directory");
  app.add_option("--client", f.client, "Miner client")->check(CLI::IsMember({"llm", "rule"}));
  app.add_option("--leads", f.leads, "Use the first k leads")->check(CLI::Range(1, 12));
  app.add_option("--grid", f.grid, "Ablation axis key=v1,v2 (repeatable)");
  app.add_option("--mode", f.mode, "Lead sweep mode")
      ->check(CLI::IsMember({"zero_shot", "probe"}));
  app.add_flag("--zero-pad", f.zero_pad, "Zero-pad missing leads instead of dropping them");
  app.add_option("--fraction", f.fraction, "Linear probe training fraction");
  app.add_option("--log-level", f.log_level, "trace|debug|info|warn|error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.fallthrough();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate the synthetic pretraining and downstream datasets"},
      {"mine", "Extract entities and label vectors from pretraining reports"},
      {"pretrain", "Pretrain the encoders and the query network"},
      {"zeroshot", "Zero-shot classification with class names as queries"},
      {"linprobe", "Linear probe on frozen encoder features"},
      {"leadsweep", "Evaluate with the first k leads for k = 1..12"},
      {"gradcheck", "Compare analytic and numeric gradients of the objective"},
      {"ablate", "Run the full pipeline over a configuration grid"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "ablate" && f.grid.empty()) {
    std::cerr << json{{"error", {{"command", command},
                                 {"kind", "usage"},
                                 {"message", "ablate requires --grid key=v1,v2"}}}}
                     .dump()
              << std::endl;
    return 2;
  }
  try {
    return run_command(command, f);
  } catch (const std::exception& e) {
    const std::string kind = error_kind(e);
    std::cerr << json{{"error", {{"command", command}, {"kind", kind}, {"message", e.what()}}}}
                     .dump()
              << std::endl;
    return kind == "config" ? 2 : 1;
  }
}
