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

// Acceptance run: one PASS/FAIL line per criterion. End-to-end criteria drive
// the leadwise binary with default settings.
//
// Usage: leadwise_acceptance [work_dir]

#include <spdlog/spdlog.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leadwise/ecg_data.h"
#include "leadwise/evaluation.h"
#include "leadwise/knowledge_miner.h"
#include "leadwise/lead_encoder.h"
#include "leadwise/pipeline.h"
#include "leadwise/rng.h"
#include "mining_fixture.h"

namespace leadwise {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
constexpr int kDlmDraws = 10000;
constexpr double kDlmSigmas = 3.0;
constexpr int kEquivalenceSubsets = 200;
constexpr double kLossReduction = 0.90;
constexpr std::size_t kMaxSteps = 300;
constexpr std::size_t kFinalWindow = 10;
constexpr double kPretrainBudgetSeconds = 15 * 60.0;
constexpr double kZeroShotMinAuc = 0.90;
constexpr std::size_t kTestRecords = 32;
constexpr double kLeadDropTolerance = 0.15;
constexpr int kFuzzReports = 1000;
constexpr int kAucInstances = 1000;
constexpr std::size_t kAucMaxN = 50;
constexpr double kAucTolerance = 1e-12;
constexpr double kProbeSlack = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Runs the CLI; throws on a nonzero exit. Returns wall-clock seconds.
double cli(const std::string& args, const fs::path& log) {
  const auto start = std::chrono::steady_clock::now();
  const std::string cmd =
      std::string(LEADWISE_CLI) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("`leadwise " + args + "` failed; see " + log.string());
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct PipelineRun {
  fs::path dir;
  double pretrain_seconds = 0.0;
};

PipelineRun full_pipeline(const fs::path& dir, const std::string& extra, const fs::path& log) {
  fs::remove_all(dir);
  const std::string base = "--out " + dir.string() + " " + extra;
  PipelineRun run{dir, 0.0};
  cli("synth " + base, log);
  cli("mine --client rule " + base, log);
  run.pretrain_seconds = cli("pretrain " + base, log);
  cli("zeroshot " + base, log);
  return run;
}

double macro_auc(const json& report) {
  if (report["macro_auc"].is_null()) throw std::runtime_error("macro AUC undefined");
  return report["macro_auc"].get<double>();
}

// --- Criteria ---------------------------------------------------------------

Outcome gradient_correctness(const fs::path& work) {
  RunConfig cfg;
  cfg.out_dir = (work / "gradcheck").string();
  const pipeline::GradcheckSummary s = pipeline::run_gradcheck(cfg);
  const bool full = cfg.gradcheck.records == 2 && cfg.gradcheck.embed_dim == 8 &&
                    cfg.gradcheck.num_layers == 1 && cfg.gradcheck.max_coords_per_tensor == 0;
  return {full && s.max_rel_error < kGradTolerance && s.seconds < kGradBudgetSeconds,
          "max rel err " + num(s.max_rel_error, 3) + " (< " + num(kGradTolerance) + ") over " +
              std::to_string(s.coords_checked) + " coords, " + num(s.seconds, 3) + " s (< " +
              num(kGradBudgetSeconds) + " s)"};
}

Outcome masking_statistics() {
  const encoder::TokenizerConfig tc;  // p = 100, M = 50
  ecg::SyntheticOptions opts;
  opts.num_records = 4;
  const ecg::EcgRecord rec = ecg::normalize_record(ecg::generate_synthetic(opts).records[0]);
  const encoder::TokenGrid grid = encoder::tokenize(rec, tc);
  const std::size_t expected_masked = static_cast<std::size_t>(std::floor(0.25 * tc.segments));

  Rng rng(2026);
  std::map<int, int> counts;
  bool lsm_exact = true;
  for (int i = 0; i < kDlmDraws; ++i) {
    const encoder::TokenGrid dlm = encoder::dynamic_lead_mask(grid, rng);
    ++counts[ecg::kNumLeads - static_cast<int>(dlm.num_rows())];
    const encoder::TokenGrid lsm = encoder::segment_mask(dlm, rng);
    for (std::size_t r = 0; r < lsm.num_rows(); ++r) {
      lsm_exact &= tc.segments - lsm.kept_in_row(r) == expected_masked;
    }
  }
  const double p = 1.0 / 3.0;
  const double sigma = std::sqrt(kDlmDraws * p * (1 - p));
  bool uniform = counts.size() == 3;
  std::string freq;
  for (int k = 9; k <= 11; ++k) {
    uniform &= std::abs(counts[k] - kDlmDraws * p) <= kDlmSigmas * sigma;
    freq += (freq.empty() ? "" : ", ") + std::to_string(k) + ":" + std::to_string(counts[k]);
  }
  return {uniform && lsm_exact && expected_masked == 12,
          "DLM counts {" + freq + "} vs " + num(kDlmDraws * p, 6) + " +/- " +
              num(kDlmSigmas * sigma, 4) + "; LSM masked exactly " +
              std::to_string(expected_masked) + " per surviving lead: " +
              (lsm_exact ? "yes" : "no")};
}

bool same_bits(const nn::Tensor& a, const nn::Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(double)) ==
             0;
}

Outcome masking_absence_equivalence() {
  const encoder::TokenizerConfig tc;
  nn::ParamStore store;
  Rng init(3);
  const encoder::EcgEncoder enc = encoder::EcgEncoder::create(store, tc, init);
  ecg::SyntheticOptions opts;
  opts.num_records = 4;
  const ecg::EcgRecord rec = ecg::normalize_record(ecg::generate_synthetic(opts).records[1]);
  const encoder::TokenGrid full = encoder::tokenize(rec, tc);

  nn::NoGradGuard no_grad;
  Rng rng(77);
  int identical = 0;
  for (int t = 0; t < kEquivalenceSubsets; ++t) {
    std::vector<int> ids(ecg::kNumLeads);
    for (int i = 0; i < ecg::kNumLeads; ++i) ids[i] = i + 1;
    rng.shuffle(ids);
    const std::size_t k = 1 + rng.uniform_int(static_cast<std::size_t>(ecg::kNumLeads));
    const std::vector<int> keep(ids.begin(), ids.begin() + static_cast<long>(k));
    const std::vector<int> drop(ids.begin() + static_cast<long>(k), ids.end());
    const encoder::EncodeOutput a =
        enc.encode(encoder::tokenize(ecg::restrict_leads(rec, keep), tc));
    const encoder::EncodeOutput b = enc.encode(encoder::mask_leads(full, drop));
    if (same_bits(a.tokens, b.tokens) && same_bits(a.features, b.features) &&
        same_bits(a.embedding, b.embedding) && a.leads_used == b.leads_used) {
      ++identical;
    }
  }
  return {identical == kEquivalenceSubsets,
          std::to_string(identical) + "/" + std::to_string(kEquivalenceSubsets) +
              " random subsets bit-identical (tokens, pooled features, embedding)"};
}

Outcome overfit_convergence(const PipelineRun& run) {
  std::vector<double> losses;
  std::istringstream lines(slurp(run.dir / "pretrain" / "metrics.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) losses.push_back(json::parse(line)["loss_total"].get<double>());
  }
  if (losses.size() != kMaxSteps) {
    return {false, "expected " + std::to_string(kMaxSteps) + " steps, logged " +
                       std::to_string(losses.size())};
  }
  double tail = 0.0;
  for (std::size_t i = losses.size() - kFinalWindow; i < losses.size(); ++i) tail += losses[i];
  tail /= static_cast<double>(kFinalWindow);
  const double reduction = 1.0 - tail / losses.front();
  return {reduction >= kLossReduction && run.pretrain_seconds < kPretrainBudgetSeconds,
          "step-0 loss " + num(losses.front()) + ", mean of last " +
              std::to_string(kFinalWindow) + " steps " + num(tail) + ", reduction " +
              num(100 * reduction, 4) + "% (>= " + num(100 * kLossReduction) + "%), pretrain " +
              num(run.pretrain_seconds, 4) + " s (< " + num(kPretrainBudgetSeconds) + " s)"};
}

Outcome zero_shot_functionality(const PipelineRun& run, const PipelineRun& no_cq) {
  const json full = read_json(run.dir / "eval" / "zeroshot.json");
  const json ablated = read_json(no_cq.dir / "eval" / "zeroshot.json");
  const double auc = macro_auc(full);
  const double auc_no_cq = macro_auc(ablated);
  const std::size_t n = full["num_records"].get<std::size_t>();
  const bool ablation_ran = !read_json(no_cq.dir / "config.json")["train"]["use_cq"].get<bool>();
  return {n == kTestRecords && auc >= kZeroShotMinAuc && ablation_ran && auc_no_cq < auc,
          "macro AUC " + num(auc) + " (>= " + num(kZeroShotMinAuc) + ") on " +
              std::to_string(n) + " test records; without the query loss " + num(auc_no_cq) +
              " (must be lower)"};
}

Outcome partial_lead_robustness(const PipelineRun& run) {
  const json sweep = read_json(run.dir / "eval" / "leadsweep_zero_shot.json");
  if (sweep.size() != 12) return {false, "expected 12 reports, got " + std::to_string(sweep.size())};
  for (std::size_t k = 0; k < 12; ++k) {
    if (sweep[k]["leads"].size() != k + 1) return {false, "k=" + std::to_string(k + 1) + " lead set"};
  }
  json k12 = sweep[11];
  json zs = read_json(run.dir / "eval" / "zeroshot.json");
  k12.erase("task");
  zs.erase("task");
  const bool identical = k12.dump() == zs.dump();
  const double a1 = macro_auc(sweep[0]);
  const double a12 = macro_auc(sweep[11]);
  return {identical && a1 >= a12 - kLeadDropTolerance,
          "AUC(k=1) " + num(a1) + " vs AUC(k=12) " + num(a12) + " (tolerance " +
              num(kLeadDropTolerance) + "); k=12 identical to zero-shot: " +
              (identical ? "yes" : "no")};
}

Outcome knowledge_fidelity() {
  const auto f = testing_support::load_mining_fixture(LEADWISE_FIXTURE_DIR "/mining");
  miner::RuleBasedClient client(f.rules);
  const miner::MiningResult r = miner::mine_corpus(f.reports, client);
  bool fixture = r.extracted == f.expected_entities &&
                 r.vocabulary.entities == f.expected_vocabulary.entities &&
                 r.merge_map == f.expected_vocabulary.merge_map &&
                 r.superclasses == f.expected_vocabulary.superclasses &&
                 r.labels.size() == f.expected_labels.size();
  for (std::size_t i = 0; fixture && i < r.labels.size(); ++i) {
    fixture = r.labels[i] == f.expected_labels[i].labels;
  }

  const miner::RuleTables rules = miner::default_rules();
  miner::RuleBasedClient fuzz_client(rules);
  Rng rng(2024);
  std::vector<std::string> reports;
  for (int i = 0; i < kFuzzReports; ++i) reports.push_back(testing_support::fuzz_report(rules, rng));
  const miner::MiningResult fr = miner::mine_corpus(reports, fuzz_client);
  int guard_violations = 0, closure_violations = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::string lower = testing_support::lowercase(reports[i]);
    for (const std::string& e : fr.extracted[i]) {
      guard_violations += lower.find(e) == std::string::npos;
    }
    closure_violations += !testing_support::superclass_closed(fr.labels[i], fr.vocabulary);
  }
  return {fixture && guard_violations == 0 && closure_violations == 0,
          std::to_string(f.reports.size()) + "-report fixture exact match: " +
              (fixture ? "yes" : "no") + "; " + std::to_string(kFuzzReports) +
              " fuzzed reports: " + std::to_string(guard_violations) + " guard and " +
              std::to_string(closure_violations) + " closure violations"};
}

double auc_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

Outcome metric_oracle() {
  const std::vector<double> ws = {0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> wl = {0, 0, 1, 1};
  const auto worked = eval::compute_auc(ws, wl);
  const bool exact = worked && *worked == 0.75;

  Rng rng(8);
  double worst = 0.0;
  int checked = 0;
  for (int t = 0; t < kAucInstances; ++t) {
    const std::size_t n = 2 + rng.uniform_int(kAucMaxN - 1);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties occur.
      s[i] = rng.uniform() < 0.3 ? std::floor(rng.uniform() * 5) / 5 : rng.uniform();
      y[i] = rng.uniform() < 0.5;
    }
    y[0] = 1;
    y[1] = 0;
    const auto auc = eval::compute_auc(s, y);
    if (!auc) return {false, "AUC undefined on a two-class instance"};
    worst = std::max(worst, std::abs(*auc - auc_oracle(s, y)));
    ++checked;
  }
  return {exact && worst <= kAucTolerance,
          "worked example " + (worked ? num(*worked, 17) : std::string("undefined")) +
              " (exact 0.75: " + (exact ? "yes" : "no") + "); max |AUC - oracle| " +
              num(worst, 3) + " over " + std::to_string(checked) + " instances (<= " +
              num(kAucTolerance) + ")"};
}

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
  std::vector<std::string> differing;
  int compared = 0;
  for (const char* rel : {"pretrain/metrics.jsonl", "pretrain/valid.jsonl",
                          "pretrain/checkpoint_final.ckpt", "pretrain/checkpoint_best.ckpt",
                          "mining/vocabulary.json", "mining/labels.jsonl", "eval/zeroshot.json",
                          "data/pretrain/signals.f32", "data/downstream/signals.f32"}) {
    ++compared;
    if (slurp(a.dir / rel) != slurp(b.dir / rel)) differing.push_back(rel);
  }
  std::string detail = std::to_string(compared - static_cast<int>(differing.size())) + "/" +
                       std::to_string(compared) +
                       " artifacts byte-identical (metrics logs, checkpoints, data, labels, "
                       "zero-shot report)";
  for (const std::string& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

Outcome probe_upper_bound(const PipelineRun& run) {
  const double zs = macro_auc(read_json(run.dir / "eval" / "zeroshot.json"));
  const double probe = macro_auc(read_json(run.dir / "eval" / "linprobe_f1.json"));
  return {probe >= zs - kProbeSlack, "probe macro AUC " + num(probe) + " vs zero-shot " +
                                         num(zs) + " (slack " + num(kProbeSlack) + ")"};
}

int run(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const fs::path work = fs::absolute(argc > 1 ? argv[1] : "acceptance_runs");
  fs::create_directories(work);
  const fs::path log = work / "cli.log";
  fs::remove(log);

  std::vector<std::pair<std::string, Outcome>> results;
  const auto record = [&](const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << " ["
              << num(secs, 3) << " s]" << std::endl;
    results.emplace_back(name, o);
  };

  record("1 gradient correctness", [&] { return gradient_correctness(work); });
  record("2 masking statistics", masking_statistics);
  record("3 masking/absence equivalence", masking_absence_equivalence);

  PipelineRun a, b, no_cq;
  bool a_ok = false;
  record("4 overfit convergence", [&] {
    a = full_pipeline(work / "run_a", "--seed 7", log);
    a_ok = true;
    return overfit_convergence(a);
  });
  record("5 zero-shot functionality", [&]() -> Outcome {
    if (!a_ok) return {false, "criterion 4 run unavailable"};
    no_cq = full_pipeline(work / "run_no_cq", "--seed 7 --set use_cq=false", log);
    return zero_shot_functionality(a, no_cq);
  });
  record("6 partial-lead robustness", [&]() -> Outcome {
    if (!a_ok) return {false, "criterion 4 run unavailable"};
    cli("leadsweep --out " + a.dir.string(), log);
    return partial_lead_robustness(a);
  });
  record("7 knowledge pipeline fidelity", knowledge_fidelity);
  record("8 metric oracle", metric_oracle);
  record("9 determinism", [&]() -> Outcome {
    if (!a_ok) return {false, "criterion 4 run unavailable"};
    b = full_pipeline(work / "run_b", "--seed 7", log);
    return determinism(a, b);
  });
  record("linear probe >= zero-shot - 0.05", [&]() -> Outcome {
    if (!a_ok) return {false, "criterion 4 run unavailable"};
    cli("linprobe --fraction 1 --out " + a.dir.string(), log);
    return probe_upper_bound(a);
  });

  int passed = 0;
  json summary = json::array();
  for (const auto& [name, o] : results) {
    passed += o.pass;
    summary.push_back({{"criterion", name}, {"pass", o.pass}, {"detail", o.detail}});
  }
  std::ofstream(work / "acceptance.json") << summary.dump(2) << "\n";
  std::cout << passed << "/" << results.size() << " checks passed" << std::endl;
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}

}  // namespace
}  // namespace leadwise

int main(int argc, char** argv) { return leadwise::run(argc, argv); }
