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

// Drives the leadwise binary end to end on a tiny configuration.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gtest/gtest.h"
#include "leadwise/pipeline.h"

namespace leadwise {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("leadwise_cli_test_" + std::to_string(getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    const json tiny = {
        {"data", {{"pretrain_records", 12}, {"downstream_records", 24}}},
        {"train", {{"max_steps", 2}, {"batch_size", 4}}},
        {"probe", {{"epochs", 2}, {"warmup_epochs", 1}}},
        {"model",
         {{"encoder", {{"embed_dim", 16}, {"shared_dim", 16}, {"num_layers", 1}, {"num_heads", 2}}},
          {"text", {{"embed_dim", 16}, {"shared_dim", 16}, {"num_layers", 1}, {"num_heads", 2}}},
          {"query", {{"num_layers", 1}, {"num_heads", 2}}}}}};
    std::ofstream(root_ / "tiny.json") << tiny.dump(2);
  }

  static Outcome run(const std::string& args) {
    static int n = 0;
    const fs::path out = root_ / ("stdout" + std::to_string(n));
    const fs::path err = root_ / ("stderr" + std::to_string(n++));
    const std::string cmd = std::string(LEADWISE_CLI) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  static std::string tiny() { return "--config " + (root_ / "tiny.json").string(); }

  static void pipeline(const fs::path& dir, const std::string& extra = "") {
    const std::string base = tiny() + " --out " + dir.string() + " " + extra;
    for (const char* cmd : {"synth", "mine --client rule", "pretrain", "zeroshot"}) {
      const Outcome o = run(std::string(cmd) + " " + base);
      ASSERT_EQ(o.code, 0) << cmd << ": " << o.err;
    }
  }

  static void TearDownTestSuite() { fs::remove_all(root_); }

  static inline fs::path root_;
};

TEST_F(CliTest, FullPipelineIsByteReproducible) {
  const fs::path a = root_ / "a", b = root_ / "b", c = root_ / "c";
  pipeline(a);
  pipeline(b);
  pipeline(c, "--seed 99");
  const pipeline::RunPaths pa(a), pb(b), pc(c);
  for (const fs::path& rel :
       {fs::path("pretrain/metrics.jsonl"), fs::path("pretrain/valid.jsonl"),
        fs::path("pretrain/checkpoint_final.ckpt"), fs::path("pretrain/checkpoint_best.ckpt"),
        fs::path("mining/vocabulary.json"), fs::path("mining/labels.jsonl"),
        fs::path("eval/zeroshot.json"), fs::path("seeds.json")}) {
    ASSERT_TRUE(fs::exists(a / rel)) << rel;
    EXPECT_EQ(slurp(a / rel), slurp(b / rel)) << rel;
  }
  json ca = json::parse(slurp(pa.config())), cb = json::parse(slurp(pb.config()));
  ca.erase("out_dir");
  cb.erase("out_dir");
  EXPECT_EQ(ca, cb);
  EXPECT_NE(slurp(pa.checkpoint("final")), slurp(pc.checkpoint("final")));
  for (const char* f : {"hashes.json", "logs/pretrain.log", "eval/overlap.json",
                        "eval/zeroshot_per_class.csv", "mining/extracted.jsonl"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  const json hashes = json::parse(slurp(pa.hashes()));
  EXPECT_EQ(hashes["config"].get<std::string>().size(), 40u);
  EXPECT_EQ(hashes["code"].get<std::string>().size(), 40u);
  EXPECT_EQ(slurp(root_ / "LATEST"), fs::absolute(c).string() + "\n");
}

TEST_F(CliTest, EvaluationCommandsAndFlagsDoNotPersist) {
  const fs::path d = root_ / "eval";
  pipeline(d);
  Outcome o = run("leadsweep --zero-pad --out " + d.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(json::parse(o.out).size(), 12u);
  EXPECT_TRUE(fs::exists(d / "eval/leadsweep_zero_shot_zeropad.csv"));
  EXPECT_EQ(json::parse(slurp(d / "config.json"))["eval"]["lead_mode"], "native");
  EXPECT_EQ(json::parse(slurp(d / "logs/leadsweep.config.json"))["eval"]["lead_mode"],
            "zero_pad");

  o = run("zeroshot --leads 3 --out " + d.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(json::parse(slurp(d / "eval/zeroshot_k3.json"))["leads"], json({1, 2, 3}));

  o = run("linprobe --fraction 0.5 --out " + d.string());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(json::parse(o.out)["task"], "linear_probe");
  EXPECT_DOUBLE_EQ(json::parse(slurp(d / "eval/linprobe_f0.5.json"))["data_fraction"], 0.5);
}

TEST_F(CliTest, AblateEmitsOneRunPerGridPoint) {
  const fs::path d = root_ / "abl";
  const Outcome o = run("ablate " + tiny() + " --out " + d.string() +
                        " --grid mask_ratio=0.25,0.5,0.75");
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* name : {"mask_ratio=0.25", "mask_ratio=0.5", "mask_ratio=0.75"}) {
    const fs::path run_dir = d / "ablate" / name;
    EXPECT_TRUE(fs::exists(run_dir / "pretrain/checkpoint_final.ckpt")) << name;
    EXPECT_TRUE(fs::exists(run_dir / "eval/zeroshot.json")) << name;
  }
  EXPECT_DOUBLE_EQ(json::parse(slurp(d / "ablate/mask_ratio=0.5/config.json"))["train"]
                                    ["mask_ratio"].get<double>(),
                   0.5);
  std::istringstream csv(slurp(d / "ablate/summary.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 4);
}

TEST_F(CliTest, AblateRejectsBadGridBeforeTraining) {
  const fs::path d = root_ / "abl_bad";
  Outcome o = run("ablate " + tiny() + " --out " + d.string() + " --grid mask_ratio=0.25,2");
  EXPECT_EQ(o.code, 2);
  EXPECT_FALSE(fs::exists(d / "ablate/mask_ratio=0.25"));
  o = run("ablate " + tiny() + " --out " + d.string());
  EXPECT_EQ(o.code, 2);
}

TEST_F(CliTest, GradcheckReportsAndEnforcesThreshold) {
  const fs::path d = root_ / "gc";
  Outcome o = run("gradcheck --out " + d.string());
  ASSERT_EQ(o.code, 0) << o.err;
  const json r = json::parse(o.out);
  EXPECT_LT(r["max_rel_error"].get<double>(), 1e-4);
  EXPECT_TRUE(r["passed"].get<bool>());
  o = run("gradcheck --out " + d.string() + " --set gradcheck.threshold=1e-15");
  EXPECT_EQ(o.code, 1);
  EXPECT_FALSE(json::parse(o.out)["passed"].get<bool>());
}

TEST_F(CliTest, ErrorsAreStructured) {
  Outcome o = run("synth --out " + (root_ / "err").string() + " --set train.nope=1");
  EXPECT_EQ(o.code, 2);
  const json e = json::parse(o.err)["error"];
  EXPECT_EQ(e["kind"], "config");
  EXPECT_EQ(e["command"], "synth");
  EXPECT_NE(e["message"].get<std::string>().find("train.nope"), std::string::npos);

  o = run("pretrain --out " + (root_ / "empty").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(json::parse(o.err)["error"]["message"].get<std::string>().find("synth"),
            std::string::npos);

  EXPECT_NE(run("--out x").code, 0);
  EXPECT_NE(run("frobnicate").code, 0);
}

}  // namespace
}  // namespace leadwise
