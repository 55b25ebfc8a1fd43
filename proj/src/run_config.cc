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

#include "leadwise/run_config.h"

#include <cmath>
#include <fstream>
#include <map>

#include "leadwise/ecg_data.h"

namespace leadwise {

using nlohmann::json;

namespace {

std::string kind_name(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

// Overlays `src` onto `dst`. Every key must already exist in `dst` with a
// compatible type.
void strict_merge(json& dst, const json& src, const std::string& where) {
  if (!src.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!dst.contains(key)) throw ConfigError("unknown config key " + path);
    json& slot = dst[key];
    if (slot.is_object()) {
      strict_merge(slot, value, path);
      continue;
    }
    if (kind_name(slot) != kind_name(value)) {
      throw ConfigError(path + ": expected " + kind_name(slot) + ", got " +
                        kind_name(value));
    }
    if (slot.is_number_integer() && !value.is_number_integer()) {
      const double d = value.get<double>();
      if (d != std::floor(d)) throw ConfigError(path + ": expected an integer");
      if (slot.is_number_unsigned()) {
        if (d < 0) throw ConfigError(path + ": must be >= 0");
        slot = static_cast<std::uint64_t>(d);
      } else {
        slot = static_cast<std::int64_t>(d);
      }
      continue;
    }
    if (slot.is_number_unsigned() && value.is_number_integer() &&
        !value.is_number_unsigned() && value.get<std::int64_t>() < 0) {
      throw ConfigError(path + ": must be >= 0");
    }
    if (slot.is_array()) {
      for (const json& item : value) {
        if (!item.is_string()) throw ConfigError(path + ": expected strings");
      }
    }
    slot = value;
  }
}

std::vector<std::string> split_path(std::string_view key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  for (const std::string& p : parts) {
    if (p.empty()) throw ConfigError("malformed config key: " + std::string(key));
  }
  return parts;
}

}  // namespace

RunConfig::RunConfig() {
  train.max_steps = 300;
  train.lr = 1e-3;
  train.warmup_steps = 30;
  model.tie_widths();
}

std::string resolve_config_key(std::string_view key) {
  static const std::map<std::string, std::string, std::less<>> kAliases = {
      {"mask_ratio", "train.mask_ratio"},
      {"min_masked_leads", "train.min_masked_leads"},
      {"max_masked_leads", "train.max_masked_leads"},
      {"dlm", "train.dynamic_lead_masking"},
      {"lsm", "train.segment_masking"},
      {"use_cq", "train.use_cq"},
      {"use_contrast", "train.use_contrast"},
      {"token_length", "model.encoder.token_length"},
      {"cq_layers", "model.query.num_layers"},
      {"cq_heads", "model.query.num_heads"},
      {"lr", "train.lr"},
      {"max_steps", "train.max_steps"},
  };
  if (auto it = kAliases.find(key); it != kAliases.end()) return it->second;
  return std::string(key);
}

void RunConfig::validate() const {
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (model.encoder.signal_length() != ecg::kSyntheticLength) {
    throw ConfigError("model.encoder.token_length * segments must equal " +
                      std::to_string(ecg::kSyntheticLength));
  }
  if (data.pretrain_records < 2 || data.downstream_records < 2) {
    throw ConfigError("data: need at least two records per dataset");
  }
  if (data.num_classes < 1 || data.num_classes > ecg::kMaxSyntheticClasses) {
    throw ConfigError("data.num_classes must be in [1, " +
                      std::to_string(ecg::kMaxSyntheticClasses) + "]");
  }
  auto fraction_ok = [](double f) { return f >= 0.0 && f < 1.0; };
  if (!fraction_ok(data.pretrain_valid_fraction) ||
      !fraction_ok(data.downstream_valid_fraction) ||
      !fraction_ok(data.downstream_test_fraction) ||
      data.downstream_valid_fraction + data.downstream_test_fraction >= 1.0) {
    throw ConfigError("data split fractions must be in [0, 1) and leave a train split");
  }
  if (miner.client != "rule" && miner.client != "llm") {
    throw ConfigError("miner.client must be \"rule\" or \"llm\"");
  }
  if (miner.client == "llm" && (miner.llm.url.empty() || miner.llm.model.empty())) {
    throw ConfigError("miner.llm.url and miner.llm.model are required for the llm client");
  }
  if (miner.max_parse_retries < 0 || miner.concurrency == 0) {
    throw ConfigError("miner: max_parse_retries >= 0 and concurrency >= 1 required");
  }
  if (!(probe.fraction > 0.0 && probe.fraction <= 1.0)) {
    throw ConfigError("probe.fraction must be in (0, 1]");
  }
  if (probe.batch_size == 0 || probe.epochs == 0 || !(probe.lr > 0.0)) {
    throw ConfigError("probe: batch_size, epochs and lr must be positive");
  }
  if (eval.checkpoint != "final" && eval.checkpoint != "best") {
    throw ConfigError("eval.checkpoint must be \"final\" or \"best\"");
  }
  if (eval.lead_mode != "native" && eval.lead_mode != "zero_pad") {
    throw ConfigError("eval.lead_mode must be \"native\" or \"zero_pad\"");
  }
  if (eval.sweep_mode != "zero_shot" && eval.sweep_mode != "probe") {
    throw ConfigError("eval.sweep_mode must be \"zero_shot\" or \"probe\"");
  }
  if (!(eval.overlap_threshold > -1.0 && eval.overlap_threshold <= 1.0)) {
    throw ConfigError("eval.overlap_threshold must be in (-1, 1]");
  }
  if (gradcheck.records < 2 || gradcheck.embed_dim == 0 || gradcheck.num_layers == 0 ||
      gradcheck.num_heads == 0 || gradcheck.embed_dim % gradcheck.num_heads != 0 ||
      gradcheck.token_length == 0 || gradcheck.segments == 0 ||
      gradcheck.token_length * gradcheck.segments > ecg::kSyntheticLength ||
      !(gradcheck.threshold > 0.0)) {
    throw ConfigError("invalid gradcheck sizes");
  }
}

json RunConfig::to_json() const {
  json m = model.to_json();
  m["query"].erase("query_dim");
  m["query"].erase("token_dim");
  json t = train.to_json();
  t.erase("seed");
  json p = probe.to_json();
  p.erase("seed");
  return {
      {"seed", seed},
      {"out_dir", out_dir},
      {"data",
       {{"pretrain_records", data.pretrain_records},
        {"num_classes", data.num_classes},
        {"pretrain_valid_fraction", data.pretrain_valid_fraction},
        {"downstream_records", data.downstream_records},
        {"downstream_valid_fraction", data.downstream_valid_fraction},
        {"downstream_test_fraction", data.downstream_test_fraction}}},
      {"miner",
       {{"client", miner.client},
        {"rules_path", miner.rules_path},
        {"llm",
         {{"url", miner.llm.url},
          {"model", miner.llm.model},
          {"temperature", miner.llm.temperature},
          {"max_retries", miner.llm.max_retries},
          {"initial_backoff_ms", miner.llm.initial_backoff_ms},
          {"timeout_seconds", miner.llm.timeout_seconds},
          {"auth_header", miner.llm.auth_header},
          {"auth_env", miner.llm.auth_env},
          {"auth_prefix", miner.llm.auth_prefix}}},
        {"cache", miner.cache},
        {"max_parse_retries", miner.max_parse_retries},
        {"concurrency", miner.concurrency}}},
      {"model", m},
      {"train", t},
      {"probe", p},
      {"eval",
       {{"class_names", eval.class_names},
        {"checkpoint", eval.checkpoint},
        {"lead_mode", eval.lead_mode},
        {"sweep_mode", eval.sweep_mode},
        {"overlap_threshold", eval.overlap_threshold}}},
      {"gradcheck",
       {{"records", gradcheck.records},
        {"embed_dim", gradcheck.embed_dim},
        {"num_layers", gradcheck.num_layers},
        {"num_heads", gradcheck.num_heads},
        {"token_length", gradcheck.token_length},
        {"segments", gradcheck.segments},
        {"threshold", gradcheck.threshold},
        {"max_coords_per_tensor", gradcheck.max_coords_per_tensor}}},
  };
}

json RunConfig::seeds_json() const {
  return {{"seed", seed},
          {"pretrain_data", pretrain_data_seed()},
          {"downstream_data", downstream_data_seed()},
          {"train", train.seed},
          {"probe", probe.seed}};
}

RunConfig RunConfig::from_json(const json& j) {
  json tree = RunConfig().to_json();
  strict_merge(tree, j, "");
  RunConfig c;
  try {
    c.seed = tree["seed"].get<std::uint64_t>();
    c.out_dir = tree["out_dir"].get<std::string>();
    const json& d = tree["data"];
    c.data.pretrain_records = d["pretrain_records"].get<int>();
    c.data.num_classes = d["num_classes"].get<int>();
    c.data.pretrain_valid_fraction = d["pretrain_valid_fraction"].get<double>();
    c.data.downstream_records = d["downstream_records"].get<int>();
    c.data.downstream_valid_fraction = d["downstream_valid_fraction"].get<double>();
    c.data.downstream_test_fraction = d["downstream_test_fraction"].get<double>();
    const json& mi = tree["miner"];
    c.miner.client = mi["client"].get<std::string>();
    c.miner.rules_path = mi["rules_path"].get<std::string>();
    const json& l = mi["llm"];
    c.miner.llm.url = l["url"].get<std::string>();
    c.miner.llm.model = l["model"].get<std::string>();
    c.miner.llm.temperature = l["temperature"].get<double>();
    c.miner.llm.max_retries = l["max_retries"].get<int>();
    c.miner.llm.initial_backoff_ms = l["initial_backoff_ms"].get<int>();
    c.miner.llm.timeout_seconds = l["timeout_seconds"].get<double>();
    c.miner.llm.auth_header = l["auth_header"].get<std::string>();
    c.miner.llm.auth_env = l["auth_env"].get<std::string>();
    c.miner.llm.auth_prefix = l["auth_prefix"].get<std::string>();
    c.miner.cache = mi["cache"].get<bool>();
    c.miner.max_parse_retries = mi["max_parse_retries"].get<int>();
    c.miner.concurrency = mi["concurrency"].get<std::size_t>();
    c.model = ModelConfig::from_json(tree["model"]);
    c.train = train::PretrainConfig::from_json(tree["train"]);
    c.probe = eval::ProbeConfig::from_json(tree["probe"]);
    const json& e = tree["eval"];
    c.eval.class_names = e["class_names"].get<std::vector<std::string>>();
    c.eval.checkpoint = e["checkpoint"].get<std::string>();
    c.eval.lead_mode = e["lead_mode"].get<std::string>();
    c.eval.sweep_mode = e["sweep_mode"].get<std::string>();
    c.eval.overlap_threshold = e["overlap_threshold"].get<double>();
    const json& g = tree["gradcheck"];
    c.gradcheck.records = g["records"].get<std::size_t>();
    c.gradcheck.embed_dim = g["embed_dim"].get<std::size_t>();
    c.gradcheck.num_layers = g["num_layers"].get<std::size_t>();
    c.gradcheck.num_heads = g["num_heads"].get<std::size_t>();
    c.gradcheck.token_length = g["token_length"].get<std::size_t>();
    c.gradcheck.segments = g["segments"].get<std::size_t>();
    c.gradcheck.threshold = g["threshold"].get<double>();
    c.gradcheck.max_coords_per_tensor = g["max_coords_per_tensor"].get<std::size_t>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed run config: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  c.train.seed = c.seed;
  c.probe.seed = c.seed;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const std::string path = resolve_config_key(key);
  const std::vector<std::string> parts = split_path(path);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = std::string(value);
  }
  json patch = parsed;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    patch = json{{*it, patch}};
  }
  json tree = to_json();
  strict_merge(tree, patch, "");
  if (path == "model.encoder.token_length") {
    const std::size_t p = tree["model"]["encoder"]["token_length"].get<std::size_t>();
    if (p == 0 || ecg::kSyntheticLength % p != 0) {
      throw ConfigError("token_length must divide " + std::to_string(ecg::kSyntheticLength));
    }
    tree["model"]["encoder"]["segments"] = ecg::kSyntheticLength / p;
  }
  *this = from_json(tree);
}

}  // namespace leadwise
