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

#include "leadwise/ecg_data.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "leadwise/rng.h"

namespace leadwise::ecg {
namespace {

namespace fs = std::filesystem;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

void append_f32_le(std::string& out, float f) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::vector<int> parse_leads(const nlohmann::json& leads) {
  std::vector<int> out;
  for (const auto& l : leads) {
    out.push_back(l.is_string() ? lead_id(l.get<std::string>()) : l.get<int>());
  }
  return out;
}

void validate_leads(const std::vector<int>& leads, const std::string& id) {
  if (leads.empty()) throw DataError(id + ": no leads");
  std::set<int> seen;
  for (int l : leads) {
    if (l < 1 || l > kNumLeads) {
      throw DataError(id + ": lead index " + std::to_string(l) + " outside 1..12");
    }
    if (!seen.insert(l).second) {
      throw DataError(id + ": lead " + std::to_string(l) + " listed twice");
    }
  }
}

}  // namespace

std::string_view lead_name(int id) {
  if (id < 1 || id > kNumLeads) {
    throw DataError("lead index " + std::to_string(id) + " outside 1..12");
  }
  return kLeadOrder[static_cast<std::size_t>(id - 1)];
}

int lead_id(std::string_view name) {
  for (std::size_t i = 0; i < kLeadOrder.size(); ++i) {
    if (iequals(kLeadOrder[i], name)) return static_cast<int>(i) + 1;
  }
  throw DataError("unknown lead name '" + std::string(name) + "'");
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "val") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(name) + "'");
}

void validate_record(const EcgRecord& rec) {
  validate_leads(rec.lead_ids, rec.id);
  if (rec.sample_rate_hz <= 0) throw DataError(rec.id + ": sample rate must be positive");
  if (rec.length == 0) throw DataError(rec.id + ": empty signal");
  if (rec.signal.size() != rec.lead_ids.size() * rec.length) {
    throw DataError(rec.id + ": signal holds " + std::to_string(rec.signal.size()) +
                    " samples, expected " +
                    std::to_string(rec.lead_ids.size() * rec.length));
  }
  for (float v : rec.signal) {
    if (!std::isfinite(v)) throw DataError(rec.id + ": non-finite sample");
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": parse failure: " + e.what());
  }
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  std::set<std::string> ids;
  try {
    if (doc.at("version").get<int>() != 1) {
      throw DataError(path.string() + ": unsupported manifest version");
    }
    for (const auto& r : doc.at("records")) {
      ManifestEntry e;
      e.id = r.at("id").get<std::string>();
      e.path = r.at("path").get<std::string>();
      e.offset = r.value("offset", std::uint64_t{0});
      e.lead_ids = parse_leads(r.at("leads"));
      e.sample_rate_hz = r.at("sample_rate").get<int>();
      e.length = r.at("length").get<std::size_t>();
      e.report = r.value("report", "");
      e.labels = r.value("labels", std::vector<std::string>{});
      e.split = parse_split(r.value("split", "train"));
      if (!ids.insert(e.id).second) throw DataError("duplicate record_id " + e.id);
      validate_leads(e.lead_ids, e.id);
      if (e.sample_rate_hz <= 0 || e.length == 0) {
        throw DataError(e.id + ": invalid sample_rate/length");
      }
      const fs::path payload = manifest.base_dir / e.path;
      std::error_code ec;
      const auto size = fs::file_size(payload, ec);
      if (ec) throw DataError(e.id + ": missing payload " + payload.string());
      const std::uint64_t need = e.offset + 4ULL * e.lead_ids.size() * e.length;
      if (size < need) {
        throw DataError(e.id + ": shape mismatch, payload " + payload.string() +
                        " has " + std::to_string(size) + " bytes, need " +
                        std::to_string(need));
      }
      manifest.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": parse failure: " + e.what());
  }
  return manifest;
}

EcgRecord load_record(const DatasetManifest& manifest, std::size_t index) {
  const ManifestEntry& e = manifest.entries.at(index);
  const fs::path payload = manifest.base_dir / e.path;
  std::ifstream in(payload, std::ios::binary);
  if (!in) throw DataError(e.id + ": missing payload " + payload.string());
  const std::size_t count = e.lead_ids.size() * e.length;
  std::string bytes(4 * count, '\0');
  in.seekg(static_cast<std::streamoff>(e.offset));
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(e.id + ": shape mismatch, short read from " + payload.string());
  }
  EcgRecord rec;
  rec.id = e.id;
  rec.lead_ids = e.lead_ids;
  rec.length = e.length;
  rec.sample_rate_hz = e.sample_rate_hz;
  rec.report = e.report;
  rec.labels = e.labels;
  rec.split = e.split;
  rec.signal.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < count; ++i) rec.signal[i] = read_f32_le(p + 4 * i);
  validate_record(rec);
  return rec;
}

std::vector<EcgRecord> load_records(const DatasetManifest& manifest) {
  std::vector<EcgRecord> out;
  out.reserve(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    out.push_back(load_record(manifest, i));
  }
  return out;
}

DatasetManifest write_dataset(const fs::path& manifest_path,
                              const std::vector<EcgRecord>& records,
                              const std::string& payload_name) {
  const fs::path dir = manifest_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  std::string payload;
  nlohmann::json doc;
  doc["version"] = 1;
  doc["records"] = nlohmann::json::array();
  DatasetManifest manifest;
  manifest.base_dir = dir;
  std::set<std::string> ids;
  for (const EcgRecord& rec : records) {
    validate_record(rec);
    if (!ids.insert(rec.id).second) throw DataError("duplicate record_id " + rec.id);
    ManifestEntry e;
    e.id = rec.id;
    e.path = payload_name;
    e.offset = payload.size();
    e.lead_ids = rec.lead_ids;
    e.sample_rate_hz = rec.sample_rate_hz;
    e.length = rec.length;
    e.report = rec.report;
    e.labels = rec.labels;
    e.split = rec.split;
    for (float v : rec.signal) append_f32_le(payload, v);
    nlohmann::json r;
    r["id"] = e.id;
    r["path"] = e.path;
    r["offset"] = e.offset;
    r["leads"] = e.lead_ids;
    r["sample_rate"] = e.sample_rate_hz;
    r["length"] = e.length;
    r["report"] = e.report;
    if (!e.labels.empty()) r["labels"] = e.labels;
    r["split"] = std::string(split_name(e.split));
    doc["records"].push_back(std::move(r));
    manifest.entries.push_back(std::move(e));
  }
  {
    std::ofstream out(dir / payload_name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write payload " + (dir / payload_name).string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + manifest_path.string());
  out << doc.dump(1) << "\n";
  return manifest;
}

EcgRecord import_csv(const fs::path& path, std::string record_id,
                     int sample_rate_hz, std::string report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  auto split_csv = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r\"");
      const auto e = cell.find_last_not_of(" \t\r\"");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };
  EcgRecord rec;
  rec.id = std::move(record_id);
  rec.sample_rate_hz = sample_rate_hz;
  rec.report = std::move(report);
  for (const std::string& name : split_csv(line)) rec.lead_ids.push_back(lead_id(name));
  validate_leads(rec.lead_ids, rec.id);
  const std::size_t n = rec.lead_ids.size();
  std::vector<std::vector<float>> columns(n);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != n) {
      throw DataError(path.string() + ":" + std::to_string(row) + ": expected " +
                      std::to_string(n) + " columns");
    }
    for (std::size_t c = 0; c < n; ++c) {
      try {
        columns[c].push_back(std::stof(cells[c]));
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(row) +
                        ": not a number: " + cells[c]);
      }
    }
  }
  rec.length = columns[0].size();
  for (const auto& col : columns) rec.signal.insert(rec.signal.end(), col.begin(), col.end());
  validate_record(rec);
  return rec;
}

EcgRecord normalize_record(EcgRecord rec, double min_variance) {
  for (std::size_t r = 0; r < rec.num_leads(); ++r) {
    auto lead = rec.lead(r);
    double mean = 0.0;
    for (float v : lead) mean += v;
    mean /= static_cast<double>(lead.size());
    double var = 0.0;
    for (float v : lead) var += (v - mean) * (v - mean);
    var /= static_cast<double>(lead.size());
    const double inv_std = var < min_variance ? 1.0 : 1.0 / std::sqrt(var);
    for (float& v : lead) v = static_cast<float>((v - mean) * inv_std);
  }
  return rec;
}

EcgRecord restrict_leads(const EcgRecord& rec, std::span<const int> leads) {
  EcgRecord out = rec;
  out.lead_ids.clear();
  out.signal.clear();
  for (std::size_t r = 0; r < rec.num_leads(); ++r) {
    if (std::find(leads.begin(), leads.end(), rec.lead_ids[r]) == leads.end()) continue;
    out.lead_ids.push_back(rec.lead_ids[r]);
    const auto src = rec.lead(r);
    out.signal.insert(out.signal.end(), src.begin(), src.end());
  }
  return out;
}

EcgRecord first_k_leads(const EcgRecord& rec, int k) {
  std::vector<int> keep;
  for (int id = 1; id <= kNumLeads && static_cast<int>(keep.size()) < k; ++id) {
    if (std::find(rec.lead_ids.begin(), rec.lead_ids.end(), id) != rec.lead_ids.end()) {
      keep.push_back(id);
    }
  }
  return restrict_leads(rec, keep);
}

EcgRecord zero_pad_leads(const EcgRecord& rec, std::span<const int> keep) {
  EcgRecord out = rec;
  out.lead_ids.clear();
  out.signal.assign(static_cast<std::size_t>(kNumLeads) * rec.length, 0.0f);
  for (int id = 1; id <= kNumLeads; ++id) out.lead_ids.push_back(id);
  for (std::size_t r = 0; r < rec.num_leads(); ++r) {
    const int id = rec.lead_ids[r];
    if (std::find(keep.begin(), keep.end(), id) == keep.end()) continue;
    const auto src = rec.lead(r);
    std::copy(src.begin(), src.end(), out.lead(static_cast<std::size_t>(id - 1)).begin());
  }
  return out;
}

// --- Synthetic corpus ------------------------------------------------------

namespace {

// Every frequency is a multiple of 5 Hz so each 100-sample (0.2 s) window
// holds whole cycles.
constexpr SyntheticClass kClasses[kMaxSyntheticClasses] = {
    {"synthetic bradycardia", 5.0, ""},
    {"synthetic tachycardia", 30.0, ""},
    {"synthetic anterior myocardial infarction", 15.0, "synthetic anterior infarct"},
    {"synthetic inferior myocardial infarction", 20.0, ""},
    {"synthetic atrial fibrillation", 10.0, "synthetic afib"},
    {"synthetic left bundle branch block", 35.0, "synthetic lbbb"},
    {"synthetic st elevation", 25.0, ""},
    {"synthetic t wave inversion", 40.0, ""},
};
constexpr int kMiClasses[] = {2, 3};

constexpr int kRatesBpm[] = {60, 75, 90, 105, 120};
constexpr double kRateFrequencyHz[] = {70.0, 90.0, 110.0, 130.0, 150.0};

constexpr int kSampleRate = 500;
constexpr std::size_t kLength = kSyntheticLength;
constexpr double kPrimaryAmplitude = 1.0;
constexpr double kSecondaryAmplitude = 0.8;
constexpr double kRateAmplitude = 0.7;
constexpr double kNoiseStd = 0.3;
constexpr double kPhaseJitterStd = 0.15;

// Lead-specific phase offsets are part of the class definition, so they are
// drawn from a fixed stream independent of the dataset seed.
struct PhaseTable {
  double cls[kMaxSyntheticClasses][kNumLeads];
  double rate[kNumLeads];
};

const PhaseTable& phase_table() {
  static const PhaseTable table = [] {
    PhaseTable t{};
    Rng rng(0x5EEDC1A55ULL);
    for (auto& row : t.cls)
      for (double& p : row) p = 2.0 * std::numbers::pi * rng.uniform();
    for (double& p : t.rate) p = 2.0 * std::numbers::pi * rng.uniform();
    return t;
  }();
  return table;
}

std::string join_mentions(const std::vector<std::string>& names) {
  if (names.size() == 1) return names[0];
  std::string out;
  for (std::size_t i = 0; i + 1 < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out + " and " + names.back();
}

}  // namespace

std::span<const SyntheticClass> synthetic_classes() { return kClasses; }

SyntheticDataset generate_synthetic(const SyntheticOptions& options) {
  const int classes = options.num_classes;
  if (classes < 1 || classes > kMaxSyntheticClasses) {
    throw DataError("num_classes must be in 1.." +
                    std::to_string(kMaxSyntheticClasses));
  }
  if (options.num_records < classes) {
    throw DataError("num_records must be >= num_classes");
  }

  // All label sets of size 1..3, crossed with every rate.
  std::vector<std::vector<int>> label_sets;
  for (int a = 0; a < classes; ++a) {
    label_sets.push_back({a});
    for (int b = a + 1; b < classes; ++b) {
      label_sets.push_back({a, b});
      for (int c = b + 1; c < classes; ++c) label_sets.push_back({a, b, c});
    }
  }
  struct Combo {
    std::size_t set;
    std::size_t rate;
  };
  std::vector<Combo> combos;
  for (std::size_t s = 0; s < label_sets.size(); ++s)
    for (std::size_t r = 0; r < std::size(kRatesBpm); ++r) combos.push_back({s, r});

  Rng rng(options.seed);
  rng.shuffle(combos);

  const PhaseTable& phases = phase_table();
  const auto n = static_cast<std::size_t>(options.num_records);
  const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * n));
  const auto n_valid = static_cast<std::size_t>(std::llround(options.valid_fraction * n));
  if (n_test + n_valid >= n && (n_test + n_valid) > 0) {
    throw DataError("valid/test fractions leave no training records");
  }

  SyntheticDataset out;
  for (int c = 0; c < classes; ++c) out.class_names.emplace_back(kClasses[c].name);
  std::set<std::string> raw_mentions;

  static constexpr std::string_view kTemplates[] = {
      "{E}. ventricular rate {R} bpm.",
      "findings: {E}. rate {R} bpm.",
      "tracing consistent with {E}. heart rate {R} bpm.",
  };

  for (std::size_t i = 0; i < n; ++i) {
    const Combo& combo = combos[i % combos.size()];
    std::vector<int> members = label_sets[combo.set];
    // Random dominant component and mention order.
    rng.shuffle(members);

    EcgRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "%s%05zu", options.id_prefix.c_str(), i);
    rec.id = id;
    rec.sample_rate_hz = kSampleRate;
    rec.length = kLength;
    for (int l = 1; l <= kNumLeads; ++l) rec.lead_ids.push_back(l);
    rec.signal.resize(static_cast<std::size_t>(kNumLeads) * kLength);

    std::vector<double> jitter;
    for (std::size_t k = 0; k <= members.size(); ++k) {
      jitter.push_back(kPhaseJitterStd * rng.normal());
    }
    const double rate_hz = kRateFrequencyHz[combo.rate];
    for (int l = 0; l < kNumLeads; ++l) {
      float* row = rec.signal.data() + static_cast<std::size_t>(l) * kLength;
      for (std::size_t s = 0; s < kLength; ++s) {
        const double t = static_cast<double>(s) / kSampleRate;
        double v = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
          const int c = members[k];
          const double amp = k == 0 ? kPrimaryAmplitude : kSecondaryAmplitude;
          v += amp * std::sin(2.0 * std::numbers::pi * kClasses[c].frequency_hz * t +
                              phases.cls[c][l] + jitter[k]);
        }
        v += kRateAmplitude * std::sin(2.0 * std::numbers::pi * rate_hz * t +
                                       phases.rate[l] + jitter.back());
        v += kNoiseStd * rng.normal();
        row[s] = static_cast<float>(v);
      }
    }

    std::vector<std::string> mentions;
    for (int c : members) {
      const SyntheticClass& cls = kClasses[c];
      const bool use_synonym = !cls.synonym.empty() && rng.uniform() < 0.35;
      mentions.emplace_back(use_synonym ? cls.synonym : cls.name);
      raw_mentions.insert(mentions.back());
    }
    std::string report(kTemplates[rng.uniform_int(std::size(kTemplates))]);
    report.replace(report.find("{E}"), 3, join_mentions(mentions));
    report.replace(report.find("{R}"), 3, std::to_string(kRatesBpm[combo.rate]));
    rec.report = std::move(report);

    if (options.with_labels) {
      std::vector<int> sorted = members;
      std::sort(sorted.begin(), sorted.end());
      for (int c : sorted) rec.labels.emplace_back(kClasses[c].name);
    }
    if (i >= n - n_test) {
      rec.split = Split::kTest;
    } else if (i >= n - n_test - n_valid) {
      rec.split = Split::kValid;
    }
    out.record_classes.push_back(members);
    out.records.push_back(std::move(rec));
  }

  // Ground-truth vocabulary, built the way the mining pipeline orders it:
  // sorted canonical entities followed by sorted new superclasses.
  EntityVocabulary& vocab = out.vocabulary;
  std::set<std::string> canonical;
  for (const std::string& raw : raw_mentions) {
    std::string target = raw;
    for (const SyntheticClass& cls : kClasses) {
      if (cls.synonym == raw) target = std::string(cls.name);
    }
    vocab.merge_map[raw] = target;
    canonical.insert(target);
  }
  vocab.entities.assign(canonical.begin(), canonical.end());
  std::vector<std::string> mi_members;
  for (int c : kMiClasses) {
    if (canonical.count(std::string(kClasses[c].name))) {
      mi_members.emplace_back(kClasses[c].name);
    }
  }
  if (!mi_members.empty()) {
    vocab.superclasses[std::string(kSyntheticSuperclass)] = mi_members;
    vocab.entities.emplace_back(kSyntheticSuperclass);
  }
  vocab.validate();
  return out;
}

}  // namespace leadwise::ecg
