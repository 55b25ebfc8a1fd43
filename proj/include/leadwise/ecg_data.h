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

// Multi-lead ECG records, dataset manifests, and the synthetic corpus
// generator.
//
// Manifest (JSON):
//   {"version": 1,
//    "records": [{"id": "...", "path": "signals.f32", "offset": 0,
//                 "leads": [1, 2, ...], "sample_rate": 500, "length": 5000,
//                 "report": "...", "labels": [...], "split": "train"}]}
// Paths are relative to the manifest's directory. "offset" is in bytes.
// Payloads are float32 little-endian, row-major [lead x sample].

#ifndef LEADWISE_ECG_DATA_H_
#define LEADWISE_ECG_DATA_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leadwise/vocabulary.h"

namespace leadwise::ecg {

inline constexpr int kNumLeads = 12;

// Canonical order; lead id = position + 1.
inline constexpr std::array<std::string_view, kNumLeads> kLeadOrder = {
    "I", "II", "III", "aVF", "aVR", "aVL", "V1", "V2", "V3", "V4", "V5", "V6"};

std::string_view lead_name(int lead_id);
// Case-insensitive; throws DataError for unknown names.
int lead_id(std::string_view name);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { kTrain, kValid, kTest };
std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct EcgRecord {
  std::string id;
  std::vector<int> lead_ids;  // canonical ids 1..12, one per signal row
  std::size_t length = 0;     // samples per lead
  int sample_rate_hz = 500;
  std::vector<float> signal;  // [lead_ids.size() x length]
  std::string report;
  std::vector<std::string> labels;  // downstream annotations only
  Split split = Split::kTrain;

  std::size_t num_leads() const { return lead_ids.size(); }
  std::span<const float> lead(std::size_t row) const {
    return std::span<const float>(signal).subspan(row * length, length);
  }
  std::span<float> lead(std::size_t row) {
    return std::span<float>(signal).subspan(row * length, length);
  }
};

// Throws DataError unless lead ids are unique and in 1..12, the signal has
// leads * length finite samples, and the sample rate is positive.
void validate_record(const EcgRecord& rec);

struct ManifestEntry {
  std::string id;
  std::string path;
  std::uint64_t offset = 0;
  std::vector<int> lead_ids;
  int sample_rate_hz = 500;
  std::size_t length = 0;
  std::string report;
  std::vector<std::string> labels;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
EcgRecord load_record(const DatasetManifest& manifest, std::size_t index);
std::vector<EcgRecord> load_records(const DatasetManifest& manifest);

// Writes `records` to <dir>/<payload_name> and the manifest to
// `manifest_path`; returns the manifest as written.
DatasetManifest write_dataset(const std::filesystem::path& manifest_path,
                              const std::vector<EcgRecord>& records,
                              const std::string& payload_name = "signals.f32");

// One file per record, one column per lead, header row of lead names.
EcgRecord import_csv(const std::filesystem::path& path, std::string record_id,
                     int sample_rate_hz, std::string report);

// Per-lead standardization to zero mean and unit variance. Leads whose
// variance is below `min_variance` are only centered (flat leads -> zeros).
EcgRecord normalize_record(EcgRecord rec, double min_variance = 1e-12);

// Keeps the rows whose lead id is in `leads`, preserving record order.
EcgRecord restrict_leads(const EcgRecord& rec, std::span<const int> leads);
// First `k` leads of the canonical order that the record carries.
EcgRecord first_k_leads(const EcgRecord& rec, int k);
// Full 12-lead record in canonical order; leads outside `keep` are zeros.
EcgRecord zero_pad_leads(const EcgRecord& rec, std::span<const int> keep);

// --- Synthetic corpus ------------------------------------------------------

inline constexpr int kMaxSyntheticClasses = 8;
inline constexpr std::size_t kSyntheticLength = 5000;  // 10 s at 500 Hz

struct SyntheticClass {
  std::string_view name;
  double frequency_hz;
  std::string_view synonym;  // empty when the class has none
};
std::span<const SyntheticClass> synthetic_classes();
inline constexpr std::string_view kSyntheticSuperclass =
    "synthetic myocardial infarction";

struct SyntheticOptions {
  int num_records = 64;
  int num_classes = 4;
  std::uint64_t seed = 7;
  // Downstream datasets carry label names; pretraining sets carry reports only.
  bool with_labels = false;
  double valid_fraction = 0.0;
  double test_fraction = 0.0;
  std::string id_prefix = "syn";
};

struct SyntheticDataset {
  std::vector<EcgRecord> records;
  std::vector<std::string> class_names;
  EntityVocabulary vocabulary;  // ground truth for the mining pipeline
  // Per-record class indices; first entry is the dominant component.
  std::vector<std::vector<int>> record_classes;
};

// 12-lead, 500 Hz, 10 s records. Each record carries 1-3 classes; every class
// contributes a sinusoid at its own frequency with fixed lead-specific phase
// offsets, plus a rate component named in the report and Gaussian noise.
SyntheticDataset generate_synthetic(const SyntheticOptions& options);

}  // namespace leadwise::ecg

#endif  // LEADWISE_ECG_DATA_H_
