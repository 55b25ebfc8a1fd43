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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "leadwise/rng.h"

namespace leadwise::ecg {
namespace {

namespace fs = std::filesystem;
using testing::HasSubstr;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("leadwise_ecg_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

EcgRecord single_lead(std::vector<float> values) {
  EcgRecord rec;
  rec.id = "r";
  rec.lead_ids = {1};
  rec.length = values.size();
  rec.signal = std::move(values);
  return rec;
}

// Magnitude of the DFT bin at `freq_hz`.
double dft_magnitude(std::span<const float> x, double freq_hz, int rate) {
  double re = 0.0, im = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    const double w = 2.0 * std::numbers::pi * freq_hz * s / rate;
    re += x[s] * std::cos(w);
    im -= x[s] * std::sin(w);
  }
  return std::hypot(re, im);
}

TEST(Leads, NamesRoundTrip) {
  for (int id = 1; id <= kNumLeads; ++id) EXPECT_EQ(lead_id(lead_name(id)), id);
  EXPECT_EQ(lead_id("avf"), 4);
  EXPECT_THROW(lead_id("V7"), DataError);
  EXPECT_THROW(lead_name(13), DataError);
}

TEST(Manifest, RoundTrip) {
  const fs::path dir = scratch_dir("roundtrip");
  SyntheticOptions opts;
  opts.num_records = 6;
  opts.with_labels = true;
  opts.test_fraction = 0.34;
  const SyntheticDataset ds = generate_synthetic(opts);
  std::vector<EcgRecord> recs = ds.records;
  recs[1] = restrict_leads(recs[1], std::vector<int>{2, 7});
  write_dataset(dir / "manifest.json", recs);

  const DatasetManifest m = load_manifest(dir / "manifest.json");
  ASSERT_EQ(m.entries.size(), recs.size());
  const std::vector<EcgRecord> back = load_records(m);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].id, recs[i].id);
    EXPECT_EQ(back[i].lead_ids, recs[i].lead_ids);
    EXPECT_EQ(back[i].signal, recs[i].signal);
    EXPECT_EQ(back[i].report, recs[i].report);
    EXPECT_EQ(back[i].labels, recs[i].labels);
    EXPECT_EQ(back[i].split, recs[i].split);
  }
  EXPECT_EQ(back.back().split, Split::kTest);
}

TEST(Manifest, MissingPayloadIsReported) {
  const fs::path dir = scratch_dir("missing");
  write_dataset(dir / "manifest.json", {single_lead({1, 2, 3})});
  fs::remove(dir / "signals.f32");
  try {
    load_manifest(dir / "manifest.json");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_THAT(e.what(), HasSubstr("missing payload"));
  }
}

TEST(Manifest, ShapeMismatchAndParseFailure) {
  const fs::path dir = scratch_dir("shape");
  write_dataset(dir / "manifest.json", {single_lead({1, 2, 3})});
  fs::resize_file(dir / "signals.f32", 8);
  try {
    load_manifest(dir / "manifest.json");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_THAT(e.what(), HasSubstr("shape mismatch"));
  }
  std::ofstream(dir / "bad.json") << "{\"version\": 1, \"records\": [";
  try {
    load_manifest(dir / "bad.json");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_THAT(e.what(), HasSubstr("parse failure"));
  }
}

TEST(Manifest, RejectsDuplicateLeads) {
  EcgRecord rec = single_lead({1, 2});
  rec.lead_ids = {1, 1};
  rec.length = 1;
  EXPECT_THROW(validate_record(rec), DataError);
}

TEST(Normalize, WorkedExamples) {
  const EcgRecord a = normalize_record(single_lead({0.0f, 2.0f}));
  EXPECT_FLOAT_EQ(a.signal[0], -1.0f);
  EXPECT_FLOAT_EQ(a.signal[1], 1.0f);
  const EcgRecord b = normalize_record(single_lead({3.0f, 3.0f, 3.0f}));
  for (float v : b.signal) EXPECT_EQ(v, 0.0f);
  const EcgRecord c = normalize_record(single_lead({1, -1, 1, -1}));
  EXPECT_EQ(c.signal, (std::vector<float>{1, -1, 1, -1}));
}

TEST(Normalize, IsIdempotent) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> v(50 + rng.uniform_int(200));
    const double offset = 10.0 * rng.normal(), gain = std::exp(rng.normal());
    for (float& x : v) x = static_cast<float>(offset + gain * rng.normal());
    const EcgRecord once = normalize_record(single_lead(v));
    const EcgRecord twice = normalize_record(once);
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(once.signal[i], twice.signal[i], 1e-6);
    }
  }
}

TEST(LeadSubsets, FirstKAndZeroPad) {
  SyntheticOptions opts;
  opts.num_records = 4;
  const EcgRecord rec = generate_synthetic(opts).records[0];
  const EcgRecord k3 = first_k_leads(rec, 3);
  EXPECT_EQ(k3.lead_ids, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(k3.signal.size(), 3 * rec.length);
  const std::vector<int> keep = {5, 1};
  const EcgRecord padded = zero_pad_leads(rec, keep);
  ASSERT_EQ(padded.num_leads(), 12u);
  for (std::size_t r = 0; r < 12; ++r) {
    const bool kept = r == 0 || r == 4;
    for (std::size_t s = 0; s < 10; ++s) {
      EXPECT_EQ(padded.lead(r)[s], kept ? rec.lead(r)[s] : 0.0f);
    }
  }
}

TEST(Synthetic, DeterministicForSeed) {
  SyntheticOptions opts;
  opts.num_records = 8;
  const SyntheticDataset a = generate_synthetic(opts);
  const SyntheticDataset b = generate_synthetic(opts);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].signal, b.records[i].signal);
    EXPECT_EQ(a.records[i].report, b.records[i].report);
  }
  opts.seed = 8;
  EXPECT_NE(generate_synthetic(opts).records[0].signal, a.records[0].signal);
}

TEST(Synthetic, ReportsNameTheirClasses) {
  SyntheticOptions opts;
  opts.num_records = 40;
  opts.num_classes = 8;
  opts.with_labels = true;
  const SyntheticDataset ds = generate_synthetic(opts);
  const auto classes = synthetic_classes();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const EcgRecord& rec = ds.records[i];
    EXPECT_EQ(rec.labels.size(), ds.record_classes[i].size());
    for (int c : ds.record_classes[i]) {
      const bool named = rec.report.find(classes[c].name) != std::string::npos ||
                         (!classes[c].synonym.empty() &&
                          rec.report.find(classes[c].synonym) != std::string::npos);
      EXPECT_TRUE(named) << rec.report;
      EXPECT_TRUE(ds.vocabulary.index_of(std::string(classes[c].name)));
    }
  }
  EXPECT_NO_THROW(ds.vocabulary.validate());
}

TEST(Synthetic, DominantFrequencyFollowsClass) {
  SyntheticOptions opts;
  opts.num_records = 70;
  const SyntheticDataset ds = generate_synthetic(opts);
  const auto classes = synthetic_classes();
  int checked = 0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.record_classes[i].size() != 1) continue;
    const int c = ds.record_classes[i][0];
    if (c != 0 && c != 1) continue;
    const EcgRecord& rec = ds.records[i];
    const double brady = dft_magnitude(rec.lead(0), classes[0].frequency_hz, 500);
    const double tachy = dft_magnitude(rec.lead(0), classes[1].frequency_hz, 500);
    if (c == 1) {
      EXPECT_GT(tachy, brady);
    } else {
      EXPECT_GT(brady, tachy);
    }
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Synthetic, SplitFractions) {
  SyntheticOptions opts;
  opts.num_records = 20;
  opts.valid_fraction = 0.1;
  opts.test_fraction = 0.2;
  const SyntheticDataset ds = generate_synthetic(opts);
  int counts[3] = {0, 0, 0};
  for (const EcgRecord& r : ds.records) ++counts[static_cast<int>(r.split)];
  EXPECT_EQ(counts[0], 14);
  EXPECT_EQ(counts[1], 2);
  EXPECT_EQ(counts[2], 4);
}

TEST(Csv, ImportsColumnsAsLeads) {
  const fs::path dir = scratch_dir("csv");
  std::ofstream(dir / "r.csv") << "II,V1\n1.5,2\n-1,0.25\n";
  const EcgRecord rec = import_csv(dir / "r.csv", "csv1", 250, "sinus rhythm");
  EXPECT_EQ(rec.lead_ids, (std::vector<int>{2, 7}));
  EXPECT_EQ(rec.length, 2u);
  EXPECT_EQ(rec.signal, (std::vector<float>{1.5f, -1.0f, 2.0f, 0.25f}));
  std::ofstream(dir / "bad.csv") << "II,V1\n1.5\n";
  EXPECT_THROW(import_csv(dir / "bad.csv", "x", 250, ""), DataError);
}

}  // namespace
}  // namespace leadwise::ecg
