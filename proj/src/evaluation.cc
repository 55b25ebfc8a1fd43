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

#include "leadwise/evaluation.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "leadwise/ops.h"
#include "leadwise/optim.h"
#include "leadwise/vocabulary.h"

namespace leadwise::eval {
namespace {

using nlohmann::json;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<int> selected_leads(const ecg::EcgRecord& rec, const LeadSelection& sel) {
  const int k = sel.k == 0 ? static_cast<int>(rec.num_leads()) : sel.k;
  return ecg::first_k_leads(rec, k).lead_ids;
}

ecg::EcgRecord apply_selection(const ecg::EcgRecord& rec, const LeadSelection& sel) {
  if (sel.k < 0 || sel.k > ecg::kNumLeads) throw EvalError("lead count must be in 0..12");
  const std::vector<int> keep = selected_leads(rec, sel);
  if (sel.mode == LeadMode::kZeroPad) return ecg::zero_pad_leads(rec, keep);
  return ecg::restrict_leads(rec, keep);
}

// Encodes one record under `sel` and checks that only selected leads reached
// the encoder.
encoder::EncodeOutput encode_selected(const LeadwiseModel& model, const ecg::EcgRecord& rec,
                                      const LeadSelection& sel) {
  const encoder::EncodeOutput out =
      model.ecg().encode(encoder::tokenize(apply_selection(rec, sel), model.config().encoder));
  if (sel.mode == LeadMode::kNative) {
    const std::vector<int> keep = selected_leads(rec, sel);
    for (int id : out.leads_used) {
      if (std::find(keep.begin(), keep.end(), id) == keep.end()) {
        throw std::logic_error("encoder consulted absent lead " + std::to_string(id));
      }
    }
  }
  return out;
}

std::vector<int> report_leads(std::span<const ecg::EcgRecord> records, const LeadSelection& sel) {
  if (records.empty()) return {};
  if (sel.mode == LeadMode::kZeroPad) {
    std::vector<int> all(ecg::kNumLeads);
    std::iota(all.begin(), all.end(), 1);
    return all;
  }
  return selected_leads(records.front(), sel);
}

std::vector<std::string> resolve_classes(const std::filesystem::path& manifest,
                                         const std::vector<std::string>& given) {
  std::vector<std::string> classes = given.empty() ? manifest_classes(manifest) : given;
  if (classes.empty()) throw EvalError("no class names to evaluate");
  return classes;
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct ProbeData {
  std::vector<double> x;             // [n x d]
  std::vector<std::uint8_t> labels;  // [n x classes]
  std::size_t n = 0;
};

ProbeData gather(const std::vector<double>& features, const std::vector<std::uint8_t>& labels,
                 std::span<const std::size_t> rows, std::size_t d, std::size_t classes) {
  ProbeData out;
  out.n = rows.size();
  for (std::size_t r : rows) {
    out.x.insert(out.x.end(), features.begin() + static_cast<std::ptrdiff_t>(r * d),
                 features.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
    out.labels.insert(out.labels.end(),
                      labels.begin() + static_cast<std::ptrdiff_t>(r * classes),
                      labels.begin() + static_cast<std::ptrdiff_t>((r + 1) * classes));
  }
  return out;
}

EvalReport probe_with(const LeadwiseModel& model, const LabeledSet& train,
                      const LabeledSet& valid, const LabeledSet& test,
                      std::span<const std::string> classes, const ProbeConfig& cfg,
                      const LeadSelection& leads) {
  if (train.records.empty()) throw EvalError("linear probe: no training records");
  if (test.records.empty()) throw EvalError("linear probe: empty test split");
  if (cfg.batch_size == 0 || cfg.epochs == 0) throw EvalError("linear probe: empty schedule");
  const std::size_t c = classes.size();
  const std::size_t d = model.config().encoder.embed_dim;
  const std::string before = model.parameter_hash();

  const std::vector<std::size_t> picked = sample_fraction(train.labels, c, cfg.fraction, cfg.seed);
  const auto features = [&](const LabeledSet& set) {
    return encoder_features(model, set.records, leads);
  };
  std::vector<std::size_t> all_valid(valid.records.size()), all_test(test.records.size());
  std::iota(all_valid.begin(), all_valid.end(), 0);
  std::iota(all_test.begin(), all_test.end(), 0);
  ProbeData tr = gather(features(train), train.labels, picked, d, c);
  ProbeData va = gather(features(valid), valid.labels, all_valid, d, c);
  ProbeData te = gather(features(test), test.labels, all_test, d, c);
  // Standardize with statistics of the sampled training features.
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < tr.n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += tr.x[i * d + j] / static_cast<double>(tr.n);
  }
  for (std::size_t i = 0; i < tr.n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double z = tr.x[i * d + j] - mu[j];
      sd[j] += z * z / static_cast<double>(tr.n);
    }
  }
  for (double& v : sd) v = std::sqrt(v) + 1e-6;
  for (ProbeData* data : {&tr, &va, &te}) {
    for (std::size_t i = 0; i < data->n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        data->x[i * d + j] = (data->x[i * d + j] - mu[j]) / sd[j];
      }
    }
  }

  nn::ParamStore store;
  Rng init = Rng::stream(cfg.seed, 0x50524f4245ULL);
  const nn::Linear head = nn::Linear::create(store, "probe", d, c, init);
  nn::AdamW opt(store.tensors(), {.lr = cfg.lr, .weight_decay = cfg.weight_decay});

  const auto loss_on = [&](const ProbeData& data, std::span<const std::size_t> rows) {
    std::vector<double> x, y;
    for (std::size_t r : rows) {
      x.insert(x.end(), data.x.begin() + static_cast<std::ptrdiff_t>(r * d),
               data.x.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
      for (std::size_t k = 0; k < c; ++k) y.push_back(data.labels[r * c + k]);
    }
    return nn::bce_with_logits(head(nn::Tensor::from_values({rows.size(), d}, x)), y);
  };

  const std::size_t steps_per_epoch = (tr.n + cfg.batch_size - 1) / cfg.batch_size;
  const auto total = static_cast<std::int64_t>(steps_per_epoch * cfg.epochs);
  const auto warmup = static_cast<std::int64_t>(steps_per_epoch * cfg.warmup_epochs);
  std::vector<std::vector<double>> best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(tr.n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = Rng::stream(cfg.seed, epoch + 1);
    shuffle.shuffle(order);
    for (std::size_t b = 0; b < tr.n; b += cfg.batch_size, ++step) {
      const std::size_t e = std::min(tr.n, b + cfg.batch_size);
      opt.set_lr(nn::cosine_schedule(step, total, cfg.lr, warmup));
      opt.zero_grad();
      loss_on(tr, std::span(order).subspan(b, e - b)).backward();
      opt.step();
    }
    if (va.n > 0) {
      nn::NoGradGuard no_grad;
      const double v = loss_on(va, all_valid).item();
      if (v < best_loss) {
        best_loss = v;
        best.clear();
        for (const nn::Tensor& t : store.tensors()) best.emplace_back(t.values().begin(), t.values().end());
      }
    }
  }
  if (!best.empty()) {
    std::vector<nn::Tensor> params = store.tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::copy(best[i].begin(), best[i].end(), params[i].mutable_values().begin());
    }
  }

  std::vector<double> scores(te.n * c);
  {
    nn::NoGradGuard no_grad;
    const nn::Tensor logits = head(nn::Tensor::from_values({te.n, d}, te.x));
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = sigmoid(logits.values()[i]);
  }
  if (model.parameter_hash() != before) {
    throw std::logic_error("linear probe modified encoder parameters");
  }
  EvalReport report = summarize("linear_probe", classes, scores, te.labels);
  report.leads = report_leads(test.records, leads);
  report.data_fraction = cfg.fraction;
  report.config_hash = model.config_hash();
  return report;
}

}  // namespace

std::optional<double> compute_auc(std::span<const double> scores,
                                  std::span<const std::uint8_t> labels) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw EvalError("compute_auc: need equally many scores and labels");
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw EvalError("compute_auc: NaN score");
    pos += labels[i] != 0;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks (1-based) for tied groups; all values are exact half-integers.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum += mid;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double compute_f1(std::span<const double> scores, std::span<const std::uint8_t> labels,
                  double threshold) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw EvalError("compute_f1: need equally many scores and labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++tp;
    if (predicted && !labels[i]) ++fp;
    if (!predicted && labels[i]) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

json EvalReport::to_json() const {
  json cls = json::array();
  for (const ClassMetrics& m : classes) {
    cls.push_back({{"name", m.name},
                   {"auc", optional_json(m.auc)},
                   {"f1", m.f1},
                   {"positives", m.positives},
                   {"negatives", m.negatives}});
  }
  return {{"task", task},
          {"classes", cls},
          {"macro_auc", optional_json(macro_auc)},
          {"macro_f1", optional_json(macro_f1)},
          {"skipped_classes", skipped_classes},
          {"leads", leads},
          {"data_fraction", data_fraction},
          {"config_hash", config_hash},
          {"num_records", num_records}};
}

std::string EvalReport::per_class_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "name,auc,f1,positives,negatives\n";
  for (const ClassMetrics& m : classes) {
    out << '"' << m.name << "\",";
    if (m.auc) out << *m.auc;
    out << ',' << m.f1 << ',' << m.positives << ',' << m.negatives << '\n';
  }
  return out.str();
}

EvalReport summarize(std::string task, std::span<const std::string> class_names,
                     std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const std::size_t c = class_names.size();
  if (c == 0 || scores.size() != labels.size() || scores.size() % c != 0) {
    throw EvalError("summarize: scores and labels must be [records x classes]");
  }
  const std::size_t n = scores.size() / c;
  if (n == 0) throw EvalError("summarize: no records");
  EvalReport r;
  r.task = std::move(task);
  r.num_records = n;
  double auc_sum = 0.0, f1_sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores[i * c + k];
      y[i] = labels[i * c + k];
    }
    ClassMetrics m;
    m.name = class_names[k];
    m.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    m.negatives = n - m.positives;
    m.auc = compute_auc(s, y);
    m.f1 = compute_f1(s, y);
    if (m.auc) {
      auc_sum += *m.auc;
      f1_sum += m.f1;
      ++defined;
    } else {
      r.skipped_classes.push_back(m.name);
    }
    r.classes.push_back(std::move(m));
  }
  if (defined > 0) {
    r.macro_auc = auc_sum / static_cast<double>(defined);
    r.macro_f1 = f1_sum / static_cast<double>(defined);
  }
  return r;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t max_threads) {
  if (n == 0) return;
  std::size_t threads = max_threads ? max_threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::string> manifest_classes(const std::filesystem::path& manifest) {
  std::set<std::string> names;
  for (const ecg::ManifestEntry& e : ecg::load_manifest(manifest).entries) {
    for (const std::string& l : e.labels) names.insert(normalize_entity(l));
  }
  return {names.begin(), names.end()};
}

LabeledSet load_split(const std::filesystem::path& manifest_path, ecg::Split split,
                      std::span<const std::string> class_names) {
  const ecg::DatasetManifest manifest = ecg::load_manifest(manifest_path);
  std::vector<std::string> classes;
  for (const std::string& c : class_names) classes.push_back(normalize_entity(c));
  LabeledSet out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split != split) continue;
    ecg::EcgRecord rec = prepare_record(ecg::load_record(manifest, i));
    std::set<std::string> present;
    for (const std::string& l : rec.labels) present.insert(normalize_entity(l));
    for (const std::string& c : classes) out.labels.push_back(present.count(c) ? 1 : 0);
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<double> zero_shot_scores(const LeadwiseModel& model,
                                     std::span<const ecg::EcgRecord> records,
                                     std::span<const std::string> class_names,
                                     const LeadSelection& leads) {
  if (class_names.empty()) throw EvalError("zero_shot: no class names");
  nn::Tensor queries;
  {
    nn::NoGradGuard no_grad;
    queries = model.text().embed(class_names);
  }
  const std::size_t c = class_names.size();
  std::vector<double> scores(records.size() * c);
  parallel_for(records.size(), [&](std::size_t i) {
    nn::NoGradGuard no_grad;
    const encoder::EncodeOutput out = encode_selected(model, records[i], leads);
    const nn::Tensor logits = model.query().forward(queries, out.tokens);
    for (std::size_t k = 0; k < c; ++k) scores[i * c + k] = sigmoid(logits.values()[k]);
  });
  return scores;
}

EvalReport zero_shot(const ZeroShotInputs& in) {
  const LeadwiseModel model = LeadwiseModel::load(in.checkpoint);
  const std::vector<std::string> classes = resolve_classes(in.manifest, in.class_names);
  const LabeledSet set = load_split(in.manifest, in.split, classes);
  if (set.records.empty()) throw EvalError("zero_shot: empty evaluation split");
  EvalReport r = summarize("zero_shot", classes,
                           zero_shot_scores(model, set.records, classes, in.leads), set.labels);
  r.leads = report_leads(set.records, in.leads);
  r.config_hash = model.config_hash();
  return r;
}

json ProbeConfig::to_json() const {
  return {{"fraction", fraction},   {"lr", lr},
          {"weight_decay", weight_decay}, {"batch_size", batch_size},
          {"epochs", epochs},       {"warmup_epochs", warmup_epochs},
          {"seed", seed}};
}

ProbeConfig ProbeConfig::from_json(const json& j) {
  ProbeConfig c;
  if (!j.is_object()) throw std::invalid_argument("probe config must be an object");
  const json known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown key probe." + key);
  }
  c.fraction = j.value("fraction", c.fraction);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<std::size_t> sample_fraction(std::span<const std::uint8_t> labels,
                                         std::size_t num_classes, double fraction,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw EvalError("fraction must be in (0, 1]");
  if (num_classes == 0 || labels.size() % num_classes != 0) {
    throw EvalError("sample_fraction: labels must be [records x classes]");
  }
  const std::size_t n = labels.size() / num_classes;
  const std::size_t take =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * n - 1e-9)), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::uint8_t> chosen(n, 0);
  std::size_t count = 0;
  // One positive per class first, in class order, then fill in shuffled order.
  for (std::size_t c = 0; c < num_classes; ++c) {
    bool covered = false;
    for (std::size_t i = 0; i < n && !covered; ++i) covered = chosen[i] && labels[i * num_classes + c];
    if (covered) continue;
    const auto it = std::find_if(order.begin(), order.end(), [&](std::size_t i) {
      return labels[i * num_classes + c] != 0;
    });
    if (it == order.end()) {
      throw EvalError("class " + std::to_string(c) + " has no positive training record");
    }
    chosen[*it] = 1;
    ++count;
  }
  if (count > take) {
    throw EvalError("fraction " + std::to_string(fraction) + " yields " + std::to_string(take) +
                    " records, fewer than the " + std::to_string(count) +
                    " needed to cover every class");
  }
  for (std::size_t i : order) {
    if (count == take) break;
    if (!chosen[i]) {
      chosen[i] = 1;
      ++count;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) out.push_back(i);
  }
  return out;
}

std::vector<double> encoder_features(const LeadwiseModel& model,
                                     std::span<const ecg::EcgRecord> records,
                                     const LeadSelection& leads) {
  const std::size_t d = model.config().encoder.embed_dim;
  std::vector<double> out(records.size() * d);
  parallel_for(records.size(), [&](std::size_t i) {
    nn::NoGradGuard no_grad;
    const encoder::EncodeOutput enc = encode_selected(model, records[i], leads);
    const auto f = enc.features.values();
    std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  });
  return out;
}

EvalReport linear_probe(const ProbeInputs& in) {
  const LeadwiseModel model = LeadwiseModel::load(in.checkpoint);
  const std::vector<std::string> classes = resolve_classes(in.manifest, in.class_names);
  return probe_with(model, load_split(in.manifest, ecg::Split::kTrain, classes),
                    load_split(in.manifest, ecg::Split::kValid, classes),
                    load_split(in.manifest, ecg::Split::kTest, classes), classes, in.probe,
                    in.leads);
}

std::vector<EvalReport> lead_sweep(const SweepInputs& in) {
  const LeadwiseModel model = LeadwiseModel::load(in.checkpoint);
  const std::vector<std::string> classes = resolve_classes(in.manifest, in.class_names);
  const LabeledSet test = load_split(in.manifest, ecg::Split::kTest, classes);
  if (test.records.empty()) throw EvalError("lead_sweep: empty test split");
  for (const ecg::EcgRecord& rec : test.records) {
    if (rec.num_leads() != ecg::kNumLeads) {
      throw EvalError("lead_sweep needs 12-lead records; " + rec.id + " has " +
                      std::to_string(rec.num_leads()));
    }
  }
  LabeledSet train, valid;
  if (in.mode == SweepMode::kProbe) {
    train = load_split(in.manifest, ecg::Split::kTrain, classes);
    valid = load_split(in.manifest, ecg::Split::kValid, classes);
  }
  std::vector<EvalReport> out;
  for (int k = 1; k <= ecg::kNumLeads; ++k) {
    const LeadSelection sel{k, in.lead_mode};
    EvalReport r;
    if (in.mode == SweepMode::kZeroShot) {
      r = summarize("zero_shot", classes, zero_shot_scores(model, test.records, classes, sel),
                    test.labels);
      r.leads = report_leads(test.records, sel);
      r.config_hash = model.config_hash();
    } else {
      r = probe_with(model, train, valid, test, classes, in.probe, sel);
    }
    r.task = "lead_sweep_" + r.task + "_k" + std::to_string(k);
    out.push_back(std::move(r));
  }
  return out;
}

std::string sweep_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out.precision(17);
  out << "k,macro_auc,macro_f1\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << i + 1 << ',';
    if (reports[i].macro_auc) out << *reports[i].macro_auc;
    out << ',';
    if (reports[i].macro_f1) out << *reports[i].macro_f1;
    out << '\n';
  }
  return out.str();
}

OverlapResult seen_unseen_split(std::span<const std::string> entities,
                                std::span<const std::string> class_names,
                                const text::TextEncoder& embedder, double threshold) {
  OverlapResult r;
  if (class_names.empty()) return r;
  nn::NoGradGuard no_grad;
  const nn::Tensor cls = embedder.embed(class_names);
  nn::Tensor ent;
  if (!entities.empty()) ent = embedder.embed(entities);
  const std::size_t d = cls.cols();
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    std::string nearest;
    const auto a = cls.values().subspan(i * d, d);
    for (std::size_t j = 0; j < entities.size(); ++j) {
      const double s = text::cosine(a, ent.values().subspan(j * d, d));
      if (s > best) {
        best = s;
        nearest = entities[j];
      }
    }
    r.max_similarity.push_back(best);
    r.nearest_entity.push_back(nearest);
    (best > threshold ? r.seen : r.unseen).push_back(class_names[i]);
  }
  return r;
}

}  // namespace leadwise::eval
