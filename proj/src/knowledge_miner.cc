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

#include "leadwise/knowledge_miner.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "leadwise/ecg_data.h"
#include "leadwise/hashing.h"

namespace leadwise::miner {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kExtractInstruction =
    "Please extract all positive Cardiac-related Entities from the given ECG "
    "report. Output format is [Entity1, Entity2, ...]";
constexpr std::string_view kVerifyInstruction =
    "Please verify the extracted cardiac-related entities as existing and "
    "positive in the given report. Output format is YES or NO";
constexpr std::string_view kMergePrefix =
    "Please merge the cardiac-related entities that have the same semantics "
    "but different expressions. Here are ";
constexpr std::string_view kMergeSuffix =
    ". Output format is JSON, where the key is the original name and the "
    "value is the merged name.";
constexpr std::string_view kSuperclassPrefix =
    "Please detect all the superclasses present in ";
constexpr std::string_view kSuperclassSuffix =
    ". Output format is JSON, where the key is the superclass name and the "
    "values are the cardiac-related entities that belong to this superclass.";
constexpr std::string_view kReportTag = "\nReport: ";
constexpr std::string_view kEntityTag = "\nEntity: ";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Lowercase with every whitespace run collapsed to one space.
std::string fold(std::string_view text) {
  std::string out;
  bool space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool whole_word_at(std::string_view text, std::size_t pos, std::string_view term) {
  if (text.substr(pos, term.size()) != term) return false;
  if (pos > 0 && is_word_char(text[pos - 1]) && is_word_char(term.front())) return false;
  const std::size_t end = pos + term.size();
  if (end < text.size() && is_word_char(text[end]) && is_word_char(term.back())) return false;
  return true;
}

std::string json_list(std::span<const std::string> entities) {
  return nlohmann::json(std::vector<std::string>(entities.begin(), entities.end())).dump();
}

// Outermost {...} or [...] span of a reply, tolerating surrounding prose.
std::string_view bracketed(std::string_view reply, char open, char close) {
  const auto a = reply.find(open);
  const auto b = reply.rfind(close);
  if (a == std::string_view::npos || b == std::string_view::npos || b < a) return {};
  return reply.substr(a, b - a + 1);
}

template <typename Parse>
auto ask(ChatClient& client, const std::string& prompt, const MinerOptions& options,
         std::string_view stage, Parse parse) {
  for (int attempt = 0;; ++attempt) {
    const std::string reply = client.complete(prompt);
    try {
      return parse(reply);
    } catch (const std::exception& e) {
      client.forget(prompt);
      if (attempt >= options.max_parse_retries) {
        throw MinerError(std::string(stage) + ": unusable reply after " +
                         std::to_string(attempt + 1) + " attempts: " + e.what());
      }
      spdlog::warn("{}: unusable reply ({}), asking again", stage, e.what());
    }
  }
}

bool parse_yes_no(const std::string& reply) {
  std::string word;
  for (unsigned char c : reply) {
    if (std::isalpha(c)) {
      word.push_back(static_cast<char>(std::toupper(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word == "YES") return true;
  if (word == "NO") return false;
  throw MinerError("expected YES or NO, got '" + reply.substr(0, 80) + "'");
}

}  // namespace

std::string extraction_prompt(std::string_view report) {
  return std::string(kExtractInstruction) + std::string(kReportTag) + std::string(report);
}

std::string verification_prompt(std::string_view report, std::string_view entity) {
  return std::string(kVerifyInstruction) + std::string(kReportTag) + std::string(report) +
         std::string(kEntityTag) + std::string(entity);
}

std::string merge_prompt(std::span<const std::string> entities) {
  return std::string(kMergePrefix) + json_list(entities) + std::string(kMergeSuffix);
}

std::string superclass_prompt(std::span<const std::string> entities) {
  return std::string(kSuperclassPrefix) + json_list(entities) +
         std::string(kSuperclassSuffix);
}

// --- HttpChatClient ----------------------------------------------------------

HttpChatClient::HttpChatClient(LlmClientConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.url.empty() || cfg_.model.empty()) {
    throw MinerError("LLM client needs an endpoint URL and a model name");
  }
}

std::string HttpChatClient::complete(const std::string& prompt) {
  HttpOptions opts;
  opts.timeout_seconds = cfg_.timeout_seconds;
  opts.max_retries = cfg_.max_retries;
  opts.initial_backoff_ms = cfg_.initial_backoff_ms;
  if (!cfg_.auth_value.empty()) opts.headers.emplace_back(cfg_.auth_header, cfg_.auth_value);
  const nlohmann::json body = {
      {"model", cfg_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", cfg_.temperature}};
  const nlohmann::json reply = post_json(cfg_.url, body, opts);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MinerError(std::string("chat reply lacks choices[0].message.content: ") + e.what());
  }
}

std::string HttpChatClient::identity() const {
  std::ostringstream out;
  out << "llm:" << cfg_.model << "@" << nlohmann::json(cfg_.temperature).dump();
  return out.str();
}

// --- Rule tables -------------------------------------------------------------

RuleTables RuleTables::from_json(const nlohmann::json& j) {
  RuleTables t;
  try {
    t.dictionary = j.value("dictionary", std::vector<std::string>{});
    t.synonyms = j.value("synonyms", std::map<std::string, std::string>{});
    t.hierarchy = j.value("hierarchy", SuperclassMap{});
    t.negation_cues = j.value("negation_cues", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw MinerError(std::string("malformed rule tables: ") + e.what());
  }
  return t;
}

nlohmann::json RuleTables::to_json() const {
  return {{"dictionary", dictionary},
          {"synonyms", synonyms},
          {"hierarchy", hierarchy},
          {"negation_cues", negation_cues}};
}

RuleTables default_rules() {
  RuleTables t;
  t.dictionary = {
      "normal ecg", "sinus rhythm", "sinus bradycardia", "sinus tachycardia",
      "sinus arrhythmia", "bradycardia", "tachycardia", "atrial fibrillation",
      "atrial flutter", "premature atrial contraction",
      "premature ventricular contraction", "first degree av block",
      "left bundle branch block", "right bundle branch block",
      "left anterior fascicular block", "left ventricular hypertrophy",
      "myocardial infarction", "anterior myocardial infarction",
      "inferior myocardial infarction", "lateral myocardial infarction",
      "septal myocardial infarction", "st elevation", "st depression",
      "t wave inversion", "t wave abnormality", "low qrs voltage", "prolonged qt",
      "left axis deviation", "right axis deviation"};
  t.synonyms = {
      {"afib", "atrial fibrillation"},
      {"lbbb", "left bundle branch block"},
      {"rbbb", "right bundle branch block"},
      {"lvh", "left ventricular hypertrophy"},
      {"pvc", "premature ventricular contraction"},
      {"pac", "premature atrial contraction"},
      {"1st degree av block", "first degree av block"},
      {"anterior infarct", "anterior myocardial infarction"},
      {"inferior infarct", "inferior myocardial infarction"},
      {"long qt", "prolonged qt"}};
  t.hierarchy = {
      {"myocardial infarction",
       {"anterior myocardial infarction", "inferior myocardial infarction",
        "lateral myocardial infarction", "septal myocardial infarction"}},
      {"bundle branch block", {"left bundle branch block", "right bundle branch block"}},
      {"atrial arrhythmia",
       {"atrial fibrillation", "atrial flutter", "premature atrial contraction"}},
      {"st t abnormality",
       {"st elevation", "st depression", "t wave inversion", "t wave abnormality"}}};
  std::vector<std::string> mi;
  for (const ecg::SyntheticClass& c : ecg::synthetic_classes()) {
    t.dictionary.emplace_back(c.name);
    if (!c.synonym.empty()) t.synonyms.emplace(std::string(c.synonym), std::string(c.name));
    if (c.name.find("myocardial infarction") != std::string_view::npos) {
      mi.emplace_back(c.name);
    }
  }
  t.hierarchy.emplace(std::string(ecg::kSyntheticSuperclass), mi);
  t.negation_cues = {"no", "not", "without", "absence of", "absent", "negative for",
                     "rule out", "ruled out", "free of"};
  return t;
}

// --- RuleBasedClient ---------------------------------------------------------

RuleBasedClient::RuleBasedClient(RuleTables tables) : tables_(std::move(tables)) {
  std::set<std::string> terms;
  auto add = [&](const std::string& s) {
    std::string n = normalize_entity(s);
    if (!n.empty()) terms.insert(std::move(n));
  };
  for (const auto& d : tables_.dictionary) add(d);
  for (const auto& [k, v] : tables_.synonyms) {
    add(k);
    add(v);
  }
  for (const auto& [super, members] : tables_.hierarchy) {
    add(super);
    for (const auto& m : members) add(m);
  }
  terms_.assign(terms.begin(), terms.end());
  // Longest first so the first hit at a position is the longest match.
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  for (std::string& cue : tables_.negation_cues) cue = fold(cue);
}

std::vector<std::string> RuleBasedClient::find_terms(std::string_view report) const {
  const std::string text = fold(report);
  std::vector<std::string> found;
  std::size_t clause_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '.' || c == ',' || c == ';' || c == '\n') {
      clause_start = i + 1;
      ++i;
      continue;
    }
    if (!is_word_char(c) || (i > 0 && is_word_char(text[i - 1]))) {
      ++i;
      continue;
    }
    const std::string* hit = nullptr;
    for (const std::string& term : terms_) {
      if (whole_word_at(text, i, term)) {
        hit = &term;
        break;
      }
    }
    if (hit == nullptr) {
      ++i;
      continue;
    }
    bool negated = false;
    const std::string_view clause(text.data() + clause_start, i - clause_start);
    for (const std::string& cue : tables_.negation_cues) {
      for (std::size_t p = clause.find(cue); p != std::string_view::npos;
           p = clause.find(cue, p + 1)) {
        if (whole_word_at(clause, p, cue)) {
          negated = true;
          break;
        }
      }
      if (negated) break;
    }
    if (!negated && std::find(found.begin(), found.end(), *hit) == found.end()) {
      found.push_back(*hit);
    }
    i += hit->size();
  }
  return found;
}

std::string RuleBasedClient::complete(const std::string& prompt) {
  if (starts_with(prompt, kExtractInstruction)) {
    const auto pos = prompt.find(kReportTag);
    const std::string_view report =
        pos == std::string::npos ? std::string_view() :
        std::string_view(prompt).substr(pos + kReportTag.size());
    std::string reply = "[";
    const std::vector<std::string> terms = find_terms(report);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (i) reply += ", ";
      reply += terms[i];
    }
    return reply + "]";
  }
  if (starts_with(prompt, kVerifyInstruction)) {
    const auto r = prompt.find(kReportTag);
    const auto e = prompt.rfind(kEntityTag);
    if (r == std::string::npos || e == std::string::npos || e < r) return "NO";
    const std::string_view view(prompt);
    const std::string_view report = view.substr(r + kReportTag.size(), e - r - kReportTag.size());
    const std::string entity = normalize_entity(view.substr(e + kEntityTag.size()));
    const std::vector<std::string> terms = find_terms(report);
    return std::find(terms.begin(), terms.end(), entity) != terms.end() ? "YES" : "NO";
  }
  auto list_between = [&](std::string_view prefix, std::string_view suffix) {
    std::string_view body(prompt);
    body.remove_prefix(prefix.size());
    if (body.size() >= suffix.size() && body.substr(body.size() - suffix.size()) == suffix) {
      body.remove_suffix(suffix.size());
    }
    return nlohmann::json::parse(body).get<std::vector<std::string>>();
  };
  if (starts_with(prompt, kMergePrefix)) {
    nlohmann::json out = nlohmann::json::object();
    for (const std::string& raw : list_between(kMergePrefix, kMergeSuffix)) {
      const std::string key = normalize_entity(raw);
      for (const auto& [syn, target] : tables_.synonyms) {
        if (normalize_entity(syn) == key) out[raw] = normalize_entity(target);
      }
    }
    return out.dump();
  }
  if (starts_with(prompt, kSuperclassPrefix)) {
    const std::vector<std::string> listed = list_between(kSuperclassPrefix, kSuperclassSuffix);
    std::set<std::string> present;
    for (const std::string& e : listed) present.insert(normalize_entity(e));
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [super, members] : tables_.hierarchy) {
      std::vector<std::string> hits;
      for (const std::string& m : members) {
        if (present.count(normalize_entity(m))) hits.push_back(normalize_entity(m));
      }
      if (!hits.empty()) out[normalize_entity(super)] = hits;
    }
    return out.dump();
  }
  return "I can only answer extraction, verification, merge and superclass prompts.";
}

std::string RuleBasedClient::identity() const {
  return "rule:" + content_hash(tables_.to_json().dump());
}

// --- CachingChatClient -------------------------------------------------------

CachingChatClient::CachingChatClient(ChatClient& inner, fs::path dir)
    : inner_(inner), dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

fs::path CachingChatClient::entry_path(const std::string& prompt) const {
  return dir_ / (hex64(fnv1a64(inner_.identity() + '\x1f' + prompt)) + ".json");
}

std::string CachingChatClient::complete(const std::string& prompt) {
  const fs::path path = entry_path(prompt);
  {
    std::lock_guard<std::mutex> lock(mu_);
    std::ifstream in(path);
    if (in) {
      try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("identity") == inner_.identity() && j.at("prompt") == prompt) {
          ++hits_;
          return j.at("response").get<std::string>();
        }
      } catch (const nlohmann::json::exception&) {
        // Corrupt entry: fall through and overwrite it.
      }
    }
    ++misses_;
  }
  const std::string response = inner_.complete(prompt);
  const nlohmann::json entry = {
      {"identity", inner_.identity()}, {"prompt", prompt}, {"response", response}};
  std::lock_guard<std::mutex> lock(mu_);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << entry.dump(2) << "\n";
  }
  fs::rename(tmp, path);
  return response;
}

void CachingChatClient::forget(const std::string& prompt) {
  std::lock_guard<std::mutex> lock(mu_);
  std::error_code ec;
  fs::remove(entry_path(prompt), ec);
  inner_.forget(prompt);
}

// --- Pipeline ----------------------------------------------------------------

std::vector<std::string> parse_entity_list(std::string_view reply) {
  const std::string_view list = bracketed(reply, '[', ']');
  if (list.empty()) throw MinerError("no bracketed list in reply");
  try {
    const auto j = nlohmann::json::parse(list);
    if (j.is_array() && std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_string(); })) {
      return j.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::parse_error&) {
    // Unquoted list; split below.
  }
  std::vector<std::string> out;
  std::string_view inner = list.substr(1, list.size() - 2);
  while (!inner.empty()) {
    const auto comma = inner.find(',');
    std::string_view item = inner.substr(0, comma);
    while (!item.empty() && (std::isspace(static_cast<unsigned char>(item.front())) ||
                             item.front() == '"' || item.front() == '\'')) {
      item.remove_prefix(1);
    }
    while (!item.empty() && (std::isspace(static_cast<unsigned char>(item.back())) ||
                             item.back() == '"' || item.back() == '\'')) {
      item.remove_suffix(1);
    }
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<std::string> extract_entities(std::string_view report, ChatClient& client,
                                          const MinerOptions& options) {
  if (fold(report).empty()) throw MinerError("cannot extract entities from an empty report");
  const std::vector<std::string> raw =
      ask(client, extraction_prompt(report), options, "extraction",
          [](const std::string& reply) { return parse_entity_list(reply); });
  std::vector<std::string> candidates;
  for (const std::string& r : raw) {
    std::string n = normalize_entity(r);
    if (!n.empty() && std::find(candidates.begin(), candidates.end(), n) == candidates.end()) {
      candidates.push_back(std::move(n));
    }
  }
  const std::string haystack = fold(report);
  std::vector<std::string> kept;
  for (const std::string& c : candidates) {
    const bool yes = ask(client, verification_prompt(report, c), options, "verification",
                         [](const std::string& reply) { return parse_yes_no(reply); });
    if (!yes) continue;
    if (haystack.find(c) == std::string::npos) {
      spdlog::warn("dropping '{}': not present in the report text", c);
      continue;
    }
    kept.push_back(c);
  }
  return kept;
}

MergeMap merge_entities(std::span<const std::string> entities, ChatClient& client,
                        const MinerOptions& options) {
  if (entities.empty()) throw MinerError("merge needs at least one entity");
  std::set<std::string> known;
  for (const std::string& e : entities) known.insert(normalize_entity(e));
  const MergeMap proposed = ask(
      client, merge_prompt(entities), options, "merge", [&](const std::string& reply) {
        const auto j = nlohmann::json::parse(bracketed(reply, '{', '}'));
        if (!j.is_object()) throw MinerError("merge reply is not a JSON object");
        MergeMap m;
        for (const auto& [k, v] : j.items()) {
          const std::string key = normalize_entity(k);
          const std::string value = normalize_entity(v.get<std::string>());
          if (value.empty()) throw MinerError("empty merged name for '" + k + "'");
          if (!known.count(key)) {
            spdlog::warn("merge reply mentions unknown entity '{}'", k);
            continue;
          }
          m[key] = value;
        }
        return m;
      });
  MergeMap out;
  for (const std::string& e : known) {
    // Follow chains such as a -> b -> c; a cycle stops at the first repeat.
    std::string target = e;
    std::set<std::string> seen = {target};
    for (auto it = proposed.find(target); it != proposed.end(); it = proposed.find(target)) {
      if (!seen.insert(it->second).second) break;
      target = it->second;
    }
    out[e] = target;
  }
  return out;
}

SuperclassMap aggregate_superclasses(std::span<const std::string> entities,
                                     ChatClient& client, const MinerOptions& options) {
  if (entities.empty()) return {};
  std::set<std::string> known;
  for (const std::string& e : entities) known.insert(normalize_entity(e));
  return ask(client, superclass_prompt(entities), options, "superclass",
             [&](const std::string& reply) {
               const auto j = nlohmann::json::parse(bracketed(reply, '{', '}'));
               if (!j.is_object()) throw MinerError("superclass reply is not a JSON object");
               SuperclassMap out;
               for (const auto& [super_raw, members] : j.items()) {
                 const std::string super = normalize_entity(super_raw);
                 if (super.empty()) throw MinerError("empty superclass name");
                 std::set<std::string> kept;
                 for (const auto& m : members.get<std::vector<std::string>>()) {
                   const std::string n = normalize_entity(m);
                   if (n == super) continue;
                   if (!known.count(n)) {
                     spdlog::warn("superclass '{}' lists unknown member '{}'", super, m);
                     continue;
                   }
                   kept.insert(n);
                 }
                 if (kept.empty()) continue;
                 auto& slot = out[super];
                 slot.insert(slot.end(), kept.begin(), kept.end());
                 std::sort(slot.begin(), slot.end());
                 slot.erase(std::unique(slot.begin(), slot.end()), slot.end());
               }
               return out;
             });
}

EntityVocabulary build_vocabulary(const MergeMap& merge_map,
                                  const SuperclassMap& superclasses) {
  EntityVocabulary v;
  std::set<std::string> canonical;
  for (const auto& [raw, merged] : merge_map) canonical.insert(merged);
  v.entities.assign(canonical.begin(), canonical.end());
  for (const auto& [super, members] : superclasses) {
    if (!canonical.count(super)) v.entities.push_back(super);
  }
  v.merge_map = merge_map;
  v.superclasses = superclasses;
  v.validate();
  return v;
}

LabelVector label_report(std::span<const std::string> entities,
                         const EntityVocabulary& vocab) {
  LabelVector out;
  out.bits.assign(vocab.size(), 0);
  for (const std::string& e : entities) {
    const auto canonical = vocab.canonical(e);
    const auto idx = canonical ? vocab.index_of(*canonical) : std::nullopt;
    if (!idx) {
      spdlog::warn("ignoring entity outside the vocabulary: '{}'", e);
      continue;
    }
    out.bits[*idx] = 1;
  }
  // Closure: superclasses may nest, so iterate to a fixed point.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [super, members] : vocab.superclasses) {
      const std::size_t s = *vocab.index_of(super);
      if (out.bits[s]) continue;
      for (const std::string& m : members) {
        if (out.bits[*vocab.index_of(m)]) {
          out.bits[s] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  return out;
}

MiningResult mine_corpus(std::span<const std::string> reports, ChatClient& client,
                         const MinerOptions& options) {
  MiningResult result;
  result.extracted.resize(reports.size());
  const std::size_t width = std::max<std::size_t>(1, options.concurrency);
  for (std::size_t wave = 0; wave < reports.size(); wave += width) {
    const std::size_t end = std::min(reports.size(), wave + width);
    if (width == 1) {
      result.extracted[wave] = extract_entities(reports[wave], client, options);
      continue;
    }
    std::vector<std::future<std::vector<std::string>>> pending;
    for (std::size_t i = wave; i < end; ++i) {
      pending.push_back(std::async(std::launch::async, [&, i] {
        return extract_entities(reports[i], client, options);
      }));
    }
    for (std::size_t i = wave; i < end; ++i) result.extracted[i] = pending[i - wave].get();
  }
  std::set<std::string> all;
  for (const auto& list : result.extracted) all.insert(list.begin(), list.end());
  if (all.empty()) throw MinerError("no entities were extracted from the corpus");
  const std::vector<std::string> raw(all.begin(), all.end());
  result.merge_map = merge_entities(raw, client, options);
  std::set<std::string> canonical;
  for (const auto& [r, m] : result.merge_map) canonical.insert(m);
  const std::vector<std::string> merged(canonical.begin(), canonical.end());
  result.superclasses = aggregate_superclasses(merged, client, options);
  result.vocabulary = build_vocabulary(result.merge_map, result.superclasses);
  for (const auto& list : result.extracted) {
    result.labels.push_back(label_report(list, result.vocabulary));
  }
  return result;
}

}  // namespace leadwise::miner
