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

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "httplib.h"
#include "leadwise/ecg_data.h"
#include "mining_fixture.h"

namespace leadwise::miner {
namespace {

namespace fs = std::filesystem;
using testing::ElementsAre;
using testing::HasSubstr;
using testing::IsEmpty;

// Answers prompts through a callback and counts calls.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::function<std::string(const std::string&)> fn)
      : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt) override {
    ++calls;
    return fn_(prompt);
  }
  std::string identity() const override { return "scripted"; }
  int calls = 0;

 private:
  std::function<std::string(const std::string&)> fn_;
};

bool is_extraction(const std::string& p) { return p.rfind("Please extract", 0) == 0; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Prompts, CarryTheInstructionsVerbatim) {
  EXPECT_THAT(extraction_prompt("x"),
              HasSubstr("Please extract all positive Cardiac-related Entities from the "
                        "given ECG report. Output format is [Entity1, Entity2, ...]"));
  EXPECT_THAT(verification_prompt("x", "y"),
              HasSubstr("Please verify the extracted cardiac-related entities as existing "
                        "and positive in the given report. Output format is YES or NO"));
  const std::vector<std::string> list = {"afib"};
  EXPECT_EQ(merge_prompt(list),
            "Please merge the cardiac-related entities that have the same semantics but "
            "different expressions. Here are [\"afib\"]. Output format is JSON, where the "
            "key is the original name and the value is the merged name.");
  EXPECT_EQ(superclass_prompt(list),
            "Please detect all the superclasses present in [\"afib\"]. Output format is "
            "JSON, where the key is the superclass name and the values are the "
            "cardiac-related entities that belong to this superclass.");
}

TEST(ParseEntityList, QuotedUnquotedAndProse) {
  EXPECT_THAT(parse_entity_list("[a, b c]"), ElementsAre("a", "b c"));
  EXPECT_THAT(parse_entity_list("Sure: [\"a\", \"b\"] done"), ElementsAre("a", "b"));
  EXPECT_THAT(parse_entity_list("['x' , y]"), ElementsAre("x", "y"));
  EXPECT_THAT(parse_entity_list("[]"), IsEmpty());
  EXPECT_THROW(parse_entity_list("none"), MinerError);
}

TEST(Extract, WorkedExample) {
  RuleBasedClient client(default_rules());
  EXPECT_THAT(extract_entities("sinus bradycardia. anterior myocardial infarction.", client),
              ElementsAre("sinus bradycardia", "anterior myocardial infarction"));
}

TEST(Extract, SingleTermDependsOnDictionary) {
  RuleBasedClient with_normal(default_rules());
  EXPECT_THAT(extract_entities("normal ecg", with_normal), ElementsAre("normal ecg"));
  RuleTables t;
  t.dictionary = {"normal"};
  RuleBasedClient just_normal(t);
  EXPECT_THAT(extract_entities("normal ecg", just_normal), ElementsAre("normal"));
  RuleBasedClient empty{RuleTables{}};
  EXPECT_THAT(extract_entities("normal ecg", empty), IsEmpty());
}

TEST(Extract, NegatedMentionsAreSkipped) {
  RuleBasedClient client(default_rules());
  EXPECT_THAT(extract_entities("Sinus rhythm. No atrial fibrillation; without st elevation",
                               client),
              ElementsAre("sinus rhythm"));
}

TEST(Extract, SubstringGuardDropsInventedTerms) {
  ScriptedClient client([](const std::string& p) -> std::string {
    if (is_extraction(p)) return "[sinus rhythm, myocardial infarction]";
    return "YES";
  });
  EXPECT_THAT(extract_entities("Sinus rhythm.", client), ElementsAre("sinus rhythm"));
}

TEST(Extract, VerificationNoDropsCandidate) {
  ScriptedClient client([](const std::string& p) -> std::string {
    if (is_extraction(p)) return "[a, b]";
    return p.ends_with("Entity: a") ? "YES" : "No.";
  });
  EXPECT_THAT(extract_entities("a b", client), ElementsAre("a"));
  EXPECT_EQ(client.calls, 3);
}

TEST(Extract, RetriesUnparseableReplies) {
  int bad = 2;
  ScriptedClient flaky([&](const std::string& p) -> std::string {
    if (is_extraction(p)) return bad-- > 0 ? "I think it is sinus rhythm" : "[sinus rhythm]";
    return "YES";
  });
  EXPECT_THAT(extract_entities("sinus rhythm", flaky), ElementsAre("sinus rhythm"));
  ScriptedClient broken([](const std::string& p) -> std::string {
    return is_extraction(p) ? "[x]" : "maybe";
  });
  EXPECT_THROW(extract_entities("x", broken), MinerError);
  EXPECT_THROW(extract_entities("  ", broken), MinerError);
}

TEST(Merge, SynonymsAndIdentity) {
  RuleBasedClient client(default_rules());
  const std::vector<std::string> pair = {"afib", "atrial fibrillation"};
  const MergeMap m = merge_entities(pair, client);
  EXPECT_EQ(m.at("afib"), "atrial fibrillation");
  EXPECT_EQ(m.at("atrial fibrillation"), "atrial fibrillation");
  const std::vector<std::string> single = {"sinus rhythm"};
  EXPECT_EQ(merge_entities(single, client), (MergeMap{{"sinus rhythm", "sinus rhythm"}}));
  EXPECT_THROW(merge_entities(std::vector<std::string>{}, client), MinerError);
}

TEST(Merge, IdempotentOnCanonicalNames) {
  RuleBasedClient client(default_rules());
  const std::vector<std::string> raw = {"afib", "lbbb", "lvh", "sinus rhythm", "pvc"};
  std::vector<std::string> canonical;
  for (const auto& [k, v] : merge_entities(raw, client)) canonical.push_back(v);
  for (const auto& [k, v] : merge_entities(canonical, client)) EXPECT_EQ(k, v);
}

TEST(Merge, FollowsChainsAndRejectsEmptyNames) {
  ScriptedClient chain([](const std::string&) { return R"({"a": "b", "b": "c"})"; });
  const std::vector<std::string> list = {"a", "b"};
  const MergeMap m = merge_entities(list, chain);
  EXPECT_EQ(m.at("a"), "c");
  EXPECT_EQ(m.at("b"), "c");
  ScriptedClient empty([](const std::string&) { return R"({"a": "  "})"; });
  EXPECT_THROW(merge_entities(list, empty), MinerError);
}

TEST(Superclass, WorkedExamples) {
  RuleBasedClient client(default_rules());
  const std::vector<std::string> mi = {"anterior myocardial infarction",
                                       "inferior myocardial infarction"};
  const SuperclassMap s = aggregate_superclasses(mi, client);
  EXPECT_EQ(s, (SuperclassMap{{"myocardial infarction", mi}}));
  const std::vector<std::string> unrelated = {"sinus rhythm", "prolonged qt"};
  EXPECT_THAT(aggregate_superclasses(unrelated, client), IsEmpty());

  const MergeMap merge = {{mi[0], mi[0]}, {mi[1], mi[1]}};
  const EntityVocabulary v = build_vocabulary(merge, s);
  EXPECT_EQ(v.size(), 2u + 1u);
  EXPECT_EQ(v.entities.back(), "myocardial infarction");
}

TEST(Superclass, DropsUnknownMembers) {
  ScriptedClient client([](const std::string&) {
    return R"({"Group": ["a", "zzz"], "Empty": ["zzz"]})";
  });
  const std::vector<std::string> list = {"a", "b"};
  EXPECT_EQ(aggregate_superclasses(list, client),
            (SuperclassMap{{"group", std::vector<std::string>{"a"}}}));
}

TEST(LabelReport, ClosureAndEmpty) {
  EntityVocabulary v;
  v.entities = {"anterior myocardial infarction", "sinus rhythm", "myocardial infarction"};
  v.merge_map = {{"anterior infarct", "anterior myocardial infarction"}};
  v.superclasses = {{"myocardial infarction", {"anterior myocardial infarction"}}};
  const std::vector<std::string> one = {"Anterior Infarct"};
  EXPECT_EQ(label_report(one, v).bits, (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_EQ(label_report(std::vector<std::string>{}, v).bits,
            (std::vector<std::uint8_t>{0, 0, 0}));
  const std::vector<std::string> unknown = {"qt prolongation", "sinus rhythm"};
  EXPECT_EQ(label_report(unknown, v).bits, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(LabelReport, LengthMatchesVocabulary) {
  EntityVocabulary v;
  for (int i = 0; i < 277; ++i) v.entities.push_back("entity " + std::to_string(i));
  EXPECT_EQ(label_report(std::vector<std::string>{"entity 5"}, v).size(), 277u);
}

TEST(Fixture, MatchesHandAuthoredFiles) {
  const auto f = testing_support::load_mining_fixture(LEADWISE_FIXTURE_DIR "/mining");
  RuleBasedClient client(f.rules);
  const MiningResult r = mine_corpus(f.reports, client);
  ASSERT_EQ(r.extracted.size(), f.expected_entities.size());
  for (std::size_t i = 0; i < r.extracted.size(); ++i) {
    EXPECT_EQ(r.extracted[i], f.expected_entities[i]) << f.record_ids[i];
  }
  EXPECT_EQ(r.vocabulary.entities, f.expected_vocabulary.entities);
  EXPECT_EQ(r.merge_map, f.expected_vocabulary.merge_map);
  EXPECT_EQ(r.superclasses, f.expected_vocabulary.superclasses);
  ASSERT_EQ(r.labels.size(), f.expected_labels.size());
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    EXPECT_EQ(r.labels[i], f.expected_labels[i].labels) << f.record_ids[i];
  }
}

TEST(Fuzz, GuardAndClosureHold) {
  const RuleTables rules = default_rules();
  RuleBasedClient client(rules);
  Rng rng(2024);
  std::vector<std::string> reports;
  for (int i = 0; i < 1000; ++i) reports.push_back(testing_support::fuzz_report(rules, rng));
  const MiningResult r = mine_corpus(reports, client);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::string lower = testing_support::lowercase(reports[i]);
    for (const std::string& e : r.extracted[i]) {
      EXPECT_NE(lower.find(e), std::string::npos) << e << " | " << reports[i];
    }
    EXPECT_TRUE(testing_support::superclass_closed(r.labels[i], r.vocabulary));
  }
  EXPECT_NO_THROW(r.vocabulary.validate());
}

TEST(SyntheticCorpus, RuleClientRecoversGroundTruth) {
  ecg::SyntheticOptions opts;
  opts.num_records = 64;
  const ecg::SyntheticDataset ds = ecg::generate_synthetic(opts);
  std::vector<std::string> reports;
  for (const auto& rec : ds.records) reports.push_back(rec.report);
  RuleBasedClient client(default_rules());
  const MiningResult r = mine_corpus(reports, client);
  EXPECT_EQ(r.vocabulary.to_json(), ds.vocabulary.to_json());
}

TEST(Cache, SecondRunIsServedFromDisk) {
  const fs::path dir = fs::temp_directory_path() / "leadwise_miner_cache";
  fs::remove_all(dir);
  const auto f = testing_support::load_mining_fixture(LEADWISE_FIXTURE_DIR "/mining");
  RuleBasedClient rules(f.rules);
  std::string first, second;
  {
    CachingChatClient cached(rules, dir / "cache");
    write_vocabulary(dir / "a.json", mine_corpus(f.reports, cached).vocabulary);
    EXPECT_EQ(cached.hits(), 0);
  }
  {
    CachingChatClient cached(rules, dir / "cache");
    write_vocabulary(dir / "b.json", mine_corpus(f.reports, cached).vocabulary);
    EXPECT_EQ(cached.misses(), 0);
    EXPECT_GT(cached.hits(), 20);
  }
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
}

TEST(HttpChatClient, SendsChatCompletionRequests) {
  httplib::Server server;
  nlohmann::json seen;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    seen["auth"] = req.get_header_value("Authorization");
    const nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "[sinus rhythm]"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  LlmClientConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.model = "test-model";
  cfg.auth_value = "Bearer abc";
  HttpChatClient client(cfg);
  EXPECT_EQ(client.complete("hello"), "[sinus rhythm]");
  EXPECT_EQ(seen["model"], "test-model");
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], "hello");
  EXPECT_EQ(seen["auth"], "Bearer abc");
  EXPECT_EQ(client.identity(), "llm:test-model@0.0");
  server.stop();
  t.join();
}

}  // namespace
}  // namespace leadwise::miner
