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

#include "leadwise/text_encoder.h"

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "httplib.h"
#include "leadwise/gradcheck.h"
#include "leadwise/ops.h"

namespace leadwise::text {
namespace {

using testing::ElementsAre;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::span<const double> row(const nn::Tensor& t, std::size_t r) {
  return t.values().subspan(r * t.cols(), t.cols());
}

TEST(SplitWords, LowercasesAndDropsPunctuation) {
  EXPECT_THAT(split_words("Sinus  Bradycardia, rate 55bpm."),
              ElementsAre("sinus", "bradycardia", "rate", "55bpm"));
  EXPECT_TRUE(split_words(" .,; ").empty());
}

TEST(TextVocabulary, UnknownTokenAndRoundTrip) {
  const std::vector<std::string> corpus = {"atrial fibrillation", "Sinus rhythm."};
  const TextVocabulary v = TextVocabulary::build(corpus);
  EXPECT_EQ(v.words()[0], TextVocabulary::kUnknown);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("zebra"), 0u);
  EXPECT_THAT(v.encode("sinus zebra"), ElementsAre(v.id("sinus"), 0u));
  EXPECT_THAT(v.encode("..."), ElementsAre(0u));
  EXPECT_EQ(TextVocabulary::from_json(v.to_json()).words(), v.words());
}

class ReferenceEncoderTest : public testing::Test {
 protected:
  void SetUp() override {
    const std::vector<std::string> corpus = {
        "sinus bradycardia. rate 50 bpm.", "atrial fibrillation with rapid response",
        "left bundle branch block"};
    Rng rng(21);
    cfg_.embed_dim = 16;
    cfg_.num_heads = 2;
    cfg_.shared_dim = 8;
    enc_ = ReferenceTextEncoder::create(store_, cfg_, TextVocabulary::build(corpus), rng);
  }
  ReferenceTextConfig cfg_;
  nn::ParamStore store_;
  ReferenceTextEncoder enc_;
};

TEST_F(ReferenceEncoderTest, DeterministicUnitEmbeddings) {
  const std::vector<std::string> texts = {"sinus bradycardia", "sinus bradycardia",
                                          "", "left bundle branch block"};
  const nn::Tensor e = enc_.embed(texts);
  ASSERT_EQ(e.shape(), (nn::Shape{4, 8}));
  for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(norm(row(e, r)), 1.0, 1e-6);
  EXPECT_TRUE(std::equal(row(e, 0).begin(), row(e, 0).end(), row(e, 1).begin()));
}

TEST_F(ReferenceEncoderTest, DisjointTextsDoNotCollapse) {
  const std::vector<std::string> texts = {"sinus bradycardia", "atrial fibrillation"};
  const nn::Tensor e = enc_.embed(texts);
  EXPECT_LT(cosine(row(e, 0), row(e, 1)), 1.0 - 1e-9);
}

TEST_F(ReferenceEncoderTest, GradientCheckThroughSimilarity) {
  const std::vector<std::string> a = {"sinus bradycardia rate 50", "atrial fibrillation"};
  const std::vector<std::string> b = {"left bundle branch block", "rapid response"};
  auto loss = [&] {
    const nn::Tensor s = nn::matmul(enc_.embed(a), nn::transpose(enc_.embed(b)));
    return nn::mean(nn::log_softmax(nn::scale(s, 1.0 / 0.07)));
  };
  nn::GradCheckOptions opts;
  opts.max_coords_per_tensor = 24;
  const auto r = nn::check_gradients(loss, store_.all(), opts);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "] " << r.worst_analytic << " vs " << r.worst_numeric;
}

// Minimal stand-in for an embedding service.
class FakeEmbeddingServer {
 public:
  explicit FakeEmbeddingServer(std::size_t width, int failures_before_success = 0)
      : width_(width), failures_left_(failures_before_success) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (failures_left_.fetch_sub(1) > 0) {
        res.status = 503;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& t : body.at("texts")) {
        std::vector<double> v(width_, 1.0);
        v[0] = static_cast<double>(t.get<std::string>().size());
        out.push_back(v);
      }
      res.set_content(nlohmann::json{{"embeddings", out}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEmbeddingServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  int requests() const { return requests_; }

 private:
  httplib::Server server_;
  std::size_t width_;
  std::atomic<int> failures_left_;
  std::atomic<int> requests_{0};
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpTextEmbedder, NormalizesAndBatches) {
  FakeEmbeddingServer server(4);
  ExternalEmbedderConfig cfg;
  cfg.url = server.url();
  cfg.shared_dim = 4;
  cfg.batch_size = 2;
  const HttpTextEmbedder embedder(cfg);
  const std::vector<std::string> texts = {"a", "bb", "ccc", "dddd", "eeeee"};
  const nn::Tensor e = embedder.embed(texts);
  ASSERT_EQ(e.shape(), (nn::Shape{5, 4}));
  EXPECT_EQ(server.requests(), 3);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_NEAR(norm(row(e, r)), 1.0, 1e-12);
    const double first = static_cast<double>(r + 1);
    EXPECT_NEAR(e.at(r, 0), first / std::sqrt(first * first + 3.0), 1e-12);
  }
}

TEST(HttpTextEmbedder, RetriesTransientFailures) {
  FakeEmbeddingServer server(3, 2);
  ExternalEmbedderConfig cfg;
  cfg.url = server.url();
  cfg.shared_dim = 3;
  cfg.initial_backoff_ms = 1;
  const std::vector<std::string> texts = {"x"};
  EXPECT_EQ(HttpTextEmbedder(cfg).embed(texts).size(), 3u);
  EXPECT_EQ(server.requests(), 3);

  FakeEmbeddingServer down(3, 100);
  cfg.url = down.url();
  cfg.max_retries = 1;
  EXPECT_THROW(HttpTextEmbedder(cfg).embed(texts), HttpError);
  EXPECT_EQ(down.requests(), 2);
}

TEST(HttpTextEmbedder, DimensionMismatchNeedsProjection) {
  FakeEmbeddingServer server(10);
  ExternalEmbedderConfig cfg;
  cfg.url = server.url();
  cfg.shared_dim = 4;
  const std::vector<std::string> texts = {"abc", "abc"};
  EXPECT_THROW(HttpTextEmbedder(cfg).embed(texts), std::runtime_error);
  cfg.projection_seed = 5;
  const nn::Tensor a = HttpTextEmbedder(cfg).embed(texts);
  const nn::Tensor b = HttpTextEmbedder(cfg).embed(texts);
  EXPECT_EQ(a.shape(), (nn::Shape{2, 4}));
  EXPECT_NEAR(norm(row(a, 0)), 1.0, 1e-12);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

}  // namespace
}  // namespace leadwise::text
