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

#include "leadwise/cardiac_query.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "leadwise/gradcheck.h"
#include "leadwise/lead_encoder.h"
#include "leadwise/ops.h"
#include "leadwise/text_encoder.h"

namespace leadwise::cq {
namespace {

using nn::Tensor;

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return Tensor::from_values({rows, cols}, v);
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  return nn::gather_rows(x, perm);
}

double grad_norm(const Tensor& t) {
  if (!t.has_grad()) return 0.0;
  double s = 0.0;
  for (double g : t.grad()) s += g * g;
  return std::sqrt(s);
}

class QueryNetTest : public testing::Test {
 protected:
  void SetUp() override {
    cfg_.query_dim = 8;
    cfg_.token_dim = 6;
    cfg_.num_layers = 2;
    cfg_.num_heads = 2;
    cfg_.mlp_ratio = 2;
    Rng rng(1);
    net_ = CardiacQueryNetwork::create(store_, cfg_, rng);
  }

  CardiacQueryConfig cfg_;
  nn::ParamStore store_;
  CardiacQueryNetwork net_;
};

TEST(CqLoss, ZeroLogitsGiveLn2) {
  const Tensor logits = Tensor::zeros({5});
  for (const std::vector<double>& y :
       {std::vector<double>{0, 0, 0, 0, 0}, std::vector<double>{1, 0, 1, 1, 0}}) {
    EXPECT_NEAR(cq_loss(logits, y).item(), std::log(2.0), 1e-15);
  }
}

TEST(CqLoss, ClosedFormAndSaturation) {
  const Tensor logits = Tensor::from_values({2}, {2.0, -2.0});
  const std::vector<double> y = {1, 0};
  // Both terms equal log(1 + e^-2).
  EXPECT_NEAR(cq_loss(logits, y).item(), std::log1p(std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(cq_loss(logits, y).item(), 0.1269, 5e-5);
  const Tensor sat = Tensor::from_values({2}, {30.0, -30.0});
  EXPECT_LT(cq_loss(sat, y).item(), 1e-3);
}

TEST(CqLoss, RejectsNonBinaryLabels) {
  const Tensor logits = Tensor::zeros({2});
  EXPECT_THROW(cq_loss(logits, std::vector<double>{0.5, 1}), QueryError);
  EXPECT_THROW(cq_loss(logits, std::vector<double>{1}), QueryError);
}

TEST(CqLoss, BatchIsMeanOfRecords) {
  const std::vector<Tensor> logits = {Tensor::from_values({1}, {2.0}),
                                      Tensor::from_values({3}, {0.0, 0.0, 0.0})};
  const std::vector<std::vector<double>> y = {{1}, {0, 1, 0}};
  const double want = 0.5 * (std::log1p(std::exp(-2.0)) + std::log(2.0));
  EXPECT_NEAR(cq_loss_batch(logits, y).item(), want, 1e-15);
}

TEST_F(QueryNetTest, OneLogitPerQuery) {
  Rng rng(2);
  const Tensor logits = net_.forward(random_matrix(5, 8, rng), random_matrix(7, 6, rng));
  EXPECT_EQ(logits.shape(), (nn::Shape{5}));
  for (double v : logits.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST_F(QueryNetTest, DuplicatedQueryScoresLikeSingleQuery) {
  Rng rng(3);
  const Tensor q = random_matrix(1, 8, rng);
  const Tensor tokens = random_matrix(9, 6, rng);
  const double single = net_.forward(q, tokens).values()[0];
  const std::vector<std::size_t> twice = {0, 0};
  const Tensor pair = net_.forward(nn::gather_rows(q, twice), tokens);
  EXPECT_NEAR(pair.values()[0], single, 1e-13);
  EXPECT_EQ(pair.values()[0], pair.values()[1]);
}

TEST_F(QueryNetTest, QueryPermutationEquivariance) {
  Rng rng(4);
  const Tensor q = random_matrix(6, 8, rng);
  const Tensor tokens = random_matrix(10, 6, rng);
  const Tensor base = net_.forward(q, tokens);
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(perm);
    const Tensor permuted = net_.forward(permute_rows(q, perm), tokens);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      EXPECT_NEAR(permuted.values()[i], base.values()[perm[i]], 1e-12);
    }
  }
}

TEST_F(QueryNetTest, TokenOrderInvariance) {
  Rng rng(5);
  const Tensor q = random_matrix(4, 8, rng);
  const Tensor tokens = random_matrix(12, 6, rng);
  const Tensor base = net_.forward(q, tokens);
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  const Tensor shuffled = net_.forward(q, permute_rows(tokens, perm));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(shuffled.values()[i], base.values()[i], 1e-12);
  }
}

TEST_F(QueryNetTest, RejectsEmptyAndMismatchedInputs) {
  Rng rng(6);
  EXPECT_THROW(net_.forward(Tensor::zeros({0, 8}), random_matrix(3, 6, rng)), QueryError);
  EXPECT_THROW(net_.forward(random_matrix(2, 8, rng), Tensor::zeros({0, 6})), QueryError);
  EXPECT_THROW(net_.forward(random_matrix(2, 7, rng), random_matrix(3, 6, rng)), QueryError);
  EXPECT_THROW(net_.forward(random_matrix(2, 8, rng), random_matrix(3, 5, rng)), QueryError);
  CardiacQueryConfig bad = cfg_;
  bad.num_heads = 3;
  EXPECT_THROW(bad.validate(), QueryError);
}

TEST_F(QueryNetTest, GradientCheck) {
  Rng rng(7);
  const Tensor q = random_matrix(3, 8, rng).clone(true);
  const Tensor tokens = random_matrix(5, 6, rng).clone(true);
  const std::vector<double> y = {1, 0, 1};
  std::vector<nn::NamedTensor> params = store_.all();
  params.push_back({"queries", q});
  params.push_back({"tokens", tokens});
  const auto result = nn::check_gradients(
      [&] { return cq_loss(net_.forward(q, tokens), y); }, params);
  EXPECT_LT(result.max_rel_error, 1e-4)
      << result.worst_tensor << "[" << result.worst_index << "] "
      << result.worst_analytic << " vs " << result.worst_numeric;
}

TEST(QueryNet, GradientReachesBothTowers) {
  encoder::TokenizerConfig ecfg;
  ecfg.token_length = 4;
  ecfg.segments = 5;
  ecfg.embed_dim = 8;
  ecfg.num_layers = 1;
  ecfg.num_heads = 2;
  ecfg.shared_dim = 8;
  text::ReferenceTextConfig tcfg;
  tcfg.embed_dim = 8;
  tcfg.num_layers = 1;
  tcfg.num_heads = 2;
  tcfg.shared_dim = 8;
  CardiacQueryConfig qcfg;
  qcfg.query_dim = 8;
  qcfg.token_dim = 8;
  qcfg.num_layers = 1;
  qcfg.num_heads = 2;

  nn::ParamStore store;
  Rng rng(8);
  const auto enc = encoder::EcgEncoder::create(store, ecfg, rng);
  const std::vector<std::string> names = {"atrial fibrillation", "sinus rhythm"};
  const auto vocab = text::TextVocabulary::build(names);
  const auto txt = text::ReferenceTextEncoder::create(store, tcfg, vocab, rng);
  const auto net = CardiacQueryNetwork::create(store, qcfg, rng);

  ecg::EcgRecord rec;
  rec.lead_ids = {1, 2};
  rec.length = ecfg.signal_length();
  rec.signal.resize(2 * rec.length);
  for (float& v : rec.signal) v = static_cast<float>(rng.normal());
  const auto out = enc.encode(encoder::tokenize(rec, ecfg));
  const std::vector<double> y = {1, 0};
  cq_loss(net.forward(txt.embed(names), out.tokens), y).backward();

  double ecg_norm = 0.0, text_norm = 0.0;
  for (const auto& p : store.all()) {
    if (p.name.starts_with("ecg.")) ecg_norm += grad_norm(p.tensor);
    if (p.name.starts_with("text.")) text_norm += grad_norm(p.tensor);
  }
  EXPECT_GT(ecg_norm, 0.0);
  EXPECT_GT(text_norm, 0.0);
}

}  // namespace
}  // namespace leadwise::cq
