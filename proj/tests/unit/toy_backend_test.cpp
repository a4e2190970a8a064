#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include "reason_iad/knowledge.hpp"
#include "reason_iad/latent.hpp"
#include "reason_iad/toy_backend.hpp"
#include "reason_iad/toy_scenario.hpp"

namespace reason_iad {
namespace {

std::vector<EmbeddingVector> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  auto rng = seeded_rng(seed, "test_rows");
  std::vector<EmbeddingVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    rows.emplace_back(std::move(v));
  }
  return rows;
}

EvaluationRequest random_request(std::size_t d, std::uint64_t seed, std::size_t options = 3) {
  EvaluationRequest r;
  r.sequence = random_rows(10, d, seed);
  r.patch_positions = {1, 2, 3, 4, 5};
  r.latent_positions = {7, 8, 9};
  r.num_options = options;
  return r;
}

TEST(ToyEncodeText, DeterministicUnitNorm) {
  const auto a = toy_encode_text("scratch on the Surface", 16, 0);
  EXPECT_EQ(a, toy_encode_text("scratch on the Surface", 16, 0));
  EXPECT_EQ(a, toy_encode_text("  scratch ON the surface ", 16, 0));
  EXPECT_NEAR(l2_norm(a.values()), 1.0, 1e-9);
  EXPECT_THROW(toy_encode_text("   ", 16, 0), Error);
}

TEST(ToyEncodeText, DistinctLabels) {
  EXPECT_LT(cosine_similarity(toy_encode_text("cable", 16, 7), toy_encode_text("capsule", 16, 7)), 0.99);
  EXPECT_NE(toy_encode_text("cable", 16, 7), toy_encode_text("cable", 16, 8));
}

TEST(ToyEncodeImage, IdentityAndDimensionCheck) {
  const auto rows = random_rows(5, 4, 1);
  const ToyImageSpec spec{rows[0], {rows.begin() + 1, rows.end()}};
  const auto img = toy_encode_image(spec, 4);
  EXPECT_EQ(img.pooled, spec.pooled);
  ASSERT_EQ(img.patches.size(), 4u);
  EXPECT_EQ(img.patches, spec.patches);
  EXPECT_THROW(toy_encode_image(spec, 8), Error);

  ToyBackend backend(4, 0);
  EXPECT_EQ(backend.encode_image(ImageRef{"unused", spec}).patches, spec.patches);
}

TEST(ToyEvaluate, DistributionsAndAttentionAreValid) {
  ToyBackend backend(8, 3);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto req = random_request(8, s);
    const auto res = backend.evaluate(req);
    ASSERT_NO_THROW(validate_evaluation(req, res));
    for (const auto& p : res.per_token) {
      double sum = 0;
      for (double x : p.probs()) {
        EXPECT_GT(x, 0.0);
        sum += x;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
      EXPECT_LT(normalized_entropy(p), 1.0);
    }
    EXPECT_EQ(res.attention.rows(), 3u);
    EXPECT_EQ(res.attention.cols(), 5u);
  }
}

TEST(ToyEvaluate, DeterministicAndStateless) {
  ToyBackend backend(8, 3);
  const auto a = random_request(8, 1);
  const auto b = random_request(8, 2);
  const auto first = backend.evaluate(a);
  backend.evaluate(b);
  EXPECT_EQ(backend.evaluate(a), first);
  ToyBackend twin(8, 3);
  EXPECT_EQ(twin.evaluate(a), first);
}

TEST(ToyEvaluate, RejectsBadRequests) {
  ToyBackend backend(8, 3);
  auto r = random_request(8, 1);
  r.num_options = 1;
  EXPECT_THROW(backend.evaluate(r), Error);
  r = random_request(8, 1);
  r.latent_positions = {42};
  EXPECT_THROW(backend.evaluate(r), Error);
  r = random_request(4, 1);
  EXPECT_THROW(backend.evaluate(r), Error);
}

TEST(ToyBackend, AnswerHeadIsPrefixConsistent) {
  ToyBackend backend(8, 3);
  const Matrix two = backend.answer_head(2);
  const Matrix five = backend.answer_head(5);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(two(c, k), five(c, k));
  }
}

TEST(ToyBackend, NeutralTokenIsThink) {
  ToyBackend backend(8, 3);
  EXPECT_EQ(backend.neutral_token_embedding(), toy_encode_text("think", 8, 3));
  EXPECT_FALSE(backend.capabilities().has(Capability::kGenerate));
  EXPECT_TRUE(backend.capabilities().has(Capability::kEvaluate));
}

// ---- Crafted scenario --------------------------------------------------------

TEST(Scenario, DefectPatchSolvesItsConstraints) {
  ToyBackend backend(16, 0);
  const std::size_t c = 4, correct = 2;
  const auto w = derive_defect_patch(backend, correct, c, 6.0, 3.0);
  const Matrix head = backend.answer_head(c);
  const auto v = multiply(backend.value_weights(), w.values());
  for (std::size_t k = 0; k < c; ++k) {
    double logit = 0;
    for (std::size_t j = 0; j < 16; ++j) logit += head(k, j) * v[j];
    EXPECT_NEAR(logit, k == correct ? 6.0 : 0.0, 1e-9);
  }
  const auto n = backend.neutral_token_embedding();
  const auto q = multiply(backend.query_weights(), n.values());
  const auto key = multiply(backend.key_weights(), w.values());
  double score = 0;
  for (std::size_t j = 0; j < 16; ++j) score += q[j] * key[j];
  EXPECT_NEAR(score / 4.0, 3.0, 1e-9);
}

TEST(Scenario, SuiteShape) {
  ToyBackend backend(16, 0);
  const auto suite = make_crafted_suite(backend);
  ASSERT_EQ(suite.instances.size(), 10u);
  std::set<Subtask> seen;
  for (const auto& ci : suite.instances) {
    const auto& q = ci.instance;
    ASSERT_TRUE(q.query_image.inline_spec.has_value());
    EXPECT_EQ(q.query_image.inline_spec->patches.size(), 16u);
    EXPECT_LT(ci.defect_patch, 16u);
    EXPECT_EQ(q.gold_option, ci.correct_option);
    EXPECT_TRUE(q.reference_image.has_value());
    seen.insert(q.subtask);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_EQ(make_crafted_suite(backend).instances.front().instance, suite.instances.front().instance);
}

// Every patch subset S with |S| < t: adding the defect patch raises the
// correct option's probability at every latent token, and the best subset of
// size <= t by that probability contains the defect patch.
TEST(Scenario, ExhaustiveSubsetOracle) {
  ToyBackend backend(16, 0);
  const auto suite = make_crafted_suite(backend);
  const std::size_t t = 4, m = 4;
  const std::vector<EmbeddingVector> latent(m, backend.neutral_token_embedding());

  for (const auto& ci : suite.instances) {
    const auto& patches = ci.instance.query_image.inline_spec->patches;
    const std::size_t c = ci.instance.options.size();
    std::vector<EmbeddingVector> prompt{backend.encode_text(ci.instance.question)};
    std::vector<std::size_t> patch_positions;
    for (const auto& p : patches) {
      patch_positions.push_back(prompt.size());
      prompt.push_back(p);
    }
    auto correct_probs = [&](const std::vector<std::size_t>& subset) {
      EvaluationRequest req;
      req.sequence = prompt;
      for (auto i : subset) req.sequence.push_back(patches[i]);
      for (const auto& z : latent) {
        req.latent_positions.push_back(req.sequence.size());
        req.sequence.push_back(z);
      }
      req.patch_positions = patch_positions;
      req.num_options = c;
      std::vector<double> out;
      for (const auto& p : backend.evaluate(req).per_token) out.push_back(p[ci.correct_option]);
      return out;
    };

    double best = -1.0;
    bool best_has_defect = false;
    std::vector<std::size_t> subset;
    std::function<void(std::size_t)> visit = [&](std::size_t start) {
      const auto base = correct_probs(subset);
      const double mean = std::accumulate(base.begin(), base.end(), 0.0) / m;
      const bool has_defect = std::find(subset.begin(), subset.end(), ci.defect_patch) != subset.end();
      if (mean > best) {
        best = mean;
        best_has_defect = has_defect;
      }
      if (!has_defect && subset.size() < t) {
        auto with = subset;
        with.push_back(ci.defect_patch);
        std::sort(with.begin(), with.end());
        const auto boosted = correct_probs(with);
        for (std::size_t i = 0; i < m; ++i) {
          ASSERT_GT(boosted[i], base[i]) << ci.instance.instance_id << " token " << i;
        }
      }
      if (subset.size() == t) return;
      for (std::size_t i = start; i < patches.size(); ++i) {
        subset.push_back(i);
        visit(i + 1);
        subset.pop_back();
      }
    };
    visit(0);
    EXPECT_TRUE(best_has_defect) << ci.instance.instance_id;
  }
}

}  // namespace
}  // namespace reason_iad
