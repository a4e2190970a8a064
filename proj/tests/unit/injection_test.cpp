#include <gtest/gtest.h>

#include <random>

#include "reason_iad/injection.hpp"

namespace reason_iad {
namespace {

EvaluationResult with_attention(std::vector<std::vector<double>> rows) {
  EvaluationResult r;
  r.attention = Matrix(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) r.attention(i, j) = rows[i][j];
    r.latent_positions.push_back(i);
  }
  return r;
}

EmbeddingVector scalar(double x) { return EmbeddingVector({x}); }

TEST(PatchSet, CanonicalOrder) {
  EXPECT_EQ(PatchSet({2, 0}).indices(), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(PatchSet({2, 0}), PatchSet({0, 2}));
  EXPECT_THROW(PatchSet({1, 1}), Error);
  EXPECT_TRUE(PatchSet({4, 1}).contains(4));
}

TEST(Attention, Examples) {
  auto w = [](const AttentionProfile& p) { return std::vector<double>(p.weights().begin(), p.weights().end()); };
  EXPECT_EQ(w(latent_to_patch_attention(with_attention({{0.5, 0.5}}))), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(w(latent_to_patch_attention(with_attention({{1, 0}, {0, 1}}))), (std::vector<double>{0.5, 0.5}));
  const auto p = latent_to_patch_attention(with_attention({{0.8, 0.2}, {0.4, 0.6}}));
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.4, 1e-15);
  EXPECT_THROW(latent_to_patch_attention(EvaluationResult{}), Error);
}

TEST(Attention, ProfileIsValidForRandomRows) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::vector<double>> rows(3, std::vector<double>(6));
    for (auto& row : rows) {
      double s = 0;
      for (auto& x : row) s += (x = u(rng));
      for (auto& x : row) x /= s;
    }
    const auto p = latent_to_patch_attention(with_attention(rows));
    double s = 0;
    for (double x : p.weights()) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SampleCandidates, Examples) {
  AttentionProfile one_hot({0, 0, 0, 1, 0});
  auto rng = seeded_rng(0, "patches");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_candidates(one_hot, 1, rng), PatchSet({3}));
  EXPECT_TRUE(sample_candidates(one_hot, 0, rng).empty());
  EXPECT_EQ(sample_candidates(one_hot, 3, rng), PatchSet({3}));  // clamped to nonzero support
}

TEST(SampleCandidates, UniformInclusionFrequency) {
  AttentionProfile uniform(std::vector<double>(8, 0.125));
  auto rng = seeded_rng(1, "patches");
  std::vector<int> hits(8, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_candidates(uniform, 2, rng);
    ASSERT_EQ(s.size(), 2u);
    for (auto j : s.indices()) ++hits[j];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / draws, 0.25, 0.01);
}

TEST(SampleCandidates, NeverPicksZeroWeight) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rng = seeded_rng(2, "patches");
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> w(10);
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] = (i % 3 == 0) ? 0.0 : u(gen));
    for (auto& x : w) x /= s;
    const auto picked = sample_candidates(AttentionProfile(w), 4, rng);
    EXPECT_EQ(picked.size(), 4u);
    for (auto j : picked.indices()) EXPECT_GT(w[j], 0.0);
  }
}

TEST(UpdateBest, StrictImprovementOnly) {
  BestPatches best{PatchSet({1}), 0.5};
  EXPECT_EQ(update_best(PatchSet({2}), 0.5, best).patches, PatchSet({1}));
  EXPECT_EQ(update_best(PatchSet({2}), 0.6, best).patches, PatchSet({2}));
  const BestPatches fresh;
  EXPECT_EQ(update_best(PatchSet({7}), -1e300, fresh).patches, PatchSet({7}));
}

TEST(UpdateBest, FoldSelectsRunningMaximum) {
  BestPatches best;
  const std::vector<double> stream{0.2, 0.5, 0.3};
  for (std::size_t i = 0; i < stream.size(); ++i) best = update_best(PatchSet({i}), stream[i], best);
  EXPECT_EQ(best.patches, PatchSet({1}));
  EXPECT_EQ(best.reward, 0.5);
}

TEST(InjectPatches, Layout) {
  const std::vector<EmbeddingVector> prompt{scalar(100), scalar(101)};
  const std::vector<EmbeddingVector> latent{scalar(-1), scalar(-2)};
  const std::vector<EmbeddingVector> image{scalar(10), scalar(11), scalar(12)};

  const auto empty = inject_patches(prompt, latent, PatchSet{}, image);
  EXPECT_EQ(empty.sequence, (std::vector<EmbeddingVector>{scalar(100), scalar(101), scalar(-1), scalar(-2)}));
  EXPECT_EQ(empty.latent_positions, (std::vector<std::size_t>{2, 3}));

  const auto two = inject_patches(prompt, latent, PatchSet({2, 0}), image);
  EXPECT_EQ(two.sequence, (std::vector<EmbeddingVector>{scalar(100), scalar(101), scalar(10), scalar(12),
                                                        scalar(-1), scalar(-2)}));
  EXPECT_EQ(two.injected_positions, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(two.latent_positions, (std::vector<std::size_t>{4, 5}));
  EXPECT_THROW(inject_patches(prompt, latent, PatchSet({3}), image), Error);
}

}  // namespace
}  // namespace reason_iad
