#include <gtest/gtest.h>

#include "reason_iad/config.hpp"
#include "reason_iad/error.hpp"
#include "reason_iad/random.hpp"

namespace reason_iad {
namespace {

std::vector<std::uint64_t> draws(RandomStream rng, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(rng());
  return out;
}

TEST(SeededRng, SameSeedAndLabelRepeat) {
  EXPECT_EQ(draws(seeded_rng(42, "perturb"), 100), draws(seeded_rng(42, "perturb"), 100));
}

TEST(SeededRng, LabelsAndSeedsSeparateStreams) {
  EXPECT_NE(seeded_rng(42, "perturb")(), seeded_rng(42, "patches")());
  EXPECT_NE(seeded_rng(42, "x")(), seeded_rng(43, "x")());
}

TEST(SeededRng, SubstreamsKeyedByInstanceAndIteration) {
  EXPECT_EQ(draws(seeded_rng(1, "perturb", "a", 3), 10), draws(seeded_rng(1, "perturb", "a", 3), 10));
  EXPECT_NE(seeded_rng(1, "perturb", "a", 3)(), seeded_rng(1, "perturb", "b", 3)());
  EXPECT_NE(seeded_rng(1, "perturb", "a", 3)(), seeded_rng(1, "perturb", "a", 4)());
  EXPECT_NE(seeded_rng(1, "perturb", "", 0)(), seeded_rng(1, "perturb")());
}

TEST(SeededRng, StableHashIsFnv1a) {
  EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Config, Defaults) {
  const Config c;
  EXPECT_EQ(c.latent_tokens, 4u);
  EXPECT_EQ(c.iterations, 10u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.sigma_fraction, 0.10);
  EXPECT_EQ(c.top_k, 2u);
  EXPECT_EQ(c.patches, 4u);
  EXPECT_EQ(c.setting, Setting::kOneShot);
  EXPECT_EQ(c.effective_inner_trials(), 4u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ValidateRejectsOutOfRange) {
  Config c;
  c.latent_tokens = 0;
  EXPECT_THROW(c.validate(), Error);
  c = Config{};
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), Error);
  c = Config{};
  c.sigma_fraction = -0.1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, SettingNames) {
  EXPECT_EQ(parse_setting("zero-shot"), Setting::kZeroShot);
  EXPECT_EQ(to_string(Setting::kOneShot), "one-shot");
  EXPECT_THROW(parse_setting("few-shot"), Error);
}

}  // namespace
}  // namespace reason_iad
