#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "reason_iad/backend.hpp"
#include "reason_iad/embedding.hpp"
#include "reason_iad/random.hpp"

namespace reason_iad {

// Distinct patch indices into the query image's patch grid, kept in
// ascending order so equal sets compare equal.
class PatchSet {
 public:
  PatchSet() = default;
  // Sorts; throws Error on duplicates.
  explicit PatchSet(std::vector<std::size_t> indices);

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t index) const;

  bool operator==(const PatchSet&) const = default;

 private:
  std::vector<std::size_t> indices_;
};

// Probability mass over the image patches.
class AttentionProfile {
 public:
  explicit AttentionProfile(std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }

 private:
  std::vector<double> weights_;
};

// Mean of the latent tokens' patch-attention rows, renormalized.
// Throws Error("backend lacks attention capability") when the map is absent.
AttentionProfile latent_to_patch_attention(const EvaluationResult& eval);

// Sequential weighted sampling without replacement. t is clamped to the
// number of patches with nonzero weight; zero-weight patches are never drawn.
PatchSet sample_candidates(const AttentionProfile& profile, std::size_t t, RandomStream& rng);

struct BestPatches {
  PatchSet patches;
  double reward = -std::numeric_limits<double>::infinity();
};

// Replaces the best set only on strict improvement.
BestPatches update_best(const PatchSet& candidate, double candidate_reward, const BestPatches& best);

struct InjectedSequence {
  std::vector<EmbeddingVector> sequence;
  std::vector<std::size_t> injected_positions;
  std::vector<std::size_t> latent_positions;
};

// prompt embeddings, then the selected patches in index order, then the
// latent tokens. Length is |prompt| + |patches| + m.
InjectedSequence inject_patches(std::span<const EmbeddingVector> prompt_embeddings,
                                std::span<const EmbeddingVector> latent_tokens,
                                const PatchSet& patches,
                                std::span<const EmbeddingVector> image_patch_embeddings);

}  // namespace reason_iad
