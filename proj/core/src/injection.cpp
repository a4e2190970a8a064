#include "reason_iad/injection.hpp"

#include <algorithm>
#include <cmath>

namespace reason_iad {

PatchSet::PatchSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw Error("patch set indices must be distinct");
  }
}

bool PatchSet::contains(std::size_t index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

AttentionProfile::AttentionProfile(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error("attention profile must cover at least one patch");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("attention weights must be finite and >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("attention profile does not sum to 1");
}

AttentionProfile latent_to_patch_attention(const EvaluationResult& eval) {
  const Matrix& att = eval.attention;
  if (att.empty() || att.rows() == 0 || att.cols() == 0) {
    throw Error("backend lacks attention capability");
  }
  std::vector<double> mean(att.cols(), 0.0);
  for (std::size_t i = 0; i < att.rows(); ++i) {
    for (std::size_t p = 0; p < att.cols(); ++p) mean[p] += att(i, p);
  }
  double sum = 0.0;
  for (double w : mean) sum += w;
  if (!(sum > 0.0)) throw Error("attention map carries no mass");
  for (double& w : mean) w /= sum;
  return AttentionProfile(std::move(mean));
}

PatchSet sample_candidates(const AttentionProfile& profile, std::size_t t, RandomStream& rng) {
  const auto weights = profile.weights();
  std::vector<bool> taken(weights.size(), false);
  const auto available = static_cast<std::size_t>(
      std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
  t = std::min(t, available);

  std::vector<std::size_t> chosen;
  chosen.reserve(t);
  while (chosen.size() < t) {
    double remaining = 0.0;
    for (std::size_t p = 0; p < weights.size(); ++p) {
      if (!taken[p]) remaining += weights[p];
    }
    const double target = rng.uniform() * remaining;
    double cumulative = 0.0;
    std::size_t pick = weights.size();
    std::size_t last_eligible = weights.size();
    for (std::size_t p = 0; p < weights.size(); ++p) {
      if (taken[p] || weights[p] <= 0.0) continue;
      last_eligible = p;
      cumulative += weights[p];
      if (target < cumulative) {
        pick = p;
        break;
      }
    }
    // Rounding can leave target at the very top of the range.
    if (pick == weights.size()) pick = last_eligible;
    taken[pick] = true;
    chosen.push_back(pick);
  }
  return PatchSet(std::move(chosen));
}

BestPatches update_best(const PatchSet& candidate, double candidate_reward, const BestPatches& best) {
  if (candidate_reward > best.reward) return {candidate, candidate_reward};
  return best;
}

InjectedSequence inject_patches(std::span<const EmbeddingVector> prompt_embeddings,
                                std::span<const EmbeddingVector> latent_tokens,
                                const PatchSet& patches,
                                std::span<const EmbeddingVector> image_patch_embeddings) {
  InjectedSequence out;
  out.sequence.reserve(prompt_embeddings.size() + patches.size() + latent_tokens.size());
  out.sequence.insert(out.sequence.end(), prompt_embeddings.begin(), prompt_embeddings.end());
  for (std::size_t index : patches.indices()) {
    if (index >= image_patch_embeddings.size()) throw Error("patch index out of range");
    out.injected_positions.push_back(out.sequence.size());
    out.sequence.push_back(image_patch_embeddings[index]);
  }
  for (const auto& z : latent_tokens) {
    out.latent_positions.push_back(out.sequence.size());
    out.sequence.push_back(z);
  }
  return out;
}

}  // namespace reason_iad
