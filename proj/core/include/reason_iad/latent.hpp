#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "reason_iad/backend.hpp"
#include "reason_iad/config.hpp"
#include "reason_iad/embedding.hpp"
#include "reason_iad/random.hpp"

namespace reason_iad {

// Z = {z_1..z_m}, all of the backend's dimension.
using LatentTokens = std::vector<EmbeddingVector>;

// Neutral-token embedding plus N(0, (jitter_scale * rms(neutral))^2) jitter
// per entry.
LatentTokens init_latent_tokens(std::size_t m, ModelBackend& backend, RandomStream& rng,
                                double jitter_scale = 0.01);

// sigma_frac * rms over all token entries. Throws "degenerate latent state"
// when every entry is zero.
double sigma_from_fraction(std::span<const EmbeddingVector> tokens, double sigma_frac);

struct Perturbation {
  LatentTokens perturbed;  // Z' = Z + xi
  Matrix noise;            // xi, m x d, i.i.d. N(0, sigma^2)
};

Perturbation perturb(std::span<const EmbeddingVector> tokens, double sigma, RandomStream& rng);

// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy_nats(const AnswerDistribution& p);
// H(p) / ln(C), in [0, 1].
double normalized_entropy(const AnswerDistribution& p);

double token_entropy(const AnswerDistribution& p, EntropyMode mode);

// 1 - mean entropy across the latent tokens.
double reward(std::span<const AnswerDistribution> per_token,
              EntropyMode mode = EntropyMode::kNormalized);

// Single-sample estimate reward * xi / sigma^2. Throws "zero perturbation
// scale" for sigma == 0.
Matrix estimate_gradient(double reward_value, const Matrix& noise, double sigma);

// Z + eta * gradient. Throws "divergent update" on any non-finite gradient
// entry (or non-finite result).
LatentTokens apply_update(std::span<const EmbeddingVector> tokens, const Matrix& gradient,
                          double eta);

// Elementwise mean of the per-token distributions, renormalized; answer is
// the argmax with ties to the lowest index.
std::pair<std::size_t, AnswerDistribution> finalize_answer(const EvaluationResult& final_eval);

}  // namespace reason_iad
