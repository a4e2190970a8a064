#include "reason_iad/latent.hpp"

#include <algorithm>
#include <cmath>

namespace reason_iad {

LatentTokens init_latent_tokens(std::size_t m, ModelBackend& backend, RandomStream& rng,
                                double jitter_scale) {
  if (m < 1) throw Error("latent token count must be >= 1");
  const EmbeddingVector neutral = backend.neutral_token_embedding();
  const double stddev = jitter_scale * root_mean_square(std::span(&neutral, 1));
  LatentTokens tokens;
  tokens.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> z = neutral.data();
    if (stddev > 0.0) {
      for (double& x : z) x += rng.normal(0.0, stddev);
    }
    tokens.emplace_back(std::move(z));
  }
  return tokens;
}

double sigma_from_fraction(std::span<const EmbeddingVector> tokens, double sigma_frac) {
  if (tokens.empty()) throw Error("latent state has no tokens");
  const double rms = root_mean_square(tokens);
  if (!(rms > 0.0)) throw Error("degenerate latent state");
  return sigma_frac * rms;
}

Perturbation perturb(std::span<const EmbeddingVector> tokens, double sigma, RandomStream& rng) {
  if (!(sigma >= 0.0)) throw Error("perturbation scale must be >= 0");
  const Matrix base = Matrix::from_rows(tokens);
  Perturbation out{{}, Matrix(base.rows(), base.cols())};
  out.perturbed.reserve(tokens.size());
  for (std::size_t i = 0; i < base.rows(); ++i) {
    std::vector<double> z(base.cols());
    for (std::size_t k = 0; k < base.cols(); ++k) {
      const double xi = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
      out.noise(i, k) = xi;
      z[k] = base(i, k) + xi;
    }
    out.perturbed.emplace_back(std::move(z));
  }
  return out;
}

double entropy_nats(const AnswerDistribution& p) {
  double h = 0.0;
  for (double x : p.probs()) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double normalized_entropy(const AnswerDistribution& p) {
  const double h = entropy_nats(p) / std::log(static_cast<double>(p.size()));
  return std::clamp(h, 0.0, 1.0);
}

double token_entropy(const AnswerDistribution& p, EntropyMode mode) {
  return mode == EntropyMode::kNormalized ? normalized_entropy(p) : entropy_nats(p);
}

double reward(std::span<const AnswerDistribution> per_token, EntropyMode mode) {
  if (per_token.empty()) throw Error("reward needs at least one latent token");
  double sum = 0.0;
  for (const auto& p : per_token) sum += token_entropy(p, mode);
  return 1.0 - sum / static_cast<double>(per_token.size());
}

Matrix estimate_gradient(double reward_value, const Matrix& noise, double sigma) {
  if (sigma == 0.0) throw Error("zero perturbation scale");
  Matrix grad(noise.rows(), noise.cols());
  const double factor = reward_value / (sigma * sigma);
  auto src = noise.flat();
  auto dst = grad.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = factor * src[i];
  return grad;
}

LatentTokens apply_update(std::span<const EmbeddingVector> tokens, const Matrix& gradient,
                          double eta) {
  if (gradient.rows() != tokens.size() ||
      (!tokens.empty() && gradient.cols() != tokens.front().dim())) {
    throw Error("gradient shape does not match latent tokens");
  }
  for (double g : gradient.flat()) {
    if (!std::isfinite(g)) throw Error("divergent update");
  }
  LatentTokens out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<double> z = tokens[i].data();
    for (std::size_t k = 0; k < z.size(); ++k) {
      z[k] += eta * gradient(i, k);
      if (!std::isfinite(z[k])) throw Error("divergent update");
    }
    out.emplace_back(std::move(z));
  }
  return out;
}

std::pair<std::size_t, AnswerDistribution> finalize_answer(const EvaluationResult& final_eval) {
  if (final_eval.per_token.empty()) throw Error("final evaluation has no latent tokens");
  std::vector<double> mean(final_eval.per_token.front().size(), 0.0);
  for (const auto& p : final_eval.per_token) {
    if (p.size() != mean.size()) throw Error("per-token distributions disagree on option count");
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += p[j];
  }
  const double m = static_cast<double>(final_eval.per_token.size());
  for (double& x : mean) x /= m;
  auto dist = AnswerDistribution::normalized(std::move(mean));
  const std::size_t answer = dist.argmax();
  return {answer, std::move(dist)};
}

}  // namespace reason_iad
