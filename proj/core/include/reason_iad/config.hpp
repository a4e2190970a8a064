#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace reason_iad {

enum class Setting { kOneShot, kZeroShot };

std::string_view to_string(Setting setting);
Setting parse_setting(std::string_view text);

// How per-token entropy enters the reward.
//   kNormalized: H(p) / ln(C), keeps the reward in [0, 1] for any C.
//   kRawNats:    H(p) in nats, the literal form; negative rewards possible for C > 2.
enum class EntropyMode { kNormalized, kRawNats };

struct Config {
  std::size_t latent_tokens = 4;   // m
  std::size_t iterations = 10;     // N_iter
  double learning_rate = 1e-3;     // eta
  double sigma_fraction = 0.10;    // sigma = sigma_fraction * rms(Z)
  std::size_t top_k = 2;
  std::size_t patches = 4;         // t, candidate patches per trial
  std::uint64_t seed = 0;
  Setting setting = Setting::kOneShot;

  // Std-dev of the initial jitter, relative to the neutral token's rms entry.
  double init_jitter = 0.01;
  EntropyMode entropy_mode = EntropyMode::kNormalized;
  // Evaluate Z + xi and Z - xi and use the symmetric difference estimator.
  bool antithetic = false;
  // Inner candidate-patch trials per iteration; unset means latent_tokens.
  std::optional<std::size_t> inner_trials;

  std::size_t effective_inner_trials() const { return inner_trials.value_or(latent_tokens); }

  // Throws reason_iad::Error naming the first violated bound.
  void validate() const;
};

}  // namespace reason_iad
