#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace reason_iad {

// Deterministic random stream. Satisfies UniformRandomBitGenerator so it can
// drive <random> distributions directly. Streams are per-consumer; never
// share one across threads.
class RandomStream {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit RandomStream(std::seed_seq& seq) : engine_(seq) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return mean + stddev * standard_normal_(engine_);
  }
  // Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> standard_normal_;
};

// 64-bit FNV-1a; stable across platforms and runs, unlike std::hash.
std::uint64_t stable_hash(std::string_view text);

// Identical (seed, label) pairs give identical streams; different labels give
// independent streams.
RandomStream seeded_rng(std::uint64_t seed, std::string_view label);

// Substream keyed additionally by instance and iteration so per-instance work
// is independent of dispatch order.
RandomStream seeded_rng(std::uint64_t seed, std::string_view label,
                        std::string_view instance_id, std::uint64_t iteration);

}  // namespace reason_iad
