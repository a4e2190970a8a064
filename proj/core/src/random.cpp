#include "reason_iad/random.hpp"

#include <array>

namespace reason_iad {

namespace {

std::array<std::uint32_t, 2> split(std::uint64_t v) {
  return {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)};
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RandomStream seeded_rng(std::uint64_t seed, std::string_view label) {
  const auto s = split(seed);
  const auto l = split(stable_hash(label));
  std::seed_seq seq{s[0], s[1], l[0], l[1]};
  return RandomStream(seq);
}

RandomStream seeded_rng(std::uint64_t seed, std::string_view label,
                        std::string_view instance_id, std::uint64_t iteration) {
  const auto s = split(seed);
  const auto l = split(stable_hash(label));
  const auto id = split(stable_hash(instance_id));
  const auto it = split(iteration);
  // Leading tag keeps these streams disjoint from the two-key overload.
  std::seed_seq seq{0x5eedu, s[0], s[1], l[0], l[1], id[0], id[1], it[0], it[1]};
  return RandomStream(seq);
}

}  // namespace reason_iad
