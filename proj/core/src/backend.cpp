#include "reason_iad/backend.hpp"

#include <array>
#include <cmath>

namespace reason_iad {

namespace {

constexpr std::array<std::pair<Capability, std::string_view>, 4> kCapabilityNames = {{
    {Capability::kTextEncode, "text_encode"},
    {Capability::kImageEncode, "image_encode"},
    {Capability::kEvaluate, "evaluate"},
    {Capability::kGenerate, "generate"},
}};

}  // namespace

std::string_view to_string(Capability capability) {
  for (const auto& [c, name] : kCapabilityNames) {
    if (c == capability) return name;
  }
  return "unknown";
}

Capability parse_capability(std::string_view name) {
  for (const auto& [c, n] : kCapabilityNames) {
    if (n == name) return c;
  }
  throw Error("unknown capability '" + std::string(name) + "'");
}

std::vector<Capability> CapabilitySet::list() const {
  std::vector<Capability> out;
  for (const auto& [c, name] : kCapabilityNames) {
    if (has(c)) out.push_back(c);
  }
  return out;
}

std::string ModelBackend::generate(const GenerationRequest&) {
  throw BackendError(3, "backend does not support generate");
}

void validate_evaluation(const EvaluationRequest& request, const EvaluationResult& result) {
  const std::size_t m = request.latent_positions.size();
  if (result.per_token.size() != m) {
    throw Error("evaluation result: expected " + std::to_string(m) + " distributions, got " +
                std::to_string(result.per_token.size()));
  }
  if (result.latent_positions != request.latent_positions) {
    throw Error("evaluation result: latent positions do not match the request");
  }
  for (const auto& p : result.per_token) {
    if (p.size() != request.num_options) {
      throw Error("evaluation result: distribution has wrong option count");
    }
  }
  if (result.attention.empty()) return;
  if (result.attention.rows() != m || result.attention.cols() != request.patch_positions.size()) {
    throw Error("evaluation result: attention map has wrong shape");
  }
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (double w : result.attention.row(i)) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error("evaluation result: negative attention weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > AnswerDistribution::kSumTolerance) {
      throw Error("evaluation result: attention row does not sum to 1");
    }
  }
}

}  // namespace reason_iad
