#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reason_iad/backend.hpp"
#include "reason_iad/config.hpp"
#include "reason_iad/injection.hpp"
#include "reason_iad/knowledge.hpp"
#include "reason_iad/latent.hpp"
#include "reason_iad/query.hpp"

namespace reason_iad {

struct TraceRecord {
  std::size_t iteration = 0;
  double reward = 0.0;                // R(Z') of the perturbed evaluation
  std::vector<double> entropies;      // per-token entropies of that evaluation
  double best_reward = 0.0;           // R_best after the inner patch trials
  PatchSet patch_indices;             // V_best after the inner patch trials

  bool operator==(const TraceRecord&) const = default;
};

struct RewardTrace {
  std::vector<TraceRecord> per_iteration;

  bool operator==(const RewardTrace&) const = default;
};

// Columnar JSON object with exactly the keys iteration, reward, best_reward,
// entropies, patch_indices; one array entry per iteration.
std::string export_trace(const RewardTrace& trace);
RewardTrace parse_trace(std::string_view text);
void write_trace(const std::filesystem::path& path, const RewardTrace& trace);

struct ReasoningResult {
  std::size_t final_answer;
  AnswerDistribution final_distribution;
  RewardTrace trace;
  PatchSet selected_patches;
  RetrievalResult retrieved_knowledge;
  std::string explanation;
  // Reward of the initial tokens with no injected patches, and of the final
  // tokens with the selected patches.
  double initial_reward;
  double final_reward;
  LatentTokens final_tokens;

  bool operator==(const ReasoningResult&) const = default;
};

// Raised when the backend fails mid-run. iteration() is 0 for failures
// before the first iteration.
class ReasoningError : public Error {
 public:
  ReasoningError(const std::string& message, std::size_t iteration, RewardTrace partial)
      : Error(message), iteration_(iteration), partial_trace_(std::move(partial)) {}
  std::size_t iteration() const { return iteration_; }
  const RewardTrace& partial_trace() const { return partial_trace_; }

 private:
  std::size_t iteration_;
  RewardTrace partial_trace_;
};

// Knowledge-guided dynamic latent reasoning for one instance:
//   encode the query image, score it against the category labels, retrieve
//   the top-k descriptions into the prompt; initialize Z; then for each
//   iteration perturb Z, score the perturbed state, take one policy-gradient
//   step on the unperturbed Z, and run the inner candidate-patch trials that
//   maintain V_best / R_best. The answer comes from one final evaluation of
//   Z with V_best injected.
//
// Entries of `repo` without a label embedding are embedded through the
// backend first. In the zero-shot setting any reference image is ignored.
ReasoningResult run_reasoning(const QueryInstance& instance, std::span<const KnowledgeEntry> repo,
                              ModelBackend& backend, const Config& config);

}  // namespace reason_iad
