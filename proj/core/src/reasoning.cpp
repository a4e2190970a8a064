#include "reason_iad/reasoning.hpp"

#include <algorithm>
#include <cstdio>

#include "json_util.hpp"

namespace reason_iad {

namespace {

// Fixed inputs of one instance: the prompt segment (prompt text embedding,
// reference patches, query patches) and where the query patches sit in it.
class Episode {
 public:
  Episode(ModelBackend& backend, std::string prompt, std::vector<EmbeddingVector> prompt_segment,
          std::vector<std::size_t> patch_positions, std::vector<EmbeddingVector> image_patches,
          std::size_t num_options)
      : backend_(backend),
        prompt_(std::move(prompt)),
        prompt_segment_(std::move(prompt_segment)),
        patch_positions_(std::move(patch_positions)),
        image_patches_(std::move(image_patches)),
        num_options_(num_options) {}

  EvaluationResult evaluate(std::span<const EmbeddingVector> tokens, const PatchSet& patches) {
    auto injected = inject_patches(prompt_segment_, tokens, patches, image_patches_);
    EvaluationRequest request{prompt_, std::move(injected.sequence),
                              std::move(injected.latent_positions), patch_positions_,
                              num_options_};
    auto result = backend_.evaluate(request);
    validate_evaluation(request, result);
    return result;
  }

  std::string generate(std::span<const EmbeddingVector> tokens, const PatchSet& patches) {
    auto injected = inject_patches(prompt_segment_, tokens, patches, image_patches_);
    GenerationRequest request{prompt_ + "\nExplain your answer.", std::move(injected.sequence),
                              256};
    return backend_.generate(request);
  }

 private:
  ModelBackend& backend_;
  std::string prompt_;
  std::vector<EmbeddingVector> prompt_segment_;
  std::vector<std::size_t> patch_positions_;
  std::vector<EmbeddingVector> image_patches_;
  std::size_t num_options_;
};

std::vector<double> entropies_of(const EvaluationResult& eval, EntropyMode mode) {
  std::vector<double> out;
  out.reserve(eval.per_token.size());
  for (const auto& p : eval.per_token) out.push_back(token_entropy(p, mode));
  return out;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

std::string synthesize_explanation(const QueryInstance& instance, std::size_t answer,
                                   const AnswerDistribution& dist, const RetrievalResult& retrieved,
                                   const PatchSet& patches, double initial_reward,
                                   double final_reward, std::size_t iterations) {
  std::string text = "Answer " + option_letter(answer) + " (" + instance.options[answer] +
                     ") with probability " + format_number(dist[answer]) + ".";
  text += " Retrieved knowledge:";
  if (retrieved.ranked.empty()) text += " none";
  for (std::size_t r = 0; r < retrieved.ranked.size(); ++r) {
    text += (r == 0 ? " " : ", ") + retrieved.ranked[r].entry.label + " (similarity " +
            format_number(retrieved.ranked[r].score) + ")";
  }
  text += ". Visual evidence from patches:";
  if (patches.empty()) text += " none";
  for (std::size_t i = 0; i < patches.size(); ++i) {
    text += (i == 0 ? " " : ", ") + std::to_string(patches.indices()[i]);
  }
  text += ". Confidence reward " + format_number(initial_reward) + " -> " +
          format_number(final_reward) + " over " + std::to_string(iterations) + " iterations.";
  return text;
}

}  // namespace

std::string export_trace(const RewardTrace& trace) {
  using detail::json;
  json iteration = json::array(), reward = json::array(), best = json::array(),
       entropies = json::array(), patches = json::array();
  for (const auto& r : trace.per_iteration) {
    iteration.push_back(r.iteration);
    reward.push_back(r.reward);
    best.push_back(r.best_reward);
    entropies.push_back(r.entropies);
    patches.push_back(r.patch_indices.indices());
  }
  json j;
  j["iteration"] = std::move(iteration);
  j["reward"] = std::move(reward);
  j["best_reward"] = std::move(best);
  j["entropies"] = std::move(entropies);
  j["patch_indices"] = std::move(patches);
  return j.dump(2) + "\n";
}

RewardTrace parse_trace(std::string_view text) {
  const auto j = detail::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("trace: not a JSON object");
  for (const char* key : {"iteration", "reward", "best_reward", "entropies", "patch_indices"}) {
    if (!j.contains(key) || !j[key].is_array()) throw Error(std::string("trace: missing \"") + key + "\"");
  }
  const std::size_t n = j["iteration"].size();
  for (const char* key : {"reward", "best_reward", "entropies", "patch_indices"}) {
    if (j[key].size() != n) throw Error("trace: columns have different lengths");
  }
  RewardTrace trace;
  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.iteration = j["iteration"][i].get<std::size_t>();
    r.reward = j["reward"][i].get<double>();
    r.best_reward = j["best_reward"][i].get<double>();
    r.entropies = detail::to_doubles(j["entropies"][i], "entropies");
    r.patch_indices = PatchSet(j["patch_indices"][i].get<std::vector<std::size_t>>());
    trace.per_iteration.push_back(std::move(r));
  }
  return trace;
}

void write_trace(const std::filesystem::path& path, const RewardTrace& trace) {
  detail::write_file(path, export_trace(trace));
}

ReasoningResult run_reasoning(const QueryInstance& instance, std::span<const KnowledgeEntry> repo,
                              ModelBackend& backend, const Config& config) {
  config.validate();
  QueryInstance query = instance;
  if (config.setting == Setting::kZeroShot) query.reference_image.reset();
  query.validate_for(config.setting);
  if (!backend.capabilities().has(Capability::kEvaluate)) {
    throw Error("backend lacks the evaluate capability");
  }

  RewardTrace trace;
  std::size_t iteration = 0;
  try {
    // Knowledge retrieval and prompt.
    const EncodedImage image = backend.encode_image(query.query_image);
    const std::size_t d = backend.dimension();
    if (image.pooled.dim() != d) throw Error("image embedding dimension mismatch");

    KnowledgeRepository embedded(repo.begin(), repo.end());
    const bool needs_embedding = std::any_of(embedded.begin(), embedded.end(), [](const auto& e) {
      return !e.label_embedding.has_value();
    });
    if (needs_embedding) embedded = embed_labels(std::move(embedded), backend);
    RetrievalResult retrieved = retrieve_top_k(image.pooled, embedded, config.top_k);
    std::string prompt = assemble_prompt(query, retrieved);

    std::vector<EmbeddingVector> segment{backend.encode_text(prompt)};
    if (query.reference_image) {
      const EncodedImage reference = backend.encode_image(*query.reference_image);
      segment.insert(segment.end(), reference.patches.begin(), reference.patches.end());
    }
    std::vector<std::size_t> patch_positions;
    for (const auto& patch : image.patches) {
      patch_positions.push_back(segment.size());
      segment.push_back(patch);
    }
    Episode episode(backend, std::move(prompt), std::move(segment), std::move(patch_positions),
                    image.patches, query.options.size());

    auto init_rng = seeded_rng(config.seed, "init", query.instance_id, 0);
    LatentTokens tokens =
        init_latent_tokens(config.latent_tokens, backend, init_rng, config.init_jitter);
    const double initial_reward =
        reward(episode.evaluate(tokens, PatchSet{}).per_token, config.entropy_mode);

    BestPatches best;
    for (iteration = 1; iteration <= config.iterations; ++iteration) {
      auto perturb_rng = seeded_rng(config.seed, "perturb", query.instance_id, iteration);
      const double sigma = sigma_from_fraction(tokens, config.sigma_fraction);
      const Perturbation perturbation = perturb(tokens, sigma, perturb_rng);
      const EvaluationResult perturbed_eval = episode.evaluate(perturbation.perturbed, best.patches);
      const double perturbed_reward = reward(perturbed_eval.per_token, config.entropy_mode);

      if (sigma > 0.0) {
        double signal = perturbed_reward;
        if (config.antithetic) {
          LatentTokens mirrored;
          for (std::size_t i = 0; i < tokens.size(); ++i) {
            std::vector<double> z = tokens[i].data();
            for (std::size_t k = 0; k < z.size(); ++k) z[k] -= perturbation.noise(i, k);
            mirrored.emplace_back(std::move(z));
          }
          const double mirrored_reward =
              reward(episode.evaluate(mirrored, best.patches).per_token, config.entropy_mode);
          signal = 0.5 * (perturbed_reward - mirrored_reward);
        }
        tokens = apply_update(tokens, estimate_gradient(signal, perturbation.noise, sigma),
                              config.learning_rate);
      }

      // Candidate patches are drawn from the attention of the current
      // (updated, unperturbed) latent sequence.
      const AttentionProfile profile =
          latent_to_patch_attention(episode.evaluate(tokens, best.patches));
      auto patch_rng = seeded_rng(config.seed, "patches", query.instance_id, iteration);
      for (std::size_t trial = 0; trial < config.effective_inner_trials(); ++trial) {
        const PatchSet candidate = sample_candidates(profile, config.patches, patch_rng);
        const double candidate_reward =
            reward(episode.evaluate(tokens, candidate).per_token, config.entropy_mode);
        best = update_best(candidate, candidate_reward, best);
      }

      trace.per_iteration.push_back({iteration, perturbed_reward,
                                     entropies_of(perturbed_eval, config.entropy_mode),
                                     best.reward, best.patches});
    }
    iteration = config.iterations + 1;

    const EvaluationResult final_eval = episode.evaluate(tokens, best.patches);
    auto [answer, distribution] = finalize_answer(final_eval);
    const double final_reward = reward(final_eval.per_token, config.entropy_mode);

    std::string explanation;
    if (backend.capabilities().has(Capability::kGenerate)) {
      explanation = episode.generate(tokens, best.patches);
    } else {
      explanation = synthesize_explanation(query, answer, distribution, retrieved, best.patches,
                                           initial_reward, final_reward, config.iterations);
    }

    return ReasoningResult{answer,
                           std::move(distribution),
                           std::move(trace),
                           best.patches,
                           std::move(retrieved),
                           std::move(explanation),
                           initial_reward,
                           final_reward,
                           std::move(tokens)};
  } catch (const ReasoningError&) {
    throw;
  } catch (const std::exception& e) {
    const std::size_t at = std::min(iteration, config.iterations);
    throw ReasoningError("instance '" + query.instance_id + "' failed at iteration " +
                             std::to_string(at) + ": " + e.what(),
                         at, std::move(trace));
  }
}

}  // namespace reason_iad
