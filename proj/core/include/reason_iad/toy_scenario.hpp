#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "reason_iad/knowledge.hpp"
#include "reason_iad/query.hpp"
#include "reason_iad/toy_backend.hpp"

namespace reason_iad {

// Crafted instances for the toy backend: each query image carries one
// "defect" patch whose value, pushed through the backend's answer head,
// raises only the correct option's logit, and whose key is aligned with the
// neutral latent token's query so latent tokens attend to it.
struct ScenarioOptions {
  std::size_t num_instances = 10;
  std::size_t num_patches = 16;
  // Logit boost of the correct option per unit of attention on the defect patch.
  double logit_gain = 6.0;
  // Attention score of the neutral latent token's query against the defect key.
  double attention_gain = 2.0;
  // Per-entry noise added to the label embedding to form the pooled image embedding.
  double pooled_noise = 0.05;
  std::uint64_t seed = 0;
};

struct CraftedInstance {
  QueryInstance instance;  // images carried inline
  std::size_t defect_patch;
  std::size_t correct_option;
};

struct CraftedSuite {
  std::vector<CraftedInstance> instances;
  KnowledgeRepository knowledge;
};

// Minimum-norm w solving
//   (W_A W_V) w = logit_gain * e_correct     (C equations)
//   (W_Q n) . (W_K w) / sqrt(d) = attention_gain
// for the backend's seeded weights and neutral token n. Re-derived from the
// weights every call.
EmbeddingVector derive_defect_patch(ToyBackend& backend, std::size_t correct_option,
                                    std::size_t num_options, double logit_gain,
                                    double attention_gain);

CraftedSuite make_crafted_suite(ToyBackend& backend, const ScenarioOptions& options = {});

// Writes dataset.jsonl, knowledge.jsonl and images/<id>[_ref].json under dir;
// dataset image paths are relative to dir.
void save_crafted_suite(const CraftedSuite& suite, const std::filesystem::path& dir);

}  // namespace reason_iad
