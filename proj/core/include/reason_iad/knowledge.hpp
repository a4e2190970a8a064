#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reason_iad/backend.hpp"
#include "reason_iad/embedding.hpp"
#include "reason_iad/query.hpp"

namespace reason_iad {

struct KnowledgeEntry {
  std::string label;
  std::string description;
  std::optional<EmbeddingVector> label_embedding;

  bool operator==(const KnowledgeEntry&) const = default;
};

using KnowledgeRepository = std::vector<KnowledgeEntry>;

// One JSON object per line with "label" and "description"; line order is the
// repository index. Blank lines are skipped. Errors name the line number.
KnowledgeRepository load_knowledge(const std::filesystem::path& path);
void save_knowledge(const std::filesystem::path& path, const KnowledgeRepository& repo);

// Fills every label_embedding through the backend text encoder, keeping
// order. Backend failures are rethrown with the entry label attached.
KnowledgeRepository embed_labels(KnowledgeRepository repo, ModelBackend& backend);

// v.k / (|v||k|), clamped to [-1, 1]. Throws "degenerate embedding" on a
// zero-norm input.
double cosine_similarity(const EmbeddingVector& v, const EmbeddingVector& k);

struct RetrievedEntry {
  std::size_t index;  // position in the repository
  KnowledgeEntry entry;
  double score;

  bool operator==(const RetrievedEntry&) const = default;
};

struct RetrievalResult {
  std::vector<RetrievedEntry> ranked;  // score non-increasing
  std::size_t k = 0;

  bool operator==(const RetrievalResult&) const = default;
};

// The min(k, |repo|) best-scoring entries. Ties go to the lower repository
// index. Throws "empty knowledge repository" for an empty repo.
RetrievalResult retrieve_top_k(const EmbeddingVector& query, std::span<const KnowledgeEntry> repo,
                               std::size_t k);

// Fixed inspector preamble that opens every prompt.
std::string_view prompt_preamble();

// Preamble with the retrieved descriptions in rank order (each prefixed by
// "Category: <label>\n"), then the image roles, the question and lettered
// options. The image roles follow the presence of a reference image.
std::string assemble_prompt(const QueryInstance& instance, const RetrievalResult& retrieved);

}  // namespace reason_iad
