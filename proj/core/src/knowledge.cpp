#include "reason_iad/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json_util.hpp"

namespace reason_iad {

namespace {

constexpr std::string_view kPreamble =
    "You are an expert industrial inspector responsible for analyzing product images. "
    "Your task is to determine whether the query image contains any defects and to answer "
    "the related questions. You should first perform the reasoning process internally and "
    "then provide the final answer. The following domain knowledge describes typical defect "
    "types and normal object characteristics: \n";

}  // namespace

KnowledgeRepository load_knowledge(const std::filesystem::path& path) {
  KnowledgeRepository repo;
  const auto lines = detail::split_lines(detail::read_file(path));
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (detail::is_blank(lines[n])) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto j = detail::json::parse(lines[n], nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(where + ": not a JSON object");
    if (!j.contains("label") || !j["label"].is_string()) throw Error(where + ": missing \"label\"");
    if (!j.contains("description") || !j["description"].is_string()) {
      throw Error(where + ": missing \"description\"");
    }
    KnowledgeEntry entry{j["label"].get<std::string>(), j["description"].get<std::string>(), {}};
    if (entry.label.empty() || entry.description.empty()) {
      throw Error(where + ": label and description must be non-empty");
    }
    repo.push_back(std::move(entry));
  }
  return repo;
}

void save_knowledge(const std::filesystem::path& path, const KnowledgeRepository& repo) {
  std::string out;
  for (const auto& e : repo) {
    detail::json j;
    j["label"] = e.label;
    j["description"] = e.description;
    out += j.dump() + "\n";
  }
  detail::write_file(path, out);
}

KnowledgeRepository embed_labels(KnowledgeRepository repo, ModelBackend& backend) {
  for (auto& entry : repo) {
    try {
      entry.label_embedding = backend.encode_text(entry.label);
    } catch (const BackendError& e) {
      throw BackendError(e.code(), "embedding label '" + entry.label + "': " + e.what());
    } catch (const std::exception& e) {
      throw Error("embedding label '" + entry.label + "': " + e.what());
    }
  }
  return repo;
}

double cosine_similarity(const EmbeddingVector& v, const EmbeddingVector& k) {
  if (v.dim() != k.dim()) throw Error("embedding dimension mismatch");
  const double nv = l2_norm(v.values());
  const double nk = l2_norm(k.values());
  if (nv == 0.0 || nk == 0.0) throw Error("degenerate embedding");
  return std::clamp(dot(v.values(), k.values()) / (nv * nk), -1.0, 1.0);
}

RetrievalResult retrieve_top_k(const EmbeddingVector& query, std::span<const KnowledgeEntry> repo,
                               std::size_t k) {
  if (repo.empty()) throw Error("empty knowledge repository");
  if (k < 1) throw Error("top-k must be >= 1");
  std::vector<double> scores(repo.size());
  for (std::size_t i = 0; i < repo.size(); ++i) {
    if (!repo[i].label_embedding) {
      throw Error("knowledge entry '" + repo[i].label + "' has no label embedding");
    }
    scores[i] = cosine_similarity(query, *repo[i].label_embedding);
  }
  std::vector<std::size_t> order(repo.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, repo.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  RetrievalResult result;
  result.k = k;
  for (std::size_t r = 0; r < take; ++r) {
    const std::size_t i = order[r];
    result.ranked.push_back({i, repo[i], scores[i]});
  }
  return result;
}

std::string_view prompt_preamble() { return kPreamble; }

std::string assemble_prompt(const QueryInstance& instance, const RetrievalResult& retrieved) {
  std::string prompt(kPreamble);
  for (std::size_t r = 0; r < retrieved.ranked.size(); ++r) {
    if (r > 0) prompt += "\n";
    prompt += "Category: " + retrieved.ranked[r].entry.label + "\n";
    prompt += retrieved.ranked[r].entry.description;
  }
  prompt += ".\n";
  if (instance.reference_image) {
    prompt +=
        "Image 1 is a normal reference image of the same product. "
        "Image 2 is the query image.\n";
  } else {
    prompt += "The image is the query image.\n";
  }
  prompt += "Question: " + instance.question + "\n";
  for (std::size_t i = 0; i < instance.options.size(); ++i) {
    prompt += option_letter(i) + ". " + instance.options[i] + "\n";
  }
  prompt += "Answer with the option letter.";
  return prompt;
}

}  // namespace reason_iad
