#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "reason_iad/harness.hpp"
#include "reason_iad/knowledge.hpp"

namespace reason_iad::oracle {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Full stable sort by score descending, truncated to k.
inline std::vector<std::size_t> top_k_by_full_sort(const EmbeddingVector& query,
                                                   const KnowledgeRepository& repo, std::size_t k) {
  std::vector<std::size_t> order(repo.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> score(repo.size());
  for (std::size_t i = 0; i < repo.size(); ++i) {
    score[i] = cosine_similarity(query, *repo[i].label_embedding);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

inline double round2(double percent) { return std::floor(percent * 100.0 + 0.5 + 1e-7) / 100.0; }

// Counts-based metric oracle, computed straight from the definitions.
struct MetricsOracle {
  std::map<std::string, double> per_subtask;
  double macro = 0;
  double accuracy = 0, recall = 0, precision = 0, f1 = 0;
};

inline MetricsOracle brute_force_metrics(const std::vector<Prediction>& results) {
  std::map<std::string, std::pair<int, int>> counts;  // correct, total
  int tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& r : results) {
    const bool correct = r.predicted == *r.instance.gold_option;
    auto& c = counts[std::string(to_string(r.instance.subtask))];
    c.first += correct ? 1 : 0;
    c.second += 1;
    if (r.instance.subtask == Subtask::kAnomalyDiscrimination) {
      auto yes = [&](std::size_t i) {
        std::string t = r.instance.options[i];
        std::transform(t.begin(), t.end(), t.begin(), ::tolower);
        return t.rfind("yes", 0) == 0;
      };
      const bool truth = yes(*r.instance.gold_option);
      const bool said = yes(r.predicted);
      if (truth && said) ++tp;
      if (!truth && said) ++fp;
      if (truth && !said) ++fn;
      if (!truth && !said) ++tn;
    }
  }
  MetricsOracle o;
  double sum = 0;
  for (const auto& [name, c] : counts) {
    const double acc = 100.0 * c.first / c.second;
    o.per_subtask[name] = round2(acc);
    sum += acc;
  }
  o.macro = counts.empty() ? 0.0 : round2(sum / counts.size());
  const int n = tp + fp + fn + tn;
  o.accuracy = n ? round2(100.0 * (tp + tn) / n) : 0.0;
  const double r = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
  const double p = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
  o.recall = round2(100.0 * r);
  o.precision = round2(100.0 * p);
  o.f1 = (p + r) > 0 ? round2(100.0 * 2 * p * r / (p + r)) : 0.0;
  return o;
}

// Random labeled result set over all subtasks.
inline std::vector<Prediction> random_results(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 60);
  std::uniform_int_distribution<int> subtask(0, 6);
  std::vector<Prediction> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    QueryInstance q;
    q.instance_id = "r" + std::to_string(i);
    q.query_image = ImageRef{"x.json", std::nullopt};
    q.question = "q";
    q.subtask = kAllSubtasks[subtask(rng)];
    if (q.subtask == Subtask::kAnomalyDiscrimination) {
      q.options = (rng() & 1) ? std::vector<std::string>{"Yes", "No"}
                              : std::vector<std::string>{"No", "Yes"};
    } else {
      q.options = {"a", "b", "c", "d"};
    }
    std::uniform_int_distribution<std::size_t> pick(0, q.options.size() - 1);
    q.gold_option = pick(rng);
    out.push_back({q, pick(rng)});
  }
  return out;
}

}  // namespace reason_iad::oracle
