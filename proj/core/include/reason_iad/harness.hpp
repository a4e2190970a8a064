#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reason_iad/backend.hpp"
#include "reason_iad/config.hpp"
#include "reason_iad/knowledge.hpp"
#include "reason_iad/query.hpp"

namespace reason_iad {

// ---- Dataset ---------------------------------------------------------------
//
// One JSON object per line with keys "instance_id", "image",
// "reference_image" (optional), "question", "options", "gold" (optional,
// option letter), "subtask" and "dataset" (optional). Relative image paths
// resolve against base_dir.

QueryInstance parse_instance(std::string_view line, std::size_t line_number,
                             const std::filesystem::path& base_dir = {});
std::string serialize_instance(const QueryInstance& instance);

// Blank lines are skipped; errors carry "<path>:<line>".
std::vector<QueryInstance> load_dataset(const std::filesystem::path& path);

// ---- Metrics ---------------------------------------------------------------

struct Prediction {
  QueryInstance instance;
  std::size_t predicted;
};

// Dataset line plus "predicted" (option letter).
std::string serialize_prediction(const Prediction& prediction);
std::vector<Prediction> load_results(const std::filesystem::path& path);

// Anomaly discrimination scored with anomalous samples as the positive
// class. An option counts as "anomalous" when its text starts with "yes"
// (case-insensitive). Zero-denominator ratios are reported as 0 and named in
// `undefined`.
struct DiscriminationMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::vector<std::string> undefined;

  bool operator==(const DiscriminationMetrics&) const = default;
};

struct RewardSummary {
  double initial = 0.0;
  double final = 0.0;
  double best = 0.0;
  std::size_t iterations = 0;

  bool operator==(const RewardSummary&) const = default;
};

struct InstanceSummary {
  std::string instance_id;
  std::optional<std::size_t> predicted;
  std::optional<std::size_t> gold;
  RewardSummary reward;
  std::optional<std::string> error;

  bool operator==(const InstanceSummary&) const = default;
};

// All metric values are percentages rounded half-up to two decimals.
struct RunReport {
  std::map<std::string, double> per_subtask_accuracy;
  double macro_average = 0.0;
  DiscriminationMetrics discrimination;
  std::vector<InstanceSummary> per_instance;

  bool operator==(const RunReport&) const = default;
};

double round_percent(double percent);

// Unweighted mean of the given subtask accuracies (unrounded inputs expected).
double macro_average(std::span<const double> accuracies);

bool is_anomalous_option(std::string_view option_text);

// Throws Error listing the ids of any instance without a gold option.
RunReport compute_metrics(std::span<const Prediction> results);

std::string emit_report(const RunReport& report);
RunReport parse_report(std::string_view text);

// ---- Batch -----------------------------------------------------------------

struct BatchOutcome {
  RunReport report;
  std::vector<std::string> failed_ids;

  bool ok() const { return failed_ids.empty(); }
};

// Runs the engine on every instance with up to `jobs` workers and writes
//   <out_dir>/traces/<instance_id>.json   per-instance reward traces
//   <out_dir>/results.jsonl               dataset lines plus "predicted"
//   <out_dir>/report.json                 the RunReport
// Output is assembled in dataset order, so files are byte-identical for a
// fixed seed regardless of completion order. Metrics cover the labeled,
// successful instances; failures are recorded per instance and the run
// continues.
BatchOutcome run_batch(std::span<const QueryInstance> dataset,
                       std::span<const KnowledgeEntry> repo, ModelBackend& backend,
                       const Config& config, const std::filesystem::path& out_dir,
                       std::size_t jobs = 1);

}  // namespace reason_iad
