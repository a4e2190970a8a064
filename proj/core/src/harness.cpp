#include "reason_iad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include "json_util.hpp"
#include "reason_iad/reasoning.hpp"

namespace reason_iad {

namespace {

using detail::json;

ImageRef parse_image(const json& j, const std::filesystem::path& base_dir, const std::string& where,
                     const char* key) {
  if (j.is_string()) {
    std::filesystem::path path = j.get<std::string>();
    if (path.empty()) throw Error(where + ": \"" + key + "\" must be non-empty");
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return {path.string(), std::nullopt};
  }
  if (j.is_object() && j.contains("pooled") && j.contains("patches") && j["patches"].is_array()) {
    std::vector<EmbeddingVector> patches;
    for (const auto& p : j["patches"]) patches.push_back(detail::to_embedding(p, key));
    ToyImageSpec spec{detail::to_embedding(j["pooled"], key), std::move(patches)};
    spec.validate();
    return {"", std::move(spec)};
  }
  throw Error(where + ": \"" + key + "\" must be a path or an inline image spec");
}

json image_to_json(const ImageRef& image) {
  if (!image.inline_spec || !image.path.empty()) return image.path;
  json j;
  j["pooled"] = detail::from_embedding(image.inline_spec->pooled);
  j["patches"] = json::array();
  for (const auto& p : image.inline_spec->patches) j["patches"].push_back(detail::from_embedding(p));
  return j;
}

json instance_to_json(const QueryInstance& instance) {
  json j;
  j["instance_id"] = instance.instance_id;
  j["image"] = image_to_json(instance.query_image);
  if (instance.reference_image) j["reference_image"] = image_to_json(*instance.reference_image);
  j["question"] = instance.question;
  j["options"] = instance.options;
  if (instance.gold_option) j["gold"] = option_letter(*instance.gold_option);
  j["subtask"] = std::string(to_string(instance.subtask));
  if (instance.dataset) j["dataset"] = *instance.dataset;
  return j;
}

QueryInstance instance_from_json(const json& j, const std::string& where,
                                 const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(where + ": not a JSON object");
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw Error(where + ": missing \"" + key + "\"");
    return j[key];
  };
  auto require_string = [&](const char* key) {
    const json& v = require(key);
    if (!v.is_string()) throw Error(where + ": \"" + key + "\" must be a string");
    return v.get<std::string>();
  };

  QueryInstance out;
  out.instance_id = require_string("instance_id");
  out.query_image = parse_image(require("image"), base_dir, where, "image");
  if (j.contains("reference_image") && !j["reference_image"].is_null()) {
    out.reference_image = parse_image(j["reference_image"], base_dir, where, "reference_image");
  }
  out.question = require_string("question");
  const json& options = require("options");
  if (!options.is_array()) throw Error(where + ": \"options\" must be a list");
  for (const auto& o : options) {
    if (!o.is_string()) throw Error(where + ": options must be strings");
    out.options.push_back(o.get<std::string>());
  }
  if (j.contains("gold") && !j["gold"].is_null()) {
    const json& gold = j["gold"];
    try {
      if (gold.is_string()) {
        out.gold_option = option_index_from_letter(gold.get<std::string>());
      } else if (gold.is_number_unsigned()) {
        out.gold_option = gold.get<std::size_t>();
      } else {
        throw Error("\"gold\" must be an option letter");
      }
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
  try {
    out.subtask = parse_subtask(require_string("subtask"));
    if (j.contains("dataset") && j["dataset"].is_string()) out.dataset = j["dataset"].get<std::string>();
    out.validate();
  } catch (const Error& e) {
    const std::string message = e.what();
    if (message.rfind(where, 0) == 0) throw;
    throw Error(where + ": " + message);
  }
  return out;
}

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trace_file_name(const std::string& instance_id) {
  std::string name;
  for (char c : instance_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    name += safe ? c : '_';
  }
  return name + ".json";
}

json optional_letter(const std::optional<std::size_t>& index) {
  return index ? json(option_letter(*index)) : json(nullptr);
}

std::optional<std::size_t> parse_optional_letter(const json& j) {
  if (j.is_null()) return std::nullopt;
  return option_index_from_letter(j.get<std::string>());
}

}  // namespace

QueryInstance parse_instance(std::string_view line, std::size_t line_number,
                             const std::filesystem::path& base_dir) {
  const std::string where = "line " + std::to_string(line_number);
  const auto j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(where + ": malformed JSON");
  return instance_from_json(j, where, base_dir);
}

std::string serialize_instance(const QueryInstance& instance) {
  return instance_to_json(instance).dump();
}

std::vector<QueryInstance> load_dataset(const std::filesystem::path& path) {
  std::vector<QueryInstance> out;
  const auto lines = detail::split_lines(detail::read_file(path));
  const auto base = path.parent_path();
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (detail::is_blank(lines[n])) continue;
    try {
      out.push_back(parse_instance(lines[n], n + 1, base));
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }
  return out;
}

std::string serialize_prediction(const Prediction& prediction) {
  json j = instance_to_json(prediction.instance);
  j["predicted"] = option_letter(prediction.predicted);
  return j.dump();
}

std::vector<Prediction> load_results(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  const auto lines = detail::split_lines(detail::read_file(path));
  const auto base = path.parent_path();
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (detail::is_blank(lines[n])) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto j = json::parse(lines[n], nullptr, false);
    if (j.is_discarded()) throw Error(where + ": malformed JSON");
    QueryInstance instance = instance_from_json(j, where, base);
    if (!j.contains("predicted") || !j["predicted"].is_string()) {
      throw Error(where + ": missing \"predicted\"");
    }
    const std::size_t predicted = option_index_from_letter(j["predicted"].get<std::string>());
    if (predicted >= instance.options.size()) throw Error(where + ": predicted option out of range");
    out.push_back({std::move(instance), predicted});
  }
  return out;
}

double round_percent(double percent) {
  // Half-up at two decimals; the epsilon absorbs binary representation error
  // of values like 66.665.
  return std::floor(percent * 100.0 + 0.5 + 1e-7) / 100.0;
}

double macro_average(std::span<const double> accuracies) {
  if (accuracies.empty()) return 0.0;
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  return sum / static_cast<double>(accuracies.size());
}

bool is_anomalous_option(std::string_view option_text) {
  const std::string text = lower(option_text);
  const auto start = text.find_first_not_of(" \t");
  return start != std::string::npos && text.compare(start, 3, "yes") == 0;
}

RunReport compute_metrics(std::span<const Prediction> results) {
  std::string missing;
  for (const auto& r : results) {
    if (!r.instance.gold_option) missing += (missing.empty() ? "" : ", ") + r.instance.instance_id;
  }
  if (!missing.empty()) throw Error("instances without gold answers: " + missing);

  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // correct, total
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  RunReport report;
  for (const auto& r : results) {
    const std::size_t gold = *r.instance.gold_option;
    auto& [correct, total] = counts[std::string(to_string(r.instance.subtask))];
    ++total;
    if (r.predicted == gold) ++correct;
    if (r.instance.subtask == Subtask::kAnomalyDiscrimination) {
      const bool actual = is_anomalous_option(r.instance.options[gold]);
      const bool predicted = is_anomalous_option(r.instance.options[r.predicted]);
      if (actual && predicted) ++tp;
      else if (!actual && predicted) ++fp;
      else if (actual && !predicted) ++fn;
      else ++tn;
    }
    report.per_instance.push_back({r.instance.instance_id, r.predicted, gold, {}, std::nullopt});
  }

  std::vector<double> accuracies;
  for (const auto& [subtask, c] : counts) {
    const double accuracy = 100.0 * static_cast<double>(c.first) / static_cast<double>(c.second);
    accuracies.push_back(accuracy);
    report.per_subtask_accuracy[subtask] = round_percent(accuracy);
  }
  report.macro_average = round_percent(macro_average(accuracies));

  DiscriminationMetrics& disc = report.discrimination;
  const std::size_t n = tp + fp + fn + tn;
  if (n > 0) {
    disc.accuracy = round_percent(100.0 * static_cast<double>(tp + tn) / static_cast<double>(n));
  } else {
    disc.undefined.push_back("accuracy");
  }
  double recall = 0.0, precision = 0.0;
  if (tp + fn > 0) {
    recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    disc.undefined.push_back("recall");
  }
  if (tp + fp > 0) {
    precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    disc.undefined.push_back("precision");
  }
  double f1 = 0.0;
  if (precision + recall > 0.0) {
    f1 = 2.0 * precision * recall / (precision + recall);
  } else {
    disc.undefined.push_back("f1");
  }
  disc.recall = round_percent(100.0 * recall);
  disc.precision = round_percent(100.0 * precision);
  disc.f1 = round_percent(100.0 * f1);
  return report;
}

std::string emit_report(const RunReport& report) {
  json j;
  j["per_subtask_accuracy"] = json::object();
  for (const auto& [subtask, accuracy] : report.per_subtask_accuracy) {
    j["per_subtask_accuracy"][subtask] = accuracy;
  }
  j["macro_average"] = report.macro_average;
  j["discrimination"] = {
      {"accuracy", report.discrimination.accuracy},
      {"recall", report.discrimination.recall},
      {"precision", report.discrimination.precision},
      {"f1", report.discrimination.f1},
      {"undefined", report.discrimination.undefined},
  };
  j["per_instance"] = json::array();
  for (const auto& s : report.per_instance) {
    j["per_instance"].push_back({
        {"instance_id", s.instance_id},
        {"predicted", optional_letter(s.predicted)},
        {"gold", optional_letter(s.gold)},
        {"reward",
         {{"initial", s.reward.initial},
          {"final", s.reward.final},
          {"best", s.reward.best},
          {"iterations", s.reward.iterations}}},
        {"error", s.error ? json(*s.error) : json(nullptr)},
    });
  }
  return j.dump(2) + "\n";
}

RunReport parse_report(std::string_view text) {
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("report: not a JSON object");
  try {
    RunReport report;
    for (const auto& [subtask, accuracy] : j.at("per_subtask_accuracy").items()) {
      report.per_subtask_accuracy[subtask] = accuracy.get<double>();
    }
    report.macro_average = j.at("macro_average").get<double>();
    const auto& d = j.at("discrimination");
    report.discrimination = {d.at("accuracy").get<double>(), d.at("recall").get<double>(),
                             d.at("precision").get<double>(), d.at("f1").get<double>(),
                             d.at("undefined").get<std::vector<std::string>>()};
    for (const auto& s : j.at("per_instance")) {
      InstanceSummary summary;
      summary.instance_id = s.at("instance_id").get<std::string>();
      summary.predicted = parse_optional_letter(s.at("predicted"));
      summary.gold = parse_optional_letter(s.at("gold"));
      const auto& r = s.at("reward");
      summary.reward = {r.at("initial").get<double>(), r.at("final").get<double>(),
                        r.at("best").get<double>(), r.at("iterations").get<std::size_t>()};
      if (!s.at("error").is_null()) summary.error = s.at("error").get<std::string>();
      report.per_instance.push_back(std::move(summary));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(std::string("report: ") + e.what());
  }
}

BatchOutcome run_batch(std::span<const QueryInstance> dataset,
                       std::span<const KnowledgeEntry> repo, ModelBackend& backend,
                       const Config& config, const std::filesystem::path& out_dir,
                       std::size_t jobs) {
  config.validate();
  std::filesystem::create_directories(out_dir / "traces");
  const KnowledgeRepository embedded =
      dataset.empty() ? KnowledgeRepository(repo.begin(), repo.end())
                      : embed_labels(KnowledgeRepository(repo.begin(), repo.end()), backend);

  struct Slot {
    std::optional<ReasoningResult> result;
    std::optional<std::string> error;
    RewardTrace partial;
  };
  std::vector<Slot> slots(dataset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        slots[i].result = run_reasoning(dataset[i], embedded, backend, config);
      } catch (const ReasoningError& e) {
        slots[i].error = e.what();
        slots[i].partial = e.partial_trace();
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(dataset.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  BatchOutcome outcome;
  std::vector<Prediction> labeled;
  std::string results_lines;
  std::vector<InstanceSummary> summaries;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const QueryInstance& instance = dataset[i];
    const Slot& slot = slots[i];
    InstanceSummary summary{instance.instance_id, std::nullopt, instance.gold_option, {}, slot.error};
    if (slot.result) {
      const ReasoningResult& r = *slot.result;
      summary.predicted = r.final_answer;
      const double best = r.trace.per_iteration.empty() ? r.final_reward
                                                         : r.trace.per_iteration.back().best_reward;
      summary.reward = {r.initial_reward, r.final_reward, best, r.trace.per_iteration.size()};
      write_trace(out_dir / "traces" / trace_file_name(instance.instance_id), r.trace);
      results_lines += serialize_prediction({instance, r.final_answer}) + "\n";
      if (instance.gold_option) labeled.push_back({instance, r.final_answer});
    } else {
      write_trace(out_dir / "traces" / trace_file_name(instance.instance_id), slot.partial);
      outcome.failed_ids.push_back(instance.instance_id);
    }
    summaries.push_back(std::move(summary));
  }

  outcome.report = compute_metrics(labeled);
  outcome.report.per_instance = std::move(summaries);
  detail::write_file(out_dir / "results.jsonl", results_lines);
  detail::write_file(out_dir / "report.json", emit_report(outcome.report));
  return outcome;
}

}  // namespace reason_iad
