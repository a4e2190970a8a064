#include "reason_iad/query.hpp"

#include <algorithm>
#include <cmath>

#include "reason_iad/error.hpp"

namespace reason_iad {

namespace {

constexpr std::array<std::string_view, 7> kSubtaskTags = {
    "anomaly_discrimination", "defect_classification", "defect_localization",
    "defect_description",     "defect_analysis",       "object_classification",
    "object_analysis",
};

}  // namespace

std::string_view to_string(Subtask subtask) {
  return kSubtaskTags[static_cast<std::size_t>(subtask)];
}

Subtask parse_subtask(std::string_view tag) {
  for (std::size_t i = 0; i < kSubtaskTags.size(); ++i) {
    if (kSubtaskTags[i] == tag) return kAllSubtasks[i];
  }
  throw Error("unknown subtask tag '" + std::string(tag) + "'");
}

std::size_t option_index_from_letter(std::string_view letter) {
  if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'Z') {
    throw Error("invalid option letter '" + std::string(letter) + "'");
  }
  return static_cast<std::size_t>(letter[0] - 'A');
}

std::string option_letter(std::size_t index) {
  if (index >= 26) throw Error("option index out of letter range");
  return std::string(1, static_cast<char>('A' + index));
}

void QueryInstance::validate() const {
  if (instance_id.empty()) throw Error("instance_id must be non-empty");
  if (options.size() < 2) {
    throw Error("instance '" + instance_id + "': at least two options required");
  }
  if (options.size() > 26) {
    throw Error("instance '" + instance_id + "': at most 26 options supported");
  }
  if (gold_option && *gold_option >= options.size()) {
    throw Error("instance '" + instance_id + "': gold option out of range");
  }
}

void QueryInstance::validate_for(Setting setting) const {
  validate();
  if (setting == Setting::kOneShot && !reference_image) {
    throw Error("instance '" + instance_id + "': one-shot setting requires a reference image");
  }
}

AnswerDistribution::AnswerDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw Error("answer distribution needs at least two options");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("answer probability outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) throw Error("answer distribution does not sum to 1");
}

AnswerDistribution AnswerDistribution::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("distribution weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw Error("distribution weights sum to zero");
  for (double& w : weights) w /= sum;
  return AnswerDistribution(std::move(weights));
}

std::size_t AnswerDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

}  // namespace reason_iad
