#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reason_iad/config.hpp"
#include "reason_iad/image.hpp"

namespace reason_iad {

enum class Subtask {
  kAnomalyDiscrimination,
  kDefectClassification,
  kDefectLocalization,
  kDefectDescription,
  kDefectAnalysis,
  kObjectClassification,
  kObjectAnalysis,
};

inline constexpr std::array<Subtask, 7> kAllSubtasks = {
    Subtask::kAnomalyDiscrimination, Subtask::kDefectClassification,
    Subtask::kDefectLocalization,    Subtask::kDefectDescription,
    Subtask::kDefectAnalysis,        Subtask::kObjectClassification,
    Subtask::kObjectAnalysis,
};

std::string_view to_string(Subtask subtask);
Subtask parse_subtask(std::string_view tag);

// "A" -> 0, "B" -> 1, ...
std::size_t option_index_from_letter(std::string_view letter);
std::string option_letter(std::size_t index);

struct QueryInstance {
  std::string instance_id;
  ImageRef query_image;
  std::optional<ImageRef> reference_image;
  std::string question;
  std::vector<std::string> options;
  std::optional<std::size_t> gold_option;
  Subtask subtask = Subtask::kAnomalyDiscrimination;
  std::optional<std::string> dataset;

  // At least two options; gold, when present, indexes one of them.
  void validate() const;
  // Additionally requires a reference image in the one-shot setting.
  void validate_for(Setting setting) const;

  bool operator==(const QueryInstance&) const = default;
};

// Probability vector over the C answer options, C >= 2.
class AnswerDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Throws unless every entry is in [0, 1] and the sum is 1 within kSumTolerance.
  explicit AnswerDistribution(std::vector<double> probs);

  // Divides non-negative weights by their sum.
  static AnswerDistribution normalized(std::vector<double> weights);

  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

  // Lowest index on ties.
  std::size_t argmax() const;

  bool operator==(const AnswerDistribution&) const = default;

 private:
  std::vector<double> probs_;
};

}  // namespace reason_iad
