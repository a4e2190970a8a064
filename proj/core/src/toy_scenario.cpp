#include "reason_iad/toy_scenario.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/Dense>

#include "json_util.hpp"
#include "reason_iad/harness.hpp"
#include "reason_iad/random.hpp"

namespace reason_iad {

namespace {

struct Category {
  const char* label;
  const char* description;
};

constexpr std::array<Category, 6> kCategories = {{
    {"cable",
     "A normal cable cross-section shows three insulated wires in green, blue and grey arranged "
     "evenly. Typical defects are bent wires, cable swaps, cut insulation, missing wires and "
     "poked insulation"},
    {"capsule",
     "A normal capsule is a smooth two-tone shell with crisp black print. Typical defects are "
     "cracks, faulty imprints, pokes, scratches and squeezed shells"},
    {"screw",
     "A normal screw has a regular thread and an intact head. Typical defects are a "
     "manipulated front, scratched head, scratched neck and damaged thread tips"},
    {"bottle",
     "A normal bottle seen from above shows a clean circular rim and uniform interior. Typical "
     "defects are broken large or small pieces and contamination"},
    {"hazelnut",
     "A normal hazelnut has an unbroken brown shell with fine striations. Typical defects are "
     "cracks, cuts, holes and stray print"},
    {"transistor",
     "A normal transistor sits upright with three straight leads soldered in place. Typical "
     "defects are bent leads, cut leads, damaged cases and misplacement"},
}};

struct QuestionTemplate {
  const char* question;
  std::vector<std::string> options;
};

QuestionTemplate question_for(Subtask subtask, const std::string& label) {
  switch (subtask) {
    case Subtask::kAnomalyDiscrimination:
      return {"Is there any defect in the object?", {"Yes", "No"}};
    case Subtask::kDefectClassification:
      return {"What type of defect is present?", {"Scratch", "Crack", "Contamination", "Missing part"}};
    case Subtask::kDefectLocalization:
      return {"Where is the defect located?", {"Top left", "Top right", "Bottom left", "Bottom right"}};
    case Subtask::kDefectDescription:
      return {"How would you describe the defect?",
              {"A thin dark line", "A round bright spot", "A jagged edge", "A discolored area"}};
    case Subtask::kDefectAnalysis:
      return {"What is the likely impact of the defect?",
              {"Cosmetic only", "Reduced durability", "Functional failure", "Safety hazard"}};
    case Subtask::kObjectClassification:
      return {"What kind of object is shown?", {label, "gear", "bracket", "connector"}};
    case Subtask::kObjectAnalysis:
      return {"How many main components does the object have?", {"One", "Two", "Three", "Four"}};
  }
  return {"", {}};
}

EmbeddingVector random_patch(std::size_t dim, RandomStream& rng) {
  std::vector<double> v(dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return EmbeddingVector(std::move(v));
}

}  // namespace

EmbeddingVector derive_defect_patch(ToyBackend& backend, std::size_t correct_option,
                                    std::size_t num_options, double logit_gain,
                                    double attention_gain) {
  if (correct_option >= num_options) throw Error("correct option out of range");
  const std::size_t d = backend.dimension();
  if (d < num_options + 1) throw Error("toy dimension too small for the crafted scenario");

  auto to_eigen = [](const Matrix& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
    }
    return out;
  };
  const Eigen::MatrixXd head = to_eigen(backend.answer_head(num_options));
  const Eigen::MatrixXd w_query = to_eigen(backend.query_weights());
  const Eigen::MatrixXd w_key = to_eigen(backend.key_weights());
  const Eigen::MatrixXd w_value = to_eigen(backend.value_weights());
  const auto neutral_values = backend.neutral_token_embedding().data();
  const Eigen::VectorXd neutral =
      Eigen::Map<const Eigen::VectorXd>(neutral_values.data(), static_cast<Eigen::Index>(d));

  const auto c = static_cast<Eigen::Index>(num_options);
  Eigen::MatrixXd system(c + 1, static_cast<Eigen::Index>(d));
  system.topRows(c) = head * w_value;
  system.row(c) = (w_key.transpose() * (w_query * neutral)).transpose() /
                  std::sqrt(static_cast<double>(d));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(c + 1);
  rhs(static_cast<Eigen::Index>(correct_option)) = logit_gain;
  rhs(c) = attention_gain;

  const Eigen::VectorXd w = system.completeOrthogonalDecomposition().solve(rhs);
  return EmbeddingVector(std::vector<double>(w.data(), w.data() + w.size()));
}

CraftedSuite make_crafted_suite(ToyBackend& backend, const ScenarioOptions& options) {
  const std::size_t d = backend.dimension();
  auto rng = seeded_rng(options.seed, "toy_scenario");

  CraftedSuite suite;
  for (const auto& cat : kCategories) {
    suite.knowledge.push_back({cat.label, cat.description, {}});
  }

  for (std::size_t n = 0; n < options.num_instances; ++n) {
    const Category& category = kCategories[n % kCategories.size()];
    const Subtask subtask = kAllSubtasks[n % kAllSubtasks.size()];
    QuestionTemplate tmpl = question_for(subtask, category.label);
    const std::size_t num_options = tmpl.options.size();
    const std::size_t correct = static_cast<std::size_t>(rng() % num_options);
    const std::size_t defect = static_cast<std::size_t>(rng() % options.num_patches);

    std::vector<double> pooled = backend.encode_text(category.label).data();
    for (double& x : pooled) x += rng.normal(0.0, options.pooled_noise);

    std::vector<EmbeddingVector> query_patches, reference_patches;
    for (std::size_t p = 0; p < options.num_patches; ++p) {
      EmbeddingVector background = random_patch(d, rng);
      reference_patches.push_back(background);
      query_patches.push_back(p == defect ? derive_defect_patch(backend, correct, num_options,
                                                                options.logit_gain,
                                                                options.attention_gain)
                                          : background);
    }

    char id[32];
    std::snprintf(id, sizeof id, "toy-%03zu", n);
    QueryInstance instance;
    instance.instance_id = id;
    instance.query_image = {std::string("images/") + id + ".json",
                            ToyImageSpec{EmbeddingVector(pooled), std::move(query_patches)}};
    instance.reference_image = ImageRef{std::string("images/") + id + "_ref.json",
                                        ToyImageSpec{EmbeddingVector(pooled),
                                                     std::move(reference_patches)}};
    instance.question = tmpl.question;
    instance.options = std::move(tmpl.options);
    instance.gold_option = correct;
    instance.subtask = subtask;
    instance.dataset = "toy";
    suite.instances.push_back({std::move(instance), defect, correct});
  }
  return suite;
}

void save_crafted_suite(const CraftedSuite& suite, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  save_knowledge(dir / "knowledge.jsonl", suite.knowledge);
  std::string dataset;
  for (const auto& crafted : suite.instances) {
    QueryInstance instance = crafted.instance;
    save_toy_image(dir / instance.query_image.path, *instance.query_image.inline_spec);
    instance.query_image.inline_spec.reset();
    if (instance.reference_image) {
      save_toy_image(dir / instance.reference_image->path, *instance.reference_image->inline_spec);
      instance.reference_image->inline_spec.reset();
    }
    dataset += serialize_instance(instance) + "\n";
  }
  detail::write_file(dir / "dataset.jsonl", dataset);
}

}  // namespace reason_iad
