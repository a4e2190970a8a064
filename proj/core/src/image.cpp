#include "reason_iad/image.hpp"

#include "json_util.hpp"

namespace reason_iad {

void ToyImageSpec::validate() const {
  if (patches.empty()) throw Error("toy image needs at least one patch");
  for (const auto& p : patches) {
    if (p.dim() != pooled.dim()) throw Error("toy image patch dimension mismatch");
  }
}

ToyImageSpec load_toy_image(const std::filesystem::path& path) {
  const auto j = detail::json::parse(detail::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("pooled") || !j.contains("patches") ||
      !j["patches"].is_array()) {
    throw Error("'" + path.string() + "': not a toy image spec");
  }
  std::vector<EmbeddingVector> patches;
  for (const auto& p : j["patches"]) patches.push_back(detail::to_embedding(p, "patches"));
  ToyImageSpec spec{detail::to_embedding(j["pooled"], "pooled"), std::move(patches)};
  spec.validate();
  return spec;
}

void save_toy_image(const std::filesystem::path& path, const ToyImageSpec& spec) {
  detail::json j;
  j["pooled"] = detail::from_embedding(spec.pooled);
  j["patches"] = detail::json::array();
  for (const auto& p : spec.patches) j["patches"].push_back(detail::from_embedding(p));
  detail::write_file(path, j.dump() + "\n");
}

}  // namespace reason_iad
