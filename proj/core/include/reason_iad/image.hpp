#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reason_iad/embedding.hpp"

namespace reason_iad {

// Explicit patch features plus a pooled whole-image embedding. Stands in for
// a decoded image in the toy backend.
struct ToyImageSpec {
  EmbeddingVector pooled;
  std::vector<EmbeddingVector> patches;

  // At least one patch; all vectors share the pooled dimension.
  void validate() const;
  bool operator==(const ToyImageSpec&) const = default;
};

ToyImageSpec load_toy_image(const std::filesystem::path& path);
void save_toy_image(const std::filesystem::path& path, const ToyImageSpec& spec);

// Opaque image reference. Backends resolve it; the engine never decodes pixels.
struct ImageRef {
  std::string path;
  std::optional<ToyImageSpec> inline_spec;

  bool operator==(const ImageRef&) const = default;
};

}  // namespace reason_iad
