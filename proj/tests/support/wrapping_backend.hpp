#pragma once

#include <atomic>
#include <optional>

#include "reason_iad/backend.hpp"

namespace reason_iad::testing {

// Forwards to an inner backend; can fail the n-th evaluate call, drop the
// attention map, or add a canned generate capability.
class WrappingBackend : public ModelBackend {
 public:
  explicit WrappingBackend(ModelBackend& inner) : inner_(inner) {}

  std::optional<std::size_t> fail_on_evaluate;  // 1-based call index
  bool drop_attention = false;
  std::optional<std::string> generated_text;

  std::size_t evaluate_calls() const { return calls_; }

  CapabilitySet capabilities() const override {
    CapabilitySet caps = inner_.capabilities();
    if (generated_text) caps.insert(Capability::kGenerate);
    return caps;
  }
  std::size_t dimension() const override { return inner_.dimension(); }
  EmbeddingVector neutral_token_embedding() override { return inner_.neutral_token_embedding(); }
  EmbeddingVector encode_text(std::string_view text) override { return inner_.encode_text(text); }
  EncodedImage encode_image(const ImageRef& image) override { return inner_.encode_image(image); }
  EvaluationResult evaluate(const EvaluationRequest& request) override {
    const std::size_t n = ++calls_;
    if (fail_on_evaluate && n == *fail_on_evaluate) throw BackendError(4, "injected failure");
    auto result = inner_.evaluate(request);
    if (drop_attention) result.attention = Matrix{};
    return result;
  }
  std::string generate(const GenerationRequest& request) override {
    if (!generated_text) return ModelBackend::generate(request);
    return *generated_text;
  }

 private:
  ModelBackend& inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace reason_iad::testing
