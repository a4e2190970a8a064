#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "reason_iad/embedding.hpp"
#include "reason_iad/error.hpp"
#include "reason_iad/image.hpp"
#include "reason_iad/query.hpp"

namespace reason_iad {

enum class Capability : std::uint8_t {
  kTextEncode = 1 << 0,
  kImageEncode = 1 << 1,
  kEvaluate = 1 << 2,
  kGenerate = 1 << 3,
};

std::string_view to_string(Capability capability);
Capability parse_capability(std::string_view name);

class CapabilitySet {
 public:
  CapabilitySet() = default;
  CapabilitySet(std::initializer_list<Capability> caps) {
    for (auto c : caps) insert(c);
  }
  void insert(Capability c) { bits_ |= static_cast<std::uint8_t>(c); }
  bool has(Capability c) const { return (bits_ & static_cast<std::uint8_t>(c)) != 0; }
  std::vector<Capability> list() const;
  bool operator==(const CapabilitySet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

struct EncodedImage {
  EmbeddingVector pooled;
  std::vector<EmbeddingVector> patches;
};

// One forward pass over an embedding sequence. The prompt text rides along
// for backends that tokenize natively; the toy backend reads only embeddings.
struct EvaluationRequest {
  std::string prompt_text;
  std::vector<EmbeddingVector> sequence;
  std::vector<std::size_t> latent_positions;
  std::vector<std::size_t> patch_positions;
  std::size_t num_options = 0;
};

struct EvaluationResult {
  // P_i at each latent position, in latent_positions order.
  std::vector<AnswerDistribution> per_token;
  // m x (number of patch positions); row i is latent token i's attention
  // over the image patches, renormalized. Empty when the backend reports none.
  Matrix attention;
  std::vector<std::size_t> latent_positions;

  bool operator==(const EvaluationResult&) const = default;
};

struct GenerationRequest {
  std::string prompt_text;
  std::vector<EmbeddingVector> sequence;
  std::size_t max_tokens = 256;
};

// Backend failure. Codes follow the wire protocol: 1 version mismatch,
// 2 malformed message, 3 unsupported method, 4 backend failure, 5 timeout.
class BackendError : public Error {
 public:
  BackendError(int code, const std::string& message) : Error(message), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

// The model pi_theta behind the engine. Implementations must tolerate
// interleaved evaluate calls from concurrent runs, or serialize internally.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual CapabilitySet capabilities() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector neutral_token_embedding() = 0;

  virtual EmbeddingVector encode_text(std::string_view text) = 0;
  virtual EncodedImage encode_image(const ImageRef& image) = 0;
  virtual EvaluationResult evaluate(const EvaluationRequest& request) = 0;
  // Default: unsupported (code 3).
  virtual std::string generate(const GenerationRequest& request);
};

// Throws Error when the result breaks the EvaluationResult invariants for
// this request: token count, distribution validity, attention row profiles.
void validate_evaluation(const EvaluationRequest& request, const EvaluationResult& result);

}  // namespace reason_iad
