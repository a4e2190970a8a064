#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "reason_iad/backend.hpp"

namespace reason_iad {

// Sum of per-token pseudorandom unit vectors keyed by (seed, token hash),
// L2-normalized. Tokens are lower-cased whitespace-separated words.
// Throws Error("empty text") when there are no tokens.
EmbeddingVector toy_encode_text(std::string_view text, std::size_t dim, std::uint64_t seed);

// Identity image encoder: returns the spec's pooled vector and patches.
EncodedImage toy_encode_image(const ToyImageSpec& spec, std::size_t dim);

// Deterministic single-layer self-attention model used for desk-scale
// verification of the engine.
//
// For a sequence x_1..x_L and latent position i:
//   q_i = W_Q x_i,  k_j = W_K x_j,  v_j = W_V x_j
//   a_ij = softmax_j(q_i . k_j / sqrt(d))          (over all positions)
//   h_i  = sum_j a_ij v_j
//   P_i  = softmax(W_A h_i)                        (W_A: C x d)
// The reported attention row is a_ij restricted to the patch positions and
// renormalized. Answer-head rows are drawn per option index, so the head for
// C options is a prefix of the head for any larger C.
//
// Stateless after construction and safe for concurrent use.
class ToyBackend final : public ModelBackend {
 public:
  static constexpr std::string_view kNeutralText = "think";

  ToyBackend(std::size_t dim, std::uint64_t seed);

  CapabilitySet capabilities() const override;
  std::size_t dimension() const override { return dim_; }
  EmbeddingVector neutral_token_embedding() override;

  EmbeddingVector encode_text(std::string_view text) override;
  EncodedImage encode_image(const ImageRef& image) override;
  EvaluationResult evaluate(const EvaluationRequest& request) override;

  std::uint64_t seed() const { return seed_; }
  const Matrix& query_weights() const { return w_query_; }
  const Matrix& key_weights() const { return w_key_; }
  const Matrix& value_weights() const { return w_value_; }
  // C x d answer head.
  Matrix answer_head(std::size_t num_options) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  Matrix w_query_;
  Matrix w_key_;
  Matrix w_value_;
};

}  // namespace reason_iad
