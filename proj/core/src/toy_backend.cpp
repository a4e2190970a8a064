#include "reason_iad/toy_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "reason_iad/random.hpp"

namespace reason_iad {

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, RandomStream rng) {
  Matrix m(rows, cols);
  for (double& x : m.flat()) x = rng.normal(0.0, stddev);
  return m;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

}  // namespace

EmbeddingVector toy_encode_text(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error("toy encoder dimension must be positive");
  std::vector<double> acc(dim, 0.0);
  bool any_token = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    if (end == pos) break;
    std::string token(text.substr(pos, end - pos));
    std::transform(token.begin(), token.end(), token.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto rng = seeded_rng(seed, "toy_token", token, 0);
    std::vector<double> u(dim);
    for (double& x : u) x = rng.normal();
    const double norm = l2_norm(u);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += u[i] / norm;
    any_token = true;
    pos = end;
  }
  if (!any_token) throw Error("empty text");
  const double norm = l2_norm(acc);
  if (!(norm > 0.0)) throw Error("degenerate text embedding");
  for (double& x : acc) x /= norm;
  return EmbeddingVector(std::move(acc));
}

EncodedImage toy_encode_image(const ToyImageSpec& spec, std::size_t dim) {
  spec.validate();
  if (spec.pooled.dim() != dim) {
    throw Error("toy image dimension " + std::to_string(spec.pooled.dim()) +
                " does not match backend dimension " + std::to_string(dim));
  }
  return {spec.pooled, spec.patches};
}

ToyBackend::ToyBackend(std::size_t dim, std::uint64_t seed)
    : dim_(dim),
      seed_(seed),
      w_query_(gaussian_matrix(dim, dim, 1.0 / std::sqrt(static_cast<double>(dim)),
                               seeded_rng(seed, "toy_w_query"))),
      w_key_(gaussian_matrix(dim, dim, 1.0 / std::sqrt(static_cast<double>(dim)),
                             seeded_rng(seed, "toy_w_key"))),
      w_value_(gaussian_matrix(dim, dim, 1.0 / std::sqrt(static_cast<double>(dim)),
                               seeded_rng(seed, "toy_w_value"))) {
  if (dim == 0) throw Error("toy backend dimension must be positive");
}

CapabilitySet ToyBackend::capabilities() const {
  return {Capability::kTextEncode, Capability::kImageEncode, Capability::kEvaluate};
}

EmbeddingVector ToyBackend::neutral_token_embedding() {
  return toy_encode_text(kNeutralText, dim_, seed_);
}

EmbeddingVector ToyBackend::encode_text(std::string_view text) {
  return toy_encode_text(text, dim_, seed_);
}

EncodedImage ToyBackend::encode_image(const ImageRef& image) {
  if (image.inline_spec) return toy_encode_image(*image.inline_spec, dim_);
  return toy_encode_image(load_toy_image(image.path), dim_);
}

Matrix ToyBackend::answer_head(std::size_t num_options) const {
  Matrix head(num_options, dim_);
  for (std::size_t c = 0; c < num_options; ++c) {
    auto rng = seeded_rng(seed_, "toy_answer_head", "", c);
    for (double& x : head.row(c)) x = rng.normal();
  }
  return head;
}

EvaluationResult ToyBackend::evaluate(const EvaluationRequest& request) {
  if (request.num_options < 2) throw Error("toy evaluate: need at least two options");
  const std::size_t length = request.sequence.size();
  for (const auto& x : request.sequence) {
    if (x.dim() != dim_) throw Error("toy evaluate: sequence dimension mismatch");
  }
  for (std::size_t p : request.latent_positions) {
    if (p >= length) throw Error("toy evaluate: latent position out of range");
  }
  for (std::size_t p : request.patch_positions) {
    if (p >= length) throw Error("toy evaluate: patch position out of range");
  }

  std::vector<std::vector<double>> keys(length), values(length);
  for (std::size_t j = 0; j < length; ++j) {
    keys[j] = multiply(w_key_, request.sequence[j].values());
    values[j] = multiply(w_value_, request.sequence[j].values());
  }
  const Matrix head = answer_head(request.num_options);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));

  EvaluationResult result;
  result.latent_positions = request.latent_positions;
  result.attention = Matrix(request.latent_positions.size(), request.patch_positions.size());
  for (std::size_t i = 0; i < request.latent_positions.size(); ++i) {
    const std::size_t pos = request.latent_positions[i];
    const auto query = multiply(w_query_, request.sequence[pos].values());
    std::vector<double> scores(length);
    for (std::size_t j = 0; j < length; ++j) scores[j] = dot(query, keys[j]) * scale;
    const auto weights = softmax(scores);

    std::vector<double> hidden(dim_, 0.0);
    for (std::size_t j = 0; j < length; ++j) {
      for (std::size_t k = 0; k < dim_; ++k) hidden[k] += weights[j] * values[j][k];
    }
    result.per_token.emplace_back(softmax(multiply(head, hidden)));

    double patch_mass = 0.0;
    for (std::size_t p : request.patch_positions) patch_mass += weights[p];
    auto row = result.attention.row(i);
    const auto patch_count = static_cast<double>(request.patch_positions.size());
    for (std::size_t c = 0; c < request.patch_positions.size(); ++c) {
      // Underflowed mass falls back to a uniform row.
      row[c] = patch_mass > 0.0 ? weights[request.patch_positions[c]] / patch_mass
                                : 1.0 / patch_count;
    }
  }
  return result;
}

}  // namespace reason_iad
