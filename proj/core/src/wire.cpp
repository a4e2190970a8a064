#include "reason_iad/wire.hpp"

#include <cmath>
#include <cstdlib>
#include <utility>

namespace reason_iad::wire {

namespace {

// Parameter decoding failures map to code 2.
[[noreturn]] void malformed(const std::string& message) {
  throw BackendError(kMalformedMessage, "malformed message: " + message);
}

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) malformed("expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) malformed(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::size_t size_value(const json& v, const char* what) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    malformed(std::string(what) + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> index_list(const json& v, const char* what) {
  if (!v.is_array()) malformed(std::string(what) + " must be a list");
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(size_value(e, what));
  return out;
}

int major_version(std::string_view version) {
  const auto dot = version.find('.');
  const std::string head(version.substr(0, dot));
  char* end = nullptr;
  const long major = std::strtol(head.c_str(), &end, 10);
  if (head.empty() || end != head.c_str() + head.size()) {
    malformed("unparseable version '" + std::string(version) + "'");
  }
  return static_cast<int>(major);
}

json image_spec_to_json(const ToyImageSpec& spec) {
  return {{"pooled", encode_tensor(spec.pooled)},
          {"patches", encode_tensor(std::span<const EmbeddingVector>(spec.patches))}};
}

ToyImageSpec image_spec_from_json(const json& j) {
  ToyImageSpec spec{decode_vector(field(j, "pooled")), decode_rows(field(j, "patches"))};
  spec.validate();
  return spec;
}

json error_response(const json& id, int code, const std::string& message) {
  return {{"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

// ---- Framing ---------------------------------------------------------------

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw Error("frame too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
  if (n > kMaxFrameBytes) throw Error("frame length " + std::to_string(n) + " exceeds limit");
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

// ---- Tensors ---------------------------------------------------------------

json encode_tensor(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}},
          {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
}

json encode_tensor(const EmbeddingVector& v) {
  return {{"shape", {v.dim()}}, {"data", v.data()}};
}

json encode_tensor(std::span<const EmbeddingVector> rows) {
  return encode_tensor(Matrix::from_rows(rows));
}

Matrix decode_matrix(const json& j) {
  const json& shape = field(j, "shape");
  const json& data = field(j, "data");
  if (!shape.is_array() || shape.empty() || shape.size() > 2) malformed("tensor shape must have rank 1 or 2");
  if (!data.is_array()) malformed("tensor data must be a list");
  const std::size_t rows = shape.size() == 2 ? size_value(shape[0], "tensor shape") : 1;
  const std::size_t cols = size_value(shape.back(), "tensor shape");
  if (data.size() != rows * cols) malformed("tensor data length does not match shape");
  Matrix m(rows, cols);
  auto flat = m.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!data[i].is_number()) malformed("tensor data must be numeric");
    flat[i] = data[i].get<double>();
    if (!std::isfinite(flat[i])) malformed("tensor data must be finite");
  }
  return m;
}

EmbeddingVector decode_vector(const json& j) {
  const json& shape = field(j, "shape");
  if (!shape.is_array() || shape.size() != 1) malformed("expected a rank-1 tensor");
  const Matrix m = decode_matrix(j);
  return EmbeddingVector(std::vector<double>(m.flat().begin(), m.flat().end()));
}

std::vector<EmbeddingVector> decode_rows(const json& j) {
  const json& shape = field(j, "shape");
  if (!shape.is_array() || shape.size() != 2) malformed("expected a rank-2 tensor");
  const Matrix m = decode_matrix(j);
  std::vector<EmbeddingVector> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out.emplace_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return out;
}

// ---- Evaluation payloads ---------------------------------------------------

json evaluation_request_to_json(const EvaluationRequest& request) {
  return {{"prompt_text", request.prompt_text},
          {"sequence", encode_tensor(std::span<const EmbeddingVector>(request.sequence))},
          {"latent_positions", request.latent_positions},
          {"patch_positions", request.patch_positions},
          {"num_options", request.num_options}};
}

EvaluationRequest evaluation_request_from_json(const json& j) {
  EvaluationRequest r;
  r.prompt_text = string_field(j, "prompt_text");
  r.sequence = decode_rows(field(j, "sequence"));
  r.latent_positions = index_list(field(j, "latent_positions"), "latent_positions");
  r.patch_positions = index_list(field(j, "patch_positions"), "patch_positions");
  r.num_options = size_value(field(j, "num_options"), "num_options");
  return r;
}

json evaluation_result_to_json(const EvaluationResult& result) {
  const std::size_t m = result.per_token.size();
  const std::size_t c = m == 0 ? 0 : result.per_token.front().size();
  Matrix dist(m, c);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < c; ++k) dist(i, k) = result.per_token[i][k];
  }
  return {{"distributions", encode_tensor(dist)},
          {"attention", encode_tensor(result.attention)},
          {"latent_positions", result.latent_positions}};
}

EvaluationResult evaluation_result_from_json(const json& j, const EvaluationRequest& request) {
  constexpr double kWireTolerance = 1e-6;
  auto check_row = [&](std::span<const double> row, const char* what) {
    double sum = 0.0;
    for (double v : row) {
      if (v < 0.0) throw Error(std::string("evaluate result: negative ") + what + " entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kWireTolerance) {
      throw Error(std::string("evaluate result: ") + what + " row sums to " + std::to_string(sum));
    }
    return std::abs(sum - 1.0) > AnswerDistribution::kSumTolerance;
  };

  const Matrix dist = decode_matrix(field(j, "distributions"));
  Matrix attention = decode_matrix(field(j, "attention"));
  EvaluationResult result;
  result.latent_positions = index_list(field(j, "latent_positions"), "latent_positions");
  if (dist.cols() != request.num_options) throw Error("evaluate result: wrong option count");
  for (std::size_t i = 0; i < dist.rows(); ++i) {
    std::vector<double> row(dist.row(i).begin(), dist.row(i).end());
    result.per_token.push_back(check_row(row, "distribution")
                                   ? AnswerDistribution::normalized(std::move(row))
                                   : AnswerDistribution(std::move(row)));
  }
  if (attention.empty()) throw Error("evaluate result: attention map is required");
  for (std::size_t i = 0; i < attention.rows(); ++i) {
    if (check_row(attention.row(i), "attention")) {
      double sum = 0.0;
      for (double v : attention.row(i)) sum += v;
      for (double& v : attention.row(i)) v /= sum;
    }
  }
  result.attention = std::move(attention);
  validate_evaluation(request, result);
  return result;
}

// ---- Server ----------------------------------------------------------------

Server::Server(ModelBackend& backend, std::string version)
    : backend_(backend), version_(std::move(version)) {}

std::string Server::handle(std::string_view payload) {
  json id = nullptr;
  json response;
  try {
    json request;
    try {
      request = json::parse(payload);
    } catch (const json::parse_error& e) {
      malformed(std::string("invalid JSON: ") + e.what());
    }
    if (!request.is_object()) malformed("payload must be an object");
    if (auto it = request.find("id"); it != request.end() && it->is_number_integer()) id = *it;
    if (request.size() != 3 || !request.contains("id") || !request.contains("method") ||
        !request.contains("params")) {
      malformed("request keys must be exactly id, method, params");
    }
    if (!request["id"].is_number_integer()) malformed("id must be an integer");
    if (!request["method"].is_string()) malformed("method must be a string");
    if (!request["params"].is_object()) malformed("params must be an object");
    const json result = dispatch(request["method"].get<std::string>(), request["params"]);
    response = {{"id", id}, {"result", result}};
  } catch (const BackendError& e) {
    response = error_response(id, e.code(), e.what());
  } catch (const std::exception& e) {
    response = error_response(id, kBackendFailure, e.what());
  }
  return response.dump();
}

json Server::dispatch(const std::string& method, const json& params) {
  if (method == "handshake") {
    const std::string client_version = string_field(params, "client_version");
    if (major_version(client_version) != major_version(version_)) {
      throw BackendError(kVersionMismatch,
                         "version mismatch: client " + client_version + ", server " + version_);
    }
    handshaken_ = true;
    json caps = json::array();
    for (auto c : backend_.capabilities().list()) caps.push_back(std::string(to_string(c)));
    json result = {{"server_version", version_},
                   {"capabilities", caps},
                   {"d", backend_.dimension()}};
    result["neutral_token"] = encode_tensor(backend_.neutral_token_embedding());
    return result;
  }

  const bool known = method == "encode_text" || method == "encode_image" || method == "evaluate" ||
                     method == "generate" || method == "shutdown";
  if (!known) throw BackendError(kUnsupportedMethod, "unsupported method '" + method + "'");
  if (!handshaken_) malformed("handshake required before '" + method + "'");

  if (method == "shutdown") {
    shutdown_ = true;
    return json::object();
  }

  const CapabilitySet caps = backend_.capabilities();
  auto require = [&](Capability c) {
    if (!caps.has(c)) {
      throw BackendError(kUnsupportedMethod, "backend lacks capability " + std::string(to_string(c)));
    }
  };
  auto guarded = [](auto&& fn) -> json {
    try {
      return fn();
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(kBackendFailure, e.what());
    }
  };

  if (method == "encode_text") {
    require(Capability::kTextEncode);
    const std::string text = string_field(params, "text");
    return guarded([&] { return json{{"embedding", encode_tensor(backend_.encode_text(text))}}; });
  }
  if (method == "encode_image") {
    require(Capability::kImageEncode);
    ImageRef ref{string_field(params, "path"), std::nullopt};
    if (auto it = params.find("spec"); it != params.end() && !it->is_null()) {
      ref.inline_spec = image_spec_from_json(*it);
    }
    return guarded([&] {
      const EncodedImage img = backend_.encode_image(ref);
      return json{{"pooled", encode_tensor(img.pooled)},
                  {"patches", encode_tensor(std::span<const EmbeddingVector>(img.patches))}};
    });
  }
  if (method == "evaluate") {
    require(Capability::kEvaluate);
    const EvaluationRequest request = evaluation_request_from_json(params);
    return guarded([&] { return evaluation_result_to_json(backend_.evaluate(request)); });
  }
  // generate
  require(Capability::kGenerate);
  GenerationRequest request;
  request.prompt_text = string_field(params, "prompt_text");
  request.sequence = decode_rows(field(params, "sequence"));
  if (params.contains("max_tokens")) request.max_tokens = size_value(params["max_tokens"], "max_tokens");
  return guarded([&] { return json{{"text", backend_.generate(request)}}; });
}

// ---- Loopback --------------------------------------------------------------

void LoopbackConnection::send_payload(std::string_view payload) {
  send_bytes(encode_frame(payload));
}

void LoopbackConnection::send_bytes(std::string_view bytes) {
  if (closed_) throw Error("connection closed");
  inbound_.feed(bytes);
  while (auto payload = inbound_.next()) {
    outbound_.feed(encode_frame(server_.handle(*payload)));
  }
}

std::string LoopbackConnection::receive_payload(std::chrono::milliseconds) {
  if (closed_) throw Error("connection closed");
  if (auto payload = outbound_.next()) return *payload;
  throw BackendError(kTimeout, "timed out waiting for response");
}

// ---- Client ----------------------------------------------------------------

Client::Client(std::unique_ptr<Connection> connection, std::chrono::milliseconds timeout)
    : connection_(std::move(connection)), timeout_(timeout) {
  if (!connection_) throw Error("client needs a connection");
}

Client::~Client() {
  try {
    shutdown();
  } catch (...) {
  }
}

json Client::call(std::string_view method, const json& params) {
  std::lock_guard lock(mutex_);
  return call_locked(method, params);
}

json Client::call_locked(std::string_view method, const json& params) {
  if (!connection_) throw Error("connection closed");
  const std::int64_t id = next_id_++;
  const json request = {{"id", id}, {"method", method}, {"params", params}};
  std::string payload;
  try {
    connection_->send_payload(request.dump());
    payload = connection_->receive_payload(timeout_);
  } catch (const BackendError& e) {
    // A late reply would desynchronize ids; drop the channel.
    if (e.code() == kTimeout) {
      connection_->close();
      connection_.reset();
    }
    throw;
  }
  json response;
  try {
    response = json::parse(payload);
  } catch (const json::parse_error& e) {
    throw BackendError(kMalformedMessage, std::string("malformed response: ") + e.what());
  }
  if (!response.is_object() || response.size() != 2 || !response.contains("id")) {
    throw BackendError(kMalformedMessage, "malformed response envelope");
  }
  if (response["id"] != json(id)) {
    throw BackendError(kMalformedMessage, "response id does not match request " + std::to_string(id));
  }
  if (auto it = response.find("error"); it != response.end()) {
    const json& err = *it;
    if (!err.is_object() || !err.contains("code") || !err["code"].is_number_integer()) {
      throw BackendError(kMalformedMessage, "malformed error object");
    }
    throw BackendError(err["code"].get<int>(), err.value("message", std::string("backend error")));
  }
  if (!response.contains("result")) throw BackendError(kMalformedMessage, "malformed response envelope");
  return response["result"];
}

HandshakeInfo Client::handshake(std::string_view client_version) {
  std::lock_guard lock(mutex_);
  const json result = call_locked("handshake", {{"client_version", client_version}});
  HandshakeInfo info;
  info.server_version = result.at("server_version").get<std::string>();
  for (const auto& c : result.at("capabilities")) {
    info.capabilities.insert(parse_capability(c.get<std::string>()));
  }
  info.dimension = result.at("d").get<std::size_t>();
  if (auto it = result.find("neutral_token"); it != result.end()) {
    info.neutral_token = decode_vector(*it);
    if (info.neutral_token->dim() != info.dimension) throw Error("handshake: neutral token dimension mismatch");
  }
  info_ = info;
  return info;
}

void Client::shutdown() {
  std::lock_guard lock(mutex_);
  if (!connection_) return;
  if (info_) {
    try {
      call_locked("shutdown", json::object());
    } catch (const std::exception&) {
    }
  }
  if (connection_) {
    connection_->close();
    connection_.reset();
  }
}

CapabilitySet Client::capabilities() const {
  std::lock_guard lock(mutex_);
  if (!info_) throw Error("handshake not completed");
  return info_->capabilities;
}

std::size_t Client::dimension() const {
  std::lock_guard lock(mutex_);
  if (!info_) throw Error("handshake not completed");
  return info_->dimension;
}

EmbeddingVector Client::neutral_token_embedding() {
  {
    std::lock_guard lock(mutex_);
    if (!info_) throw Error("handshake not completed");
    if (info_->neutral_token) return *info_->neutral_token;
  }
  return encode_text("think");
}

EmbeddingVector Client::encode_text(std::string_view text) {
  const json result = call("encode_text", {{"text", text}});
  EmbeddingVector v = decode_vector(result.at("embedding"));
  if (v.dim() != dimension()) throw Error("encode_text: dimension mismatch");
  return v;
}

EncodedImage Client::encode_image(const ImageRef& image) {
  json params = {{"path", image.path}};
  if (image.inline_spec) params["spec"] = image_spec_to_json(*image.inline_spec);
  const json result = call("encode_image", params);
  EncodedImage out{decode_vector(result.at("pooled")), decode_rows(result.at("patches"))};
  if (out.pooled.dim() != dimension()) throw Error("encode_image: dimension mismatch");
  return out;
}

EvaluationResult Client::evaluate(const EvaluationRequest& request) {
  return evaluation_result_from_json(call("evaluate", evaluation_request_to_json(request)), request);
}

std::string Client::generate(const GenerationRequest& request) {
  const json result =
      call("generate", {{"prompt_text", request.prompt_text},
                        {"sequence", encode_tensor(std::span<const EmbeddingVector>(request.sequence))},
                        {"max_tokens", request.max_tokens}});
  return result.at("text").get<std::string>();
}

std::unique_ptr<Client> connect_process(const std::string& command) {
  std::string cmd = command;
  if (cmd.empty()) {
    const char* env = std::getenv(std::string(kBackendCommandEnv).c_str());
    if (env == nullptr || *env == '\0') {
      throw Error(std::string(kBackendCommandEnv) + " is not set");
    }
    cmd = env;
  }
  auto client = std::make_unique<Client>(spawn_process(cmd));
  client->handshake();
  return client;
}

}  // namespace reason_iad::wire
