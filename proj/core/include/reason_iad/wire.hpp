#pragma once

// Out-of-process backend bridge.
//
// Frame: 4-byte big-endian payload length, then a UTF-8 JSON payload that is
// exactly one of
//   {"id", "method", "params"}   request
//   {"id", "result"}             success
//   {"id", "error"}              failure, error = {"code", "message"}
// Tensors travel as {"shape": [...], "data": [flat numbers]}.
//
// Error codes: 1 version mismatch, 2 malformed message, 3 unsupported
// method, 4 backend failure, 5 timeout.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "reason_iad/backend.hpp"

namespace reason_iad::wire {

using nlohmann::json;

inline constexpr std::string_view kProtocolVersion = "1.0";
inline constexpr std::string_view kBackendCommandEnv = "REASON_IAD_BACKEND_CMD";
inline constexpr std::uint32_t kMaxFrameBytes = 256u << 20;

enum ErrorCode : int {
  kVersionMismatch = 1,
  kMalformedMessage = 2,
  kUnsupportedMethod = 3,
  kBackendFailure = 4,
  kTimeout = 5,
};

// ---- Framing ---------------------------------------------------------------

std::string encode_frame(std::string_view payload);

// Incremental decoder: feed raw bytes, pop complete payloads.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  // Throws Error when a length prefix exceeds kMaxFrameBytes.
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

// ---- Payload conversions ---------------------------------------------------

json encode_tensor(const Matrix& m);
json encode_tensor(const EmbeddingVector& v);
json encode_tensor(std::span<const EmbeddingVector> rows);
// Accepts rank-1 (as a 1 x n matrix) or rank-2 shapes.
Matrix decode_matrix(const json& j);
EmbeddingVector decode_vector(const json& j);
std::vector<EmbeddingVector> decode_rows(const json& j);

json evaluation_request_to_json(const EvaluationRequest& request);
EvaluationRequest evaluation_request_from_json(const json& j);
json evaluation_result_to_json(const EvaluationResult& result);

// Client-side decoding. Rows must sum to 1 within 1e-6; results are then
// checked against the EvaluationResult invariants for `request`. Attention
// is mandatory.
EvaluationResult evaluation_result_from_json(const json& j, const EvaluationRequest& request);

// ---- Server ----------------------------------------------------------------

// Turns request payloads into response payloads for a wrapped backend.
// Malformed payloads get a code-2 error and leave the server usable.
class Server {
 public:
  explicit Server(ModelBackend& backend, std::string version = std::string(kProtocolVersion));

  std::string handle(std::string_view payload);
  bool shutdown_requested() const { return shutdown_; }

 private:
  json dispatch(const std::string& method, const json& params);

  ModelBackend& backend_;
  std::string version_;
  bool handshaken_ = false;
  bool shutdown_ = false;
};

// Serves frames from in_fd, replying on out_fd, until shutdown or EOF.
void serve_fds(Server& server, int in_fd, int out_fd);
// Listens on a Unix-domain socket and serves connections one at a time
// until a shutdown request arrives.
void serve_unix_socket(Server& server, const std::string& socket_path);

// ---- Transport -------------------------------------------------------------

class Connection {
 public:
  virtual ~Connection() = default;
  // Sends one framed payload.
  virtual void send_payload(std::string_view payload) = 0;
  // Sends raw bytes unframed (conformance tests only).
  virtual void send_bytes(std::string_view bytes) = 0;
  // Next payload; BackendError(kTimeout) on timeout, Error on EOF.
  virtual std::string receive_payload(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

// Runs `command` under /bin/sh -c with its stdin/stdout as the channel.
std::unique_ptr<Connection> spawn_process(const std::string& command);
std::unique_ptr<Connection> connect_unix_socket(const std::string& socket_path);

// In-process channel that still passes every message through the framing.
class LoopbackConnection final : public Connection {
 public:
  explicit LoopbackConnection(Server& server) : server_(server) {}
  void send_payload(std::string_view payload) override;
  void send_bytes(std::string_view bytes) override;
  std::string receive_payload(std::chrono::milliseconds timeout) override;
  void close() override { closed_ = true; }

 private:
  Server& server_;
  FrameDecoder inbound_;
  FrameDecoder outbound_;
  bool closed_ = false;
};

// ---- Client ----------------------------------------------------------------

struct HandshakeInfo {
  std::string server_version;
  CapabilitySet capabilities;
  std::size_t dimension = 0;
  std::optional<EmbeddingVector> neutral_token;
};

// ModelBackend over a Connection. One request in flight at a time; calls
// from several threads are serialized.
class Client final : public ModelBackend {
 public:
  explicit Client(std::unique_ptr<Connection> connection,
                  std::chrono::milliseconds timeout = std::chrono::seconds(120));
  ~Client() override;

  // Must succeed before any other call.
  HandshakeInfo handshake(std::string_view client_version = kProtocolVersion);
  // Raw request/response; throws BackendError carrying the server's code.
  json call(std::string_view method, const json& params);
  void shutdown();
  bool is_open() const { return connection_ != nullptr; }

  CapabilitySet capabilities() const override;
  std::size_t dimension() const override;
  EmbeddingVector neutral_token_embedding() override;
  EmbeddingVector encode_text(std::string_view text) override;
  EncodedImage encode_image(const ImageRef& image) override;
  EvaluationResult evaluate(const EvaluationRequest& request) override;
  std::string generate(const GenerationRequest& request) override;

 private:
  json call_locked(std::string_view method, const json& params);

  std::unique_ptr<Connection> connection_;
  std::chrono::milliseconds timeout_;
  std::optional<HandshakeInfo> info_;
  std::int64_t next_id_ = 1;
  mutable std::mutex mutex_;
};

// Spawns the command named by REASON_IAD_BACKEND_CMD (or `command` when
// non-empty) and completes the handshake.
std::unique_ptr<Client> connect_process(const std::string& command = {});

// ---- Conformance -----------------------------------------------------------

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

// Exercises a backend command over fresh connections: handshake and version
// rules, malformed frames, unsupported methods, encode/evaluate payload
// validity and determinism, and shutdown.
std::vector<ConformanceCheck> run_conformance(const std::string& backend_command);

}  // namespace reason_iad::wire
