#include <functional>
#include <random>

#include "reason_iad/wire.hpp"

namespace reason_iad::wire {

namespace {

constexpr auto kCallTimeout = std::chrono::seconds(60);

// Raw request/response over a bare connection, bypassing Client checks.
class RawSession {
 public:
  explicit RawSession(const std::string& command) : conn_(spawn_process(command)) {}

  json exchange(const json& request) {
    conn_->send_payload(request.dump());
    return json::parse(conn_->receive_payload(kCallTimeout));
  }
  json exchange_bytes(std::string_view frame) {
    conn_->send_bytes(frame);
    return json::parse(conn_->receive_payload(kCallTimeout));
  }
  json handshake() {
    return exchange({{"id", 0}, {"method", "handshake"}, {"params", {{"client_version", kProtocolVersion}}}});
  }
  Connection& connection() { return *conn_; }

 private:
  std::unique_ptr<Connection> conn_;
};

int error_code(const json& response) {
  if (!response.is_object() || !response.contains("error")) return 0;
  return response["error"].value("code", 0);
}

void expect(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

std::vector<EmbeddingVector> random_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<EmbeddingVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng);
    rows.emplace_back(std::move(v));
  }
  return rows;
}

EvaluationRequest probe_request(std::size_t d) {
  std::mt19937_64 rng(7);
  EvaluationRequest r;
  r.prompt_text = "Is there a defect in the query image?";
  r.sequence = random_rows(9, d, rng);
  r.patch_positions = {1, 2, 3, 4};
  r.latent_positions = {7, 8};
  r.num_options = 3;
  return r;
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(const std::string& backend_command) {
  std::vector<ConformanceCheck> checks;
  auto run = [&](const std::string& name, const std::function<void(ConformanceCheck&)>& body) {
    ConformanceCheck check{name, false, false, {}};
    try {
      body(check);
      check.passed = !check.skipped;
    } catch (const std::exception& e) {
      check.passed = false;
      check.detail = e.what();
    }
    checks.push_back(std::move(check));
  };
  auto client = [&] { return std::make_unique<Client>(spawn_process(backend_command), kCallTimeout); };

  HandshakeInfo info;
  run("handshake", [&](ConformanceCheck& c) {
    auto cl = client();
    info = cl->handshake();
    expect(info.server_version.rfind("1.", 0) == 0, "server major version is not 1");
    expect(info.capabilities.has(Capability::kEvaluate), "evaluate capability missing");
    expect(info.dimension > 0, "embedding dimension is zero");
    c.detail = "server " + info.server_version + ", d=" + std::to_string(info.dimension);
  });
  const bool have_handshake = info.dimension > 0;

  run("handshake_envelope", [&](ConformanceCheck&) {
    RawSession s(backend_command);
    const json r = s.handshake();
    expect(r.is_object() && r.size() == 2 && r.contains("id") && r.contains("result"),
           "response keys are not exactly id, result");
    expect(r["id"] == 0, "response id does not echo request id");
  });

  run("version_mismatch", [&](ConformanceCheck&) {
    auto cl = client();
    try {
      cl->handshake("2.0");
    } catch (const BackendError& e) {
      expect(e.code() == kVersionMismatch, "expected code 1, got " + std::to_string(e.code()));
      return;
    }
    throw Error("client 2.0 was accepted");
  });

  run("malformed_frame_recovers", [&](ConformanceCheck&) {
    RawSession s(backend_command);
    s.handshake();
    const json bad = s.exchange_bytes(encode_frame("{not json"));
    expect(error_code(bad) == kMalformedMessage, "expected code 2 for invalid JSON");
    const json bad_keys = s.exchange({{"id", 5}, {"method", "encode_text"}, {"params", json::object()}, {"x", 1}});
    expect(error_code(bad_keys) == kMalformedMessage, "expected code 2 for extra envelope keys");
    const json ok = s.exchange({{"id", 6}, {"method", "encode_text"}, {"params", {{"text", "scratch"}}}});
    expect(ok.contains("result") && ok["id"] == 6, "connection unusable after malformed frames");
  });

  run("handshake_required", [&](ConformanceCheck&) {
    RawSession s(backend_command);
    const json r = s.exchange({{"id", 1}, {"method", "encode_text"}, {"params", {{"text", "scratch"}}}});
    expect(error_code(r) == kMalformedMessage, "expected code 2 before handshake");
  });

  run("unsupported_method", [&](ConformanceCheck&) {
    RawSession s(backend_command);
    s.handshake();
    const json r = s.exchange({{"id", 2}, {"method", "frobnicate"}, {"params", json::object()}});
    expect(error_code(r) == kUnsupportedMethod, "expected code 3");
    expect(r["id"] == 2, "error id does not echo request id");
  });

  run("encode_text", [&](ConformanceCheck& c) {
    if (!have_handshake) throw Error("handshake failed");
    if (!info.capabilities.has(Capability::kTextEncode)) {
      c.skipped = true;
      return;
    }
    auto cl = client();
    cl->handshake();
    const EmbeddingVector a = cl->encode_text("scratch on the surface");
    const EmbeddingVector b = cl->encode_text("scratch on the surface");
    expect(a.dim() == info.dimension, "embedding dimension mismatch");
    expect(a == b, "encode_text is not deterministic");
  });

  run("encode_image_inline", [&](ConformanceCheck& c) {
    if (!have_handshake) throw Error("handshake failed");
    if (!info.capabilities.has(Capability::kImageEncode)) {
      c.skipped = true;
      return;
    }
    std::mt19937_64 rng(3);
    const auto rows = random_rows(5, info.dimension, rng);
    ToyImageSpec spec{rows.front(), {rows.begin() + 1, rows.end()}};
    auto cl = client();
    cl->handshake();
    const EncodedImage img = cl->encode_image(ImageRef{"inline", spec});
    expect(img.pooled.dim() == info.dimension, "pooled dimension mismatch");
    expect(!img.patches.empty(), "no patches returned");
    for (const auto& p : img.patches) expect(p.dim() == info.dimension, "patch dimension mismatch");
  });

  run("evaluate", [&](ConformanceCheck&) {
    if (!have_handshake) throw Error("handshake failed");
    auto cl = client();
    cl->handshake();
    const EvaluationRequest req = probe_request(info.dimension);
    const EvaluationResult a = cl->evaluate(req);
    const EvaluationResult b = cl->evaluate(req);
    expect(a == b, "evaluate is not deterministic");
  });

  run("evaluate_bad_shape", [&](ConformanceCheck&) {
    if (!have_handshake) throw Error("handshake failed");
    RawSession s(backend_command);
    s.handshake();
    json params = evaluation_request_to_json(probe_request(info.dimension));
    params["sequence"]["data"].erase(params["sequence"]["data"].size() - 1);
    const json r = s.exchange({{"id", 3}, {"method", "evaluate"}, {"params", params}});
    const int code = error_code(r);
    expect(code == kMalformedMessage || code == kBackendFailure, "expected code 2 or 4");
  });

  run("generate", [&](ConformanceCheck&) {
    if (!have_handshake) throw Error("handshake failed");
    auto cl = client();
    cl->handshake();
    GenerationRequest req{"Describe the defect.", probe_request(info.dimension).sequence, 16};
    if (info.capabilities.has(Capability::kGenerate)) {
      cl->generate(req);
      return;
    }
    try {
      cl->generate(req);
    } catch (const BackendError& e) {
      expect(e.code() == kUnsupportedMethod, "expected code 3 without generate capability");
      return;
    }
    throw Error("generate succeeded without the capability");
  });

  run("shutdown", [&](ConformanceCheck&) {
    RawSession s(backend_command);
    s.handshake();
    const json r = s.exchange({{"id", 9}, {"method", "shutdown"}, {"params", json::object()}});
    expect(r.contains("result") && r["id"] == 9, "shutdown not acknowledged");
    try {
      s.connection().send_payload(json{{"id", 10}, {"method", "encode_text"}, {"params", {{"text", "x"}}}}.dump());
      s.connection().receive_payload(std::chrono::seconds(5));
    } catch (const Error&) {
      return;
    }
    throw Error("server answered after shutdown");
  });

  return checks;
}

}  // namespace reason_iad::wire
