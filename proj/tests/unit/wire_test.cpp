#include <gtest/gtest.h>

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "reason_iad/reasoning.hpp"
#include "reason_iad/toy_scenario.hpp"
#include "reason_iad/wire.hpp"

namespace reason_iad::wire {
namespace {

int code_of(const json& response) { return response.at("error").at("code").get<int>(); }

class LoopbackTest : public ::testing::Test {
 protected:
  ToyBackend backend_{8, 0};
  Server server_{backend_};
  std::unique_ptr<Client> client() {
    return std::make_unique<Client>(std::make_unique<LoopbackConnection>(server_));
  }
};

TEST(Framing, LengthPrefixIsBigEndian) {
  const std::string f = encode_frame("abc");
  EXPECT_EQ(f, std::string("\0\0\0\3abc", 7));
  EXPECT_EQ(encode_frame(std::string(258, 'x')).substr(0, 4), std::string("\0\0\1\2", 4));
}

TEST(Framing, DecoderHandlesSplitAndBatchedInput) {
  const std::string stream = encode_frame("first") + encode_frame("") + encode_frame("third!");
  FrameDecoder d;
  std::vector<std::string> got;
  for (char c : stream) {
    d.feed(std::string_view(&c, 1));
    while (auto p = d.next()) got.push_back(*p);
  }
  EXPECT_EQ(got, (std::vector<std::string>{"first", "", "third!"}));
  EXPECT_EQ(d.buffered(), 0u);

  FrameDecoder huge;
  huge.feed(std::string("\xff\xff\xff\xff", 4));
  EXPECT_THROW(huge.next(), Error);
}

TEST(Tensors, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<double> v{0.1, 1.0 / 3.0, -2.5e-308, 1e-300, 123456789.123456789, -0.0};
  for (int i = 0; i < 200; ++i) v.push_back(u(rng));
  const EmbeddingVector e(v);
  const json j = json::parse(encode_tensor(e).dump());
  const EmbeddingVector back = decode_vector(j);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(std::memcmp(&back.data()[i], &v[i], sizeof(double)), 0) << i;
  }
  EXPECT_THROW(decode_matrix(json{{"shape", {2, 2}}, {"data", {1, 2, 3}}}), BackendError);
  EXPECT_THROW(decode_vector(json{{"shape", {1, 2}}, {"data", {1, 2}}}), BackendError);
}

TEST_F(LoopbackTest, HandshakeReportsVersionCapabilitiesAndDimension) {
  auto c = client();
  const auto info = c->handshake("1.0");
  EXPECT_EQ(info.server_version, "1.0");
  EXPECT_EQ(info.dimension, 8u);
  EXPECT_TRUE(info.capabilities.has(Capability::kEvaluate));
  EXPECT_EQ(*info.neutral_token, backend_.neutral_token_embedding());
  EXPECT_NO_THROW(client()->handshake("1.7"));
}

TEST_F(LoopbackTest, MajorVersionMismatchIsCodeOne) {
  try {
    client()->handshake("2.0");
    FAIL() << "expected version mismatch";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), kVersionMismatch);
  }
}

TEST_F(LoopbackTest, MalformedFrameLeavesConnectionUsable) {
  LoopbackConnection conn(server_);
  conn.send_payload(R"({"id":0,"method":"handshake","params":{"client_version":"1.0"}})");
  conn.receive_payload(std::chrono::seconds(1));
  conn.send_payload("{garbage");
  const json bad = json::parse(conn.receive_payload(std::chrono::seconds(1)));
  EXPECT_EQ(code_of(bad), kMalformedMessage);
  EXPECT_TRUE(bad.at("id").is_null());
  conn.send_payload(R"({"id":1,"method":"encode_text","params":{}})");
  EXPECT_EQ(code_of(json::parse(conn.receive_payload(std::chrono::seconds(1)))), kMalformedMessage);
  conn.send_payload(R"({"id":2,"method":"encode_text","params":{"text":"ok"}})");
  const json ok = json::parse(conn.receive_payload(std::chrono::seconds(1)));
  EXPECT_EQ(ok.at("id"), 2);
  EXPECT_TRUE(ok.contains("result"));
}

TEST_F(LoopbackTest, UnsupportedMethodAndCapability) {
  auto c = client();
  c->handshake();
  try {
    c->call("frobnicate", json::object());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), kUnsupportedMethod);
  }
  try {
    c->generate(GenerationRequest{"p", {backend_.neutral_token_embedding()}, 4});
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), kUnsupportedMethod);
  }
}

TEST_F(LoopbackTest, BackendFailureCarriesMessage) {
  auto c = client();
  c->handshake();
  EvaluationRequest r;
  r.sequence = {backend_.neutral_token_embedding(), backend_.neutral_token_embedding()};
  r.latent_positions = {1};
  r.patch_positions = {0};
  r.num_options = 1;
  try {
    c->evaluate(r);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), kBackendFailure);
    EXPECT_NE(std::string(e.what()).find("option"), std::string::npos) << e.what();
  }
  try {
    c->encode_text("   ");
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), kBackendFailure);
    EXPECT_NE(std::string(e.what()).find("empty text"), std::string::npos);
  }
}

TEST_F(LoopbackTest, EncodeTextRoundTripIsBitIdentical) {
  auto c = client();
  c->handshake();
  EXPECT_EQ(c->encode_text("bent lead"), backend_.encode_text("bent lead"));
}

TEST_F(LoopbackTest, ShutdownClosesTheConnection) {
  auto c = client();
  c->handshake();
  c->shutdown();
  EXPECT_TRUE(server_.shutdown_requested());
  EXPECT_FALSE(c->is_open());
  EXPECT_THROW(c->encode_text("x"), Error);
}

TEST(ClientValidation, RejectsRowsThatDoNotSumToOne) {
  EvaluationRequest req;
  req.latent_positions = {3};
  req.patch_positions = {1, 2};
  req.num_options = 2;
  json payload = {{"distributions", {{"shape", {1, 2}}, {"data", {0.5, 0.4}}}},
                  {"attention", {{"shape", {1, 2}}, {"data", {0.5, 0.5}}}},
                  {"latent_positions", {3}}};
  EXPECT_THROW(evaluation_result_from_json(payload, req), Error);
  payload["distributions"]["data"] = {0.5, 0.5};
  payload["attention"]["data"] = {0.7, 0.7};
  EXPECT_THROW(evaluation_result_from_json(payload, req), Error);
  payload["attention"]["data"] = {0.3, 0.7 + 5e-7};
  const auto ok = evaluation_result_from_json(payload, req);
  EXPECT_NEAR(ok.attention(0, 0) + ok.attention(0, 1), 1.0, 1e-15);
  payload["latent_positions"] = {4};
  EXPECT_THROW(evaluation_result_from_json(payload, req), Error);
}

TEST(GoldenTranscript, ToyServerReproducesRecordedResponses) {
  const auto path = std::filesystem::path(REASON_IAD_TEST_DATA_DIR) / "golden_transcript.jsonl";
  std::ifstream in(path);
  ASSERT_TRUE(in) << path;
  ToyBackend backend(8, 0);
  Server server(backend);
  LoopbackConnection conn(server);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const json entry = json::parse(line);
    conn.send_payload(entry.at("request").get<std::string>());
    EXPECT_EQ(conn.receive_payload(std::chrono::seconds(1)), entry.at("response").get<std::string>())
        << "exchange " << n;
    ++n;
  }
  EXPECT_EQ(n, 13);
}

TEST(ChildProcess, TimeoutIsCodeFive) {
  Client c(spawn_process("sleep 5"), std::chrono::milliseconds(200));
  try {
    c.handshake();
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), kTimeout);
  }
  EXPECT_FALSE(c.is_open());
}

TEST(ChildProcess, ToyServerMatchesInProcessBackend) {
  auto c = connect_process(REASON_IAD_TOY_SERVER " --dim 8 --seed 4");
  ToyBackend local(8, 4);
  EXPECT_EQ(c->dimension(), 8u);
  EXPECT_EQ(c->encode_text("cable"), local.encode_text("cable"));
  c->shutdown();
  EXPECT_THROW(c->encode_text("cable"), Error);
}

TEST(ChildProcess, EnvironmentVariableNamesCommand) {
  ::setenv(std::string(kBackendCommandEnv).c_str(), REASON_IAD_TOY_SERVER " --dim 8", 1);
  auto c = connect_process();
  EXPECT_EQ(c->dimension(), 8u);
  ::unsetenv(std::string(kBackendCommandEnv).c_str());
  EXPECT_THROW(connect_process(), Error);
}

TEST(UnixSocket, ServesClients) {
  const auto path = (std::filesystem::temp_directory_path() /
                     ("reason_iad_" + std::to_string(::getpid()) + ".sock")).string();
  ToyBackend backend(8, 2);
  Server server(backend);
  std::thread serving([&] { serve_unix_socket(server, path); });
  std::unique_ptr<Client> c;
  for (int i = 0; i < 200 && !c; ++i) {
    try {
      c = std::make_unique<Client>(connect_unix_socket(path));
    } catch (const Error&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ASSERT_TRUE(c);
  c->handshake();
  EXPECT_EQ(c->encode_text("screw"), backend.encode_text("screw"));
  c->shutdown();
  serving.join();
  EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(Conformance, ToyServerPassesEveryCheck) {
  const auto checks = run_conformance(REASON_IAD_TOY_SERVER);
  EXPECT_GE(checks.size(), 10u);
  for (const auto& c : checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Conformance, BrokenServerFails) {
  const auto checks = run_conformance("exit 0");
  for (const auto& c : checks) EXPECT_FALSE(c.passed) << c.name;
}

TEST(Loopback, EngineResultsBitIdenticalOverWire) {
  ToyBackend local(16, 0);
  const auto suite = make_crafted_suite(local);
  auto remote = connect_process(REASON_IAD_TOY_SERVER " --dim 16 --seed 0");
  Config config;
  config.seed = 1;
  for (const auto& ci : suite.instances) {
    const auto a = run_reasoning(ci.instance, suite.knowledge, local, config);
    const auto b = run_reasoning(ci.instance, suite.knowledge, *remote, config);
    EXPECT_TRUE(a == b) << ci.instance.instance_id;
  }
}

}  // namespace
}  // namespace reason_iad::wire
