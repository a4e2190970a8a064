// Serves the toy backend over the wire protocol on stdin/stdout, or on a
// Unix-domain socket with --socket.

#include <unistd.h>

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "reason_iad/toy_backend.hpp"
#include "reason_iad/wire.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Toy backend wire server"};
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  std::string socket_path;
  app.add_option("--dim", dim, "Embedding dimension")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Weight seed");
  app.add_option("--socket", socket_path, "Listen on this Unix socket instead of stdio");
  CLI11_PARSE(app, argc, argv);

  try {
    reason_iad::ToyBackend backend(dim, seed);
    reason_iad::wire::Server server(backend);
    if (socket_path.empty()) {
      reason_iad::wire::serve_fds(server, STDIN_FILENO, STDOUT_FILENO);
    } else {
      reason_iad::wire::serve_unix_socket(server, socket_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "reason-iad-toy-server: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
