#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "reason_iad/wire.hpp"

namespace reason_iad::wire {

namespace {

std::string errno_message(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

void write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(kBackendFailure, errno_message("write to backend failed"));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Returns 0 on EOF. Blocks until data arrives.
ssize_t read_some(int fd, char* buf, std::size_t size) {
  for (;;) {
    const ssize_t n = ::read(fd, buf, size);
    if (n >= 0) return n;
    if (errno != EINTR) throw Error(errno_message("read failed"));
  }
}

// Framed channel over a read fd and a write fd.
class FdConnection : public Connection {
 public:
  FdConnection(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  ~FdConnection() override { FdConnection::close(); }

  void send_payload(std::string_view payload) override { send_bytes(encode_frame(payload)); }

  void send_bytes(std::string_view bytes) override {
    if (write_fd_ < 0) throw Error("connection closed");
    write_all(write_fd_, bytes);
  }

  std::string receive_payload(std::chrono::milliseconds timeout) override {
    if (read_fd_ < 0) throw Error("connection closed");
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto payload = decoder_.next()) return *payload;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BackendError(kTimeout, "timed out waiting for backend response");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw Error(errno_message("poll failed"));
      }
      if (rc == 0) continue;
      char buf[65536];
      const ssize_t n = read_some(read_fd_, buf, sizeof buf);
      if (n == 0) throw BackendError(kBackendFailure, "backend closed the connection");
      decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
  }

  void close() override {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  FrameDecoder decoder_;
};

class ProcessConnection final : public FdConnection {
 public:
  ProcessConnection(int read_fd, int write_fd, pid_t pid) : FdConnection(read_fd, write_fd), pid_(pid) {}
  ~ProcessConnection() override { ProcessConnection::close(); }

  void close() override {
    FdConnection::close();
    if (pid_ <= 0) return;
    // Closing stdin asks the server to exit; escalate if it lingers.
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<Connection> spawn_process(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(errno_message("pipe failed"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(errno_message("pipe failed"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw Error(errno_message("fork failed"));
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessConnection>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Connection> connect_unix_socket(const std::string& socket_path) {
  ignore_sigpipe();
  sockaddr_un addr{};
  if (socket_path.size() >= sizeof addr.sun_path) throw Error("socket path too long");
  addr.sun_family = AF_UNIX;
  std::memcpy(addr.sun_path, socket_path.c_str(), socket_path.size() + 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(errno_message("socket failed"));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string msg = errno_message("connect to " + socket_path + " failed");
    ::close(fd);
    throw Error(msg);
  }
  return std::make_unique<FdConnection>(fd, fd);
}

void serve_fds(Server& server, int in_fd, int out_fd) {
  ignore_sigpipe();
  FrameDecoder decoder;
  char buf[65536];
  while (!server.shutdown_requested()) {
    const ssize_t n = read_some(in_fd, buf, sizeof buf);
    if (n == 0) return;
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    while (auto payload = decoder.next()) {
      write_all(out_fd, encode_frame(server.handle(*payload)));
      if (server.shutdown_requested()) return;
    }
  }
}

void serve_unix_socket(Server& server, const std::string& socket_path) {
  ignore_sigpipe();
  sockaddr_un addr{};
  if (socket_path.size() >= sizeof addr.sun_path) throw Error("socket path too long");
  addr.sun_family = AF_UNIX;
  std::memcpy(addr.sun_path, socket_path.c_str(), socket_path.size() + 1);
  const int listener = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listener < 0) throw Error(errno_message("socket failed"));
  ::unlink(socket_path.c_str());
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 4) != 0) {
    const std::string msg = errno_message("listen on " + socket_path + " failed");
    ::close(listener);
    throw Error(msg);
  }
  while (!server.shutdown_requested()) {
    const int conn = ::accept4(listener, nullptr, nullptr, SOCK_CLOEXEC);
    if (conn < 0) {
      if (errno == EINTR) continue;
      break;
    }
    try {
      serve_fds(server, conn, conn);
    } catch (const std::exception&) {
      // A broken client must not take the server down.
    }
    ::close(conn);
  }
  ::close(listener);
  ::unlink(socket_path.c_str());
}

}  // namespace reason_iad::wire
