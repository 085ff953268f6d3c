// Copyright 2026 The embinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "embinv/external_prior.h"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "embinv/error.h"

namespace embinv {
namespace {

// Line framing over a pair of file descriptors (possibly the same socket).
class FdTransport : public LineTransport {
 public:
  FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  ~FdTransport() override {
    if (write_fd_ != read_fd_ && write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
  }

  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void WriteLine(const std::string& line) override {
    std::string framed = line + "\n";
    std::size_t sent = 0;
    while (sent < framed.size()) {
      const ssize_t n = ::send(write_fd_, framed.data() + sent, framed.size() - sent,
                               MSG_NOSIGNAL);
      if (n < 0 && errno == ENOTSOCK) {
        const ssize_t w = ::write(write_fd_, framed.data() + sent, framed.size() - sent);
        if (w < 0) {
          if (errno == EINTR) continue;
          throw ProtocolError(std::string("prior write failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(w);
        continue;
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("prior write failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> ReadLine(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("prior poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) return std::nullopt;
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("prior read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ProtocolError("prior provider closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

class ProcessTransport final : public FdTransport {
 public:
  ProcessTransport(int read_fd, int write_fd, pid_t pid)
      : FdTransport(read_fd, write_fd), pid_(pid) {}

  ~ProcessTransport() override {
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<LineTransport> SpawnProcessTransport(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw ProtocolError("pipe() failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ProtocolError("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError("fork() failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessTransport>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineTransport> ConnectTcpTransport(const std::string& host, uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
  return std::make_unique<FdTransport>(fd, fd);
}

ExternalPrior::ExternalPrior(std::unique_ptr<LineTransport> transport,
                             std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  const auto line = transport_->ReadLine(timeout_);
  if (!line) throw ProtocolError("timed out waiting for prior handshake");
  try {
    const auto hello = nlohmann::json::parse(*line);
    const auto vocab = hello.at("V").get<int64_t>();
    if (vocab < 1) throw ProtocolError("handshake announced an empty vocabulary");
    vocab_size_ = static_cast<std::size_t>(vocab);
    name_ = hello.value("name", std::string("unnamed"));
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed handshake: ") + e.what());
  }
}

uint64_t ExternalPrior::requests_sent() const {
  std::lock_guard lock(mu_);
  return next_rid_ - 1;
}

std::vector<double> ExternalPrior::NextTokenLogProbs(std::span<const TokenId> context) const {
  TokenSequence key(context.begin(), context.end());
  for (const TokenId id : key) {
    if (id >= vocab_size_) throw DataError("context id out of range");
  }
  std::lock_guard lock(mu_);
  if (const auto it = cache_.find(key); it != cache_.end()) return it->second;

  const uint64_t rid = next_rid_++;
  transport_->WriteLine(nlohmann::json{{"rid", rid}, {"context", key}}.dump());
  const auto line = transport_->ReadLine(timeout_);
  if (!line) {
    throw ProtocolError("prior request " + std::to_string(rid) + " timed out");
  }
  std::vector<double> logprobs;
  try {
    const auto reply = nlohmann::json::parse(*line);
    if (reply.at("rid").get<uint64_t>() != rid) {
      throw ProtocolError("prior response id mismatch: expected " + std::to_string(rid));
    }
    if (reply.contains("error")) {
      throw ProtocolError("prior provider error: " + reply["error"].get<std::string>());
    }
    logprobs = reply.at("logprobs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed prior response: ") + e.what());
  }
  if (logprobs.size() != vocab_size_) {
    throw ProtocolError("prior response has " + std::to_string(logprobs.size()) +
                        " entries, expected " + std::to_string(vocab_size_));
  }
  for (const double v : logprobs) {
    if (!std::isfinite(v)) throw ProtocolError("prior response contains non-finite values");
  }
  const double norm = LogSumExp(logprobs);
  for (auto& v : logprobs) v -= norm;
  cache_.emplace(std::move(key), logprobs);
  return logprobs;
}

std::shared_ptr<const PriorModel> OpenPrior(const std::string& source,
                                            std::size_t vocab_size, bool check_vocab) {
  std::shared_ptr<const PriorModel> prior;
  if (source == "uniform") {
    return std::make_shared<UniformPrior>(vocab_size);
  } else if (source.starts_with("ngram:")) {
    prior = std::make_shared<NgramPrior>(NgramPrior::Load(source.substr(6)));
  } else if (source.starts_with("exec:")) {
    prior = std::make_shared<ExternalPrior>(SpawnProcessTransport(source.substr(5)));
  } else if (source.starts_with("tcp:")) {
    const std::string rest = source.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw InvalidArgumentError("tcp prior needs host:port");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidArgumentError("bad tcp port in prior source: " + source);
    }
    if (port <= 0 || port > 65535) throw InvalidArgumentError("bad tcp port: " + source);
    prior = std::make_shared<ExternalPrior>(
        ConnectTcpTransport(rest.substr(0, colon), static_cast<uint16_t>(port)));
  } else {
    throw InvalidArgumentError("unknown prior source: " + source);
  }
  if (check_vocab && prior->vocab_size() != vocab_size) {
    throw DataError("prior vocabulary " + std::to_string(prior->vocab_size()) +
                    " does not match table vocabulary " + std::to_string(vocab_size));
  }
  return prior;
}

}  // namespace embinv
