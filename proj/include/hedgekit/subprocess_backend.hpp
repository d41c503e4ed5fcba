/*
 * Copyright 2026 The hedgekit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Predictor backend that talks to an adapter process over JSON lines on its
// stdin/stdout. The adapter speaks first:
//
//   <- {"hello":{"classes":2,"pad":"<pad>"}}      or {"fatal":"<msg>"}
//   -> {"id":1,"batch":[["the","<pad>","cat"],...]}
//   <- {"id":1,"probs":[[0.2,0.8],...]}           or {"id":1,"error":"<msg>"}
//
// Requests are serialized; one is in flight at a time. A dead or silent
// adapter is restarted and the request retried up to `max_retries` times.

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hedgekit/error.hpp"
#include "hedgekit/predictor.hpp"

namespace hedgekit {

struct SubprocessOptions {
  std::string command;  // run with /bin/sh -c
  std::string pad = "<pad>";
  int max_retries = 2;
  int timeout_ms = 60000;  // per response line
};

/// Failure that justifies restarting the adapter.
class PipeFailure : public Error {
 public:
  using Error::Error;
};

namespace detail {

/// JSON-lines serialization of one request.
inline std::string EncodeRequest(std::int64_t id, const std::vector<TokenList>& batch) {
  return nlohmann::json{{"id", id}, {"batch", batch}}.dump() + "\n";
}

/// Decodes a response line for request `id` with `expected` rows.
inline std::vector<std::vector<double>> DecodeResponse(const std::string& line, std::int64_t id,
                                                       std::size_t expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response line: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer()) {
    throw ProtocolError("response without an integer id: " + line);
  }
  if (j["id"].get<std::int64_t>() != id) {
    throw ProtocolError("response id " + j["id"].dump() + " does not echo request id " +
                        std::to_string(id));
  }
  if (j.contains("error")) throw ProtocolError("adapter error: " + j["error"].dump());
  if (!j.contains("probs") || !j["probs"].is_array()) throw ProtocolError("response has no probs");
  std::vector<std::vector<double>> out;
  try {
    out = j["probs"].get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("probs must be arrays of numbers: ") + e.what());
  }
  if (out.size() != expected) {
    throw ProtocolError("response has " + std::to_string(out.size()) + " rows for a batch of " +
                        std::to_string(expected));
  }
  return out;
}

}  // namespace detail

class SubprocessBackend : public Backend {
 public:
  explicit SubprocessBackend(SubprocessOptions options) : options_(std::move(options)) {
    if (options_.command.empty()) throw ConfigError("subprocess backend needs a command");
    Start();
  }

  ~SubprocessBackend() override { Stop(); }

  SubprocessBackend(const SubprocessBackend&) = delete;
  SubprocessBackend& operator=(const SubprocessBackend&) = delete;

  std::size_t num_classes() const override { return classes_; }

  /// Number of times the adapter was (re)started.
  int starts() const noexcept { return starts_; }

  std::vector<std::vector<double>> Evaluate(const std::vector<TokenList>& batch) override {
    std::lock_guard lock(mutex_);
    std::string last_failure;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      try {
        if (fd_ < 0) Start();
        const std::int64_t id = ++next_id_;
        WriteAll(detail::EncodeRequest(id, batch));
        return detail::DecodeResponse(ReadLine(), id, batch.size());
      } catch (const PipeFailure& e) {
        last_failure = e.what();
        Stop();
      }
    }
    throw TransportError("adapter '" + options_.command + "': " + last_failure,
                         options_.max_retries);
  }

 private:
  void Start() {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
      throw TransportError(std::string("socketpair: ") + std::strerror(errno), 0);
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      ::close(sv[0]);
      ::close(sv[1]);
      throw TransportError(std::string("fork: ") + std::strerror(errno), 0);
    }
    if (pid == 0) {
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", options_.command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(sv[1]);
    fd_ = sv[0];
    pid_ = pid;
    buffer_.clear();
    ++starts_;

    std::string line;
    try {
      line = ReadLine();
    } catch (const PipeFailure& e) {
      Stop();
      throw TransportError(std::string("adapter handshake failed: ") + e.what(), 0);
    }
    nlohmann::json hello;
    try {
      hello = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      Stop();
      throw ProtocolError("malformed handshake line: " + line);
    }
    if (hello.contains("fatal")) {
      Stop();
      throw TransportError("adapter failed to start: " + hello["fatal"].dump(), 0);
    }
    if (!hello.contains("hello") || !hello["hello"].is_object() ||
        !hello["hello"].contains("classes") || !hello["hello"]["classes"].is_number_integer()) {
      Stop();
      throw ProtocolError("handshake must be {\"hello\":{\"classes\":<int>,\"pad\":...}}: " + line);
    }
    const auto classes = hello["hello"]["classes"].get<std::int64_t>();
    const std::string pad = hello["hello"].value("pad", std::string{});
    if (classes < 2) {
      Stop();
      throw ProtocolError("adapter reports fewer than 2 classes");
    }
    if (pad != options_.pad) {
      Stop();
      throw ProtocolError("adapter pad literal '" + pad + "' differs from '" + options_.pad + "'");
    }
    classes_ = static_cast<std::size_t>(classes);
  }

  void Stop() noexcept {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) {
          pid_ = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  void WriteAll(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t w = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw PipeFailure(std::string("write: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string ReadLine() {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, options_.timeout_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw PipeFailure(std::string("poll: ") + std::strerror(errno));
      }
      if (ready == 0) throw PipeFailure("timed out waiting for the adapter");
      char chunk[65536];
      const ssize_t r = ::read(fd_, chunk, sizeof(chunk));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw PipeFailure(std::string("read: ") + std::strerror(errno));
      }
      if (r == 0) throw PipeFailure("adapter closed its output");
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  SubprocessOptions options_;
  std::mutex mutex_;
  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
  std::int64_t next_id_ = 0;
  std::size_t classes_ = 0;
  int starts_ = 0;
};

}  // namespace hedgekit
