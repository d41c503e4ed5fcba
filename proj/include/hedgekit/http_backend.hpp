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

// Predictor backend over HTTP: POST <base>/predict with the subprocess
// request body, 200 with the subprocess response body. Large batches are cut
// into chunks and up to `max_in_flight` chunks are sent concurrently.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "hedgekit/error.hpp"
#include "hedgekit/predictor.hpp"
#include "hedgekit/subprocess_backend.hpp"

namespace hedgekit {

struct HttpOptions {
  std::string url;  // http://host:port[/prefix]
  int max_in_flight = 4;
  std::size_t chunk_size = 256;
  int max_retries = 2;
  int timeout_s = 60;
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpOptions options) : options_(std::move(options)) {
    const std::string scheme = "http://";
    if (options_.url.rfind(scheme, 0) != 0) {
      throw ConfigError("http backend URL must start with http://, got " + options_.url);
    }
    const auto slash = options_.url.find('/', scheme.size());
    origin_ = options_.url.substr(0, slash);
    path_ = slash == std::string::npos ? "" : options_.url.substr(slash);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/predict";
    if (options_.max_in_flight < 1) options_.max_in_flight = 1;
    if (options_.chunk_size == 0) options_.chunk_size = 1;
  }

  std::size_t num_classes() const override { return classes_.load(); }

  std::vector<std::vector<double>> Evaluate(const std::vector<TokenList>& batch) override {
    std::vector<std::vector<double>> out(batch.size());
    const std::size_t chunks = (batch.size() + options_.chunk_size - 1) / options_.chunk_size;
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&] {
      httplib::Client client(origin_);
      client.set_connection_timeout(options_.timeout_s);
      client.set_read_timeout(options_.timeout_s);
      for (std::size_t c; (c = next++) < chunks;) {
        try {
          const std::size_t lo = c * options_.chunk_size;
          const std::size_t hi = std::min(batch.size(), lo + options_.chunk_size);
          std::vector<TokenList> part(batch.begin() + static_cast<std::ptrdiff_t>(lo),
                                      batch.begin() + static_cast<std::ptrdiff_t>(hi));
          auto rows = Post(client, part);
          for (std::size_t i = lo; i < hi; ++i) out[i] = std::move(rows[i - lo]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = chunks;
        }
      }
    };

    const auto width = std::min<std::size_t>(static_cast<std::size_t>(options_.max_in_flight), chunks);
    if (width <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < width; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
  }

 private:
  std::vector<std::vector<double>> Post(httplib::Client& client, const std::vector<TokenList>& part) {
    const std::int64_t id = ++next_id_;
    const std::string body = detail::EncodeRequest(id, part);
    std::string failure;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      auto res = client.Post(path_, body, "application/json");
      if (!res) {
        failure = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        if (res->status >= 500) {
          failure = "HTTP " + std::to_string(res->status);
          continue;
        }
        throw ProtocolError("HTTP " + std::to_string(res->status) + " from " + origin_ + path_);
      }
      auto rows = detail::DecodeResponse(res->body, id, part.size());
      if (!rows.empty()) {
        std::size_t expected = 0;
        classes_.compare_exchange_strong(expected, rows.front().size());
      }
      return rows;
    }
    throw TransportError(origin_ + path_ + ": " + failure, options_.max_retries);
  }

  HttpOptions options_;
  std::string origin_;
  std::string path_;
  std::atomic<std::int64_t> next_id_{0};
  std::atomic<std::size_t> classes_{0};
};

}  // namespace hedgekit
