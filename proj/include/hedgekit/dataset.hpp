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

// JSON-lines datasets: {"id": str, "tokens": [str, ...], "label": int}
// with "label" optional. Blank lines are skipped.

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hedgekit/core.hpp"
#include "hedgekit/error.hpp"

namespace hedgekit {

struct Example {
  std::string id;
  TokenSequence tokens;
  std::optional<int> label;
};

using Dataset = std::vector<Example>;

class DatasetError : public ConfigError {
 public:
  DatasetError(std::size_t line, const std::string& what)
      : ConfigError("dataset line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline Dataset ReadDataset(std::istream& in, const std::string& pad = "<pad>") {
  Dataset out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(line, e.what());
    }
    if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array()) {
      throw DatasetError(line, "expected an object with a \"tokens\" array");
    }
    std::vector<std::string> tokens;
    for (const auto& t : j["tokens"]) {
      if (!t.is_string()) throw DatasetError(line, "tokens must be strings");
      if (t.get<std::string>() == pad) throw DatasetError(line, "token equals the pad literal");
      tokens.push_back(t.get<std::string>());
    }
    if (tokens.empty()) throw DatasetError(line, "empty token list");
    std::string id = std::to_string(out.size());
    if (j.contains("id")) {
      if (!j["id"].is_string()) throw DatasetError(line, "\"id\" must be a string");
      id = j["id"].get<std::string>();
    }
    std::optional<int> label;
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_number_integer()) throw DatasetError(line, "\"label\" must be an integer");
      label = j["label"].get<int>();
    }
    out.push_back({std::move(id), TokenSequence(std::move(tokens)), label});
  }
  return out;
}

inline Dataset ReadDatasetFile(const std::string& path, const std::string& pad = "<pad>") {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open " + path);
  return ReadDataset(in, pad);
}

inline std::string DatasetLine(const Example& ex) {
  nlohmann::json j{{"id", ex.id}, {"tokens", ex.tokens.tokens()}};
  if (ex.label) j["label"] = *ex.label;
  return j.dump();
}

}  // namespace hedgekit
