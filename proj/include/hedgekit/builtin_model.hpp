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

// Synthetic binary classifier with known ground truth. The score of a token
// list is the sum of unigram weights, except that a contiguous bigram listed
// in the model contributes its own weight in place of its two unigrams. Pad
// tokens score zero and break bigrams. Class scores are [-s, +s].
//
// File format:
//   {"classes":["neg","pos"],"unigrams":{"tok":w,...},"bigrams":[["a","b",w],...]}

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hedgekit/error.hpp"
#include "hedgekit/predictor.hpp"

namespace hedgekit {

class BuiltinModel {
 public:
  BuiltinModel() = default;

  std::vector<std::string> classes{"neg", "pos"};
  std::unordered_map<std::string, double> unigrams;
  std::map<std::pair<std::string, std::string>, double> bigrams;

  static BuiltinModel FromJson(const nlohmann::json& j) {
    BuiltinModel m;
    try {
      if (j.contains("classes")) m.classes = j.at("classes").get<std::vector<std::string>>();
      if (m.classes.size() != 2) throw ConfigError("builtin model must have exactly 2 classes");
      if (j.contains("unigrams")) {
        for (const auto& [tok, w] : j.at("unigrams").items()) m.unigrams[tok] = w.get<double>();
      }
      if (j.contains("bigrams")) {
        for (const auto& row : j.at("bigrams")) {
          if (!row.is_array() || row.size() != 3) {
            throw ConfigError("bigram entries must be [tok1, tok2, weight]");
          }
          m.bigrams[{row[0].get<std::string>(), row[1].get<std::string>()}] = row[2].get<double>();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed builtin model: ") + e.what());
    }
    return m;
  }

  static BuiltinModel FromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open builtin model file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed builtin model file " + path + ": " + e.what());
    }
    return FromJson(j);
  }

  nlohmann::json ToJson() const {
    nlohmann::json uni = nlohmann::json::object();
    for (const auto& [tok, w] : unigrams) uni[tok] = w;
    nlohmann::json bi = nlohmann::json::array();
    for (const auto& [key, w] : bigrams) bi.push_back({key.first, key.second, w});
    return {{"classes", classes}, {"unigrams", uni}, {"bigrams", bi}};
  }

  double Weight(const std::string& tok) const {
    auto it = unigrams.find(tok);
    return it == unigrams.end() ? 0.0 : it->second;
  }

  /// Greedy left-to-right: a matched bigram consumes both of its tokens.
  double Score(const TokenList& tokens, const std::string& pad) const {
    double s = 0.0;
    for (std::size_t i = 0; i < tokens.size();) {
      if (tokens[i] == pad) {
        ++i;
        continue;
      }
      if (i + 1 < tokens.size() && tokens[i + 1] != pad && !bigrams.empty()) {
        if (auto it = bigrams.find({tokens[i], tokens[i + 1]}); it != bigrams.end()) {
          s += it->second;
          i += 2;
          continue;
        }
      }
      s += Weight(tokens[i]);
      ++i;
    }
    return s;
  }

  /// softmax([-s, +s])
  std::vector<double> Classify(const TokenList& tokens, const std::string& pad) const {
    const double s = Score(tokens, pad);
    const double top = std::abs(s);
    const double neg = std::exp(-s - top);
    const double pos = std::exp(s - top);
    const double z = neg + pos;
    return {neg / z, pos / z};
  }

  /// Same vocabulary and unigram weights, no bigrams.
  BuiltinModel UnigramProjection() const {
    BuiltinModel m = *this;
    m.bigrams.clear();
    return m;
  }
};

class BuiltinBackend : public Backend {
 public:
  explicit BuiltinBackend(BuiltinModel model, std::string pad = "<pad>")
      : model_(std::move(model)), pad_(std::move(pad)) {}

  std::vector<std::vector<double>> Evaluate(const std::vector<TokenList>& batch) override {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& tokens : batch) out.push_back(model_.Classify(tokens, pad_));
    return out;
  }

  std::size_t num_classes() const override { return 2; }

  const BuiltinModel& model() const noexcept { return model_; }

 private:
  BuiltinModel model_;
  std::string pad_;
};

}  // namespace hedgekit
