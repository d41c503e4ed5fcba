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

// Run configuration. Precedence: built-in defaults < config file (JSON, path
// in $HEDGE_KIT_CONFIG) < command-line flags. The effective configuration is
// embedded in every artifact a command writes.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hedgekit/builtin_model.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/hedge.hpp"
#include "hedgekit/http_backend.hpp"
#include "hedgekit/json_io.hpp"
#include "hedgekit/predictor.hpp"
#include "hedgekit/random.hpp"
#include "hedgekit/render.hpp"
#include "hedgekit/shapley.hpp"
#include "hedgekit/subprocess_backend.hpp"

namespace hedgekit {

inline constexpr const char* kConfigEnv = "HEDGE_KIT_CONFIG";

struct Config {
  std::string predictor;  // builtin:<path> | subprocess:<cmd> | http:<url>
  std::string pad = "<pad>";
  std::size_t m = kDefaultNeighbors;
  std::vector<int> k{20};
  std::vector<int> r{20};
  int q = 100;
  int samples = 100;
  std::uint64_t seed = 1;
  std::string rng = kRngName;
  std::size_t exact_limit = kDefaultExactLimit;
  std::size_t max_len = 0;  // cap on top-span length for cohesion; 0 = none
  std::string variant = "top-down";
  std::string render;  // empty, html, svg or json
  std::string palette = "red-green";
  std::string out = "hedge-out";
  int jobs = 1;
  int max_in_flight = 4;
  int retries = 2;
};

inline ojson ConfigToJson(const Config& c) {
  return ojson{{"predictor", c.predictor}, {"pad", c.pad},       {"m", c.m},
               {"k", c.k},                 {"r", c.r},           {"q", c.q},
               {"samples", c.samples},     {"seed", c.seed},     {"rng", c.rng},
               {"exact_limit", c.exact_limit}, {"max_len", c.max_len},
               {"variant", c.variant},     {"render", c.render}, {"palette", c.palette},
               {"out", c.out},             {"jobs", c.jobs},     {"max_in_flight", c.max_in_flight},
               {"retries", c.retries}};
}

/// The configuration as embedded in artifacts. Output location and thread
/// count do not change results, so they are left out and reruns into another
/// directory or with another --jobs stay byte-identical.
inline ojson ArtifactConfigJson(const Config& c) {
  ojson j = ConfigToJson(c);
  j.erase("out");
  j.erase("jobs");
  return j;
}

/// Overlays the keys present in `j` onto `c`; unknown keys are errors.
inline void ApplyConfigJson(Config& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "predictor") c.predictor = v.get<std::string>();
      else if (key == "pad") c.pad = v.get<std::string>();
      else if (key == "m") c.m = v.get<std::size_t>();
      else if (key == "k") c.k = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
      else if (key == "r") c.r = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
      else if (key == "q") c.q = v.get<int>();
      else if (key == "samples") c.samples = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "rng") c.rng = v.get<std::string>();
      else if (key == "exact_limit") c.exact_limit = v.get<std::size_t>();
      else if (key == "max_len") c.max_len = v.get<std::size_t>();
      else if (key == "variant") c.variant = v.get<std::string>();
      else if (key == "render") c.render = v.get<std::string>();
      else if (key == "palette") c.palette = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "jobs") c.jobs = v.get<int>();
      else if (key == "max_in_flight") c.max_in_flight = v.get<int>();
      else if (key == "retries") c.retries = v.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

inline Config LoadConfigFile(const std::string& path, Config base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config file " + path + ": " + e.what());
  }
  ApplyConfigJson(base, j);
  return base;
}

/// Defaults, overlaid with $HEDGE_KIT_CONFIG when set.
inline Config ConfigFromEnvironment() {
  const char* path = std::getenv(kConfigEnv);
  if (path == nullptr || *path == '\0') return {};
  return LoadConfigFile(path);
}

inline void ValidateConfig(const Config& c) {
  if (c.pad.empty()) throw ConfigError("pad literal must be non-empty");
  if (c.rng != kRngName) throw ConfigError("unsupported rng '" + c.rng + "'");
  for (int v : c.k) {
    if (v <= 0 || v > 100) throw ConfigError("--k must be in (0, 100]");
  }
  for (int v : c.r) {
    if (v <= 0 || v > 100) throw ConfigError("--r must be in (0, 100]");
  }
  if (c.k.empty() || c.r.empty()) throw ConfigError("at least one k and one r are required");
  if (c.q < 1) throw ConfigError("--q must be >= 1");
  if (c.samples < 1) throw ConfigError("--samples must be >= 1");
  if (c.jobs < 1) throw ConfigError("--jobs must be >= 1");
  if (c.variant != "top-down" && c.variant != "bottom-up") {
    throw ConfigError("--variant must be top-down or bottom-up");
  }
  if (!c.render.empty()) ParseRenderFormat(c.render);
  if (c.palette != "red-green" && c.palette != "colorblind") {
    throw ConfigError("--palette must be red-green or colorblind");
  }
}

inline Variant ParseVariant(const std::string& s) {
  return s == "bottom-up" ? Variant::kBottomUp : Variant::kTopDown;
}

/// Builds the backend named by `c.predictor`.
inline std::shared_ptr<Backend> MakeBackend(const Config& c) {
  const auto colon = c.predictor.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("--predictor must be builtin:<path>, subprocess:<cmd> or http:<url>");
  }
  const std::string kind = c.predictor.substr(0, colon);
  const std::string arg = c.predictor.substr(colon + 1);
  if (kind == "builtin") {
    return std::make_shared<BuiltinBackend>(BuiltinModel::FromFile(arg), c.pad);
  }
  if (kind == "subprocess") {
    return std::make_shared<SubprocessBackend>(SubprocessOptions{arg, c.pad, c.retries});
  }
  if (kind == "http") {
    HttpOptions opts;
    opts.url = arg;
    opts.max_in_flight = c.max_in_flight;
    opts.max_retries = c.retries;
    return std::make_shared<HttpBackend>(opts);
  }
  throw ConfigError("unknown predictor backend '" + kind + "'");
}

}  // namespace hedgekit
