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

// Canonical JSON: spans are [start, end] pairs (half-open), doubles are
// printed with 17 significant digits, object keys keep insertion order.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "hedgekit/core.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/hedge.hpp"

namespace hedgekit {

using ojson = nlohmann::ordered_json;

inline std::string FormatDouble(double v) {
  if (!std::isfinite(v)) throw DomainError("non-finite value in canonical JSON");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  // Keep it a JSON number that still reads back as floating point.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline void Dump(const ojson& j, std::string& out, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += ojson(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        Dump(it.value(), out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case ojson::value_t::array: {
      out += '[';
      // Arrays of scalars and of [start, end] pairs stay on one line.
      const bool flat = std::none_of(j.begin(), j.end(), [](const ojson& v) {
        return v.is_structured() && !(v.is_array() && v.size() <= 2 &&
                                      std::all_of(v.begin(), v.end(),
                                                  [](const ojson& x) { return x.is_primitive(); }));
      });
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        if (!flat) newline(depth + 1);
        Dump(v, out, flat ? -1 : indent, depth + 1);
      }
      if (!flat && !j.empty()) newline(depth);
      out += ']';
      return;
    }
    case ojson::value_t::number_float:
      out += FormatDouble(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Deterministic text of `j`; indent < 0 gives a single line.
inline std::string CanonicalDump(const ojson& j, int indent = 1) {
  std::string out;
  detail::Dump(j, out, indent, 0);
  return out;
}

inline ojson SpanToJson(const Span& s) { return ojson::array({s.start, s.end}); }

inline Span SpanFromJson(const ojson& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("span must be [start, end]");
  return Span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

inline ojson HierarchyToJson(const Hierarchy& h) {
  ojson out = ojson::array();
  for (const auto& p : h.partitions) {
    ojson row = ojson::array();
    for (const auto& s : p) row.push_back(SpanToJson(s));
    out.push_back(std::move(row));
  }
  return out;
}

inline ojson ContributionToJson(const Contribution& c) {
  return ojson{{"span", SpanToJson(c.span)}, {"score", c.score}, {"timestep", c.timestep}};
}

inline ojson ExplanationToJson(const Explanation& e) {
  ojson contributions = ojson::array();
  for (const auto& c : e.contributions) contributions.push_back(ContributionToJson(c));
  ojson trace = ojson::array();
  for (const auto& step : e.trace) {
    ojson candidates = ojson::array();
    for (const auto& c : step.candidates) {
      candidates.push_back({{"span", SpanToJson(c.span)}, {"j", c.j}, {"phi", c.phi}});
    }
    trace.push_back({{"timestep", step.timestep},
                     {"span", SpanToJson(step.span)},
                     {"j", step.j},
                     {"phi", step.phi},
                     {"candidates", std::move(candidates)}});
  }
  return ojson{{"tokens", e.tokens},
               {"variant", ToString(e.variant)},
               {"m", e.neighbors},
               {"predicted_class", e.predicted_class},
               {"prediction", e.prediction},
               {"hierarchy", HierarchyToJson(e.hierarchy)},
               {"contributions", std::move(contributions)},
               {"trace", std::move(trace)}};
}

inline Explanation ExplanationFromJson(const ojson& j) {
  try {
    Explanation e;
    e.tokens = j.at("tokens").get<std::vector<std::string>>();
    const auto variant = j.at("variant").get<std::string>();
    if (variant != "top-down" && variant != "bottom-up") throw ConfigError("unknown variant");
    e.variant = variant == "top-down" ? Variant::kTopDown : Variant::kBottomUp;
    e.neighbors = j.at("m").get<std::size_t>();
    e.predicted_class = j.at("predicted_class").get<std::size_t>();
    e.prediction = j.at("prediction").get<std::vector<double>>();
    const std::size_t n = e.tokens.size();
    for (const auto& row : j.at("hierarchy")) {
      std::vector<Span> spans;
      for (const auto& s : row) spans.push_back(SpanFromJson(s));
      e.hierarchy.partitions.emplace_back(std::move(spans), n);
    }
    for (const auto& c : j.at("contributions")) {
      e.contributions.push_back(
          {SpanFromJson(c.at("span")), c.at("score").get<double>(), c.at("timestep").get<std::size_t>()});
    }
    for (const auto& s : j.at("trace")) {
      TraceStep step;
      step.timestep = s.at("timestep").get<std::size_t>();
      step.span = SpanFromJson(s.at("span"));
      step.j = s.at("j").get<std::size_t>();
      step.phi = s.at("phi").get<double>();
      for (const auto& c : s.at("candidates")) {
        step.candidates.push_back(
            {SpanFromJson(c.at("span")), c.at("j").get<std::size_t>(), c.at("phi").get<double>()});
      }
      e.trace.push_back(std::move(step));
    }
    return e;
  } catch (const ojson::exception& ex) {
    throw ConfigError(std::string("malformed explanation JSON: ") + ex.what());
  }
}

}  // namespace hedgekit
