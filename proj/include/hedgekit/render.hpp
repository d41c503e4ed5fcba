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

// Heat-map rendering of an explanation: one row per timestep, one column per
// token, each span drawn as a merged cell coloured by its creation-time score.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "hedgekit/core.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/hedge.hpp"
#include "hedgekit/json_io.hpp"

namespace hedgekit {

enum class RenderFormat { kHtml, kSvg, kJson };
enum class Palette { kRedGreen, kColorblind };

inline RenderFormat ParseRenderFormat(const std::string& s) {
  if (s == "html") return RenderFormat::kHtml;
  if (s == "svg") return RenderFormat::kSvg;
  if (s == "json") return RenderFormat::kJson;
  throw ConfigError("unsupported render format '" + s + "' (expected html, svg or json)");
}

inline const char* Extension(RenderFormat f) {
  switch (f) {
    case RenderFormat::kHtml:
      return "html";
    case RenderFormat::kSvg:
      return "svg";
    case RenderFormat::kJson:
      return "json";
  }
  return "";
}

struct RenderSpec {
  RenderFormat format = RenderFormat::kHtml;
  Palette palette = Palette::kRedGreen;
  int cell_height = 28;
  int min_cell_width = 56;
};

using Rgb = std::array<int, 3>;

inline constexpr Rgb kNeutral{255, 255, 255};

/// Negative and positive end colours. Their offsets from the neutral colour
/// are permutations of each other, so +v and -v sit equally far from it.
inline std::pair<Rgb, Rgb> PaletteEnds(Palette p) {
  if (p == Palette::kColorblind) return {Rgb{230, 97, 1}, Rgb{1, 97, 230}};
  return {Rgb{200, 60, 60}, Rgb{60, 200, 60}};
}

/// Maps a normalized score in [-1, 1] to a colour.
inline Rgb ScoreColor(double v, Palette p) {
  v = std::clamp(v, -1.0, 1.0);
  const auto [neg, pos] = PaletteEnds(p);
  const Rgb& end = v < 0 ? neg : pos;
  const double a = std::abs(v);
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    const double offset = static_cast<double>(kNeutral[c] - end[c]);
    out[c] = kNeutral[c] - static_cast<int>(std::lround(a * offset));
  }
  return out;
}

inline std::string Hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

/// Largest |score| over all contributions; 0 means every cell is neutral.
inline double NormalizationDivisor(const Explanation& e) {
  double m = 0.0;
  for (const auto& c : e.contributions) m = std::max(m, std::abs(c.score));
  return m;
}

namespace detail {

inline std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&#39;";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

inline std::string Fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string Svg(const Explanation& e, const RenderSpec& spec) {
  const std::size_t n = e.size();
  std::size_t longest = 1;
  for (const auto& t : e.tokens) longest = std::max(longest, t.size());
  const int col = std::max(spec.min_cell_width, static_cast<int>(longest) * 8 + 16);
  const int row = spec.cell_height;
  const int label_w = 48;
  const int width = label_w + col * static_cast<int>(n);
  const int height = row * (static_cast<int>(n) + 1);

  std::map<Span, double> score;
  for (const auto& c : e.contributions) score.emplace(c.span, c.score);
  const double divisor = NormalizationDivisor(e);

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t t = 0; t < e.hierarchy.partitions.size(); ++t) {
    const int y = row * static_cast<int>(t);
    out += "<text x=\"4\" y=\"" + std::to_string(y + row / 2 + 4) + "\">t=" + std::to_string(t) +
           "</text>\n";
    for (const Span& s : e.hierarchy.partitions[t]) {
      const auto it = score.find(s);
      const double psi = it == score.end() ? 0.0 : it->second;
      const double v = divisor > 0.0 ? psi / divisor : 0.0;
      const int x = label_w + col * static_cast<int>(s.start);
      const int w = col * static_cast<int>(s.length());
      std::string text;
      for (std::size_t i = s.start; i < s.end; ++i) text += (i > s.start ? " " : "") + e.tokens[i];
      out += "<g><title>" + XmlEscape(text) + " : " + Fixed(psi) + "</title>";
      out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
             std::to_string(w) + "\" height=\"" + std::to_string(row) + "\" fill=\"" +
             Hex(ScoreColor(v, spec.palette)) + "\" stroke=\"#ffffff\" stroke-width=\"2\"/>";
      out += "<text x=\"" + std::to_string(x + w / 2) + "\" y=\"" + std::to_string(y + row / 2 + 4) +
             "\" text-anchor=\"middle\">" + Fixed(psi, 2) + "</text></g>\n";
    }
  }
  const int ty = row * static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int x = label_w + col * static_cast<int>(i) + col / 2;
    out += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(ty + row / 2 + 4) +
           "\" text-anchor=\"middle\">" + XmlEscape(e.tokens[i]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace detail

inline std::string Render(const Explanation& e, const RenderSpec& spec = {}) {
  switch (spec.format) {
    case RenderFormat::kJson:
      return CanonicalDump(ExplanationToJson(e)) + "\n";
    case RenderFormat::kSvg:
      return detail::Svg(e, spec);
    case RenderFormat::kHtml: {
      std::string title = detail::XmlEscape(e.tokens.empty() ? "" : e.tokens.front());
      for (std::size_t i = 1; i < e.tokens.size(); ++i) title += " " + detail::XmlEscape(e.tokens[i]);
      return "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" + title +
             "</title>\n</head>\n<body style=\"margin:16px;font-family:sans-serif\">\n<p>predicted class " +
             std::to_string(e.predicted_class) + " (" + ToString(e.variant) + ", m=" +
             std::to_string(e.neighbors) + ")</p>\n" + detail::Svg(e, spec) + "</body>\n</html>\n";
    }
  }
  throw ConfigError("unsupported render format");
}

}  // namespace hedgekit
