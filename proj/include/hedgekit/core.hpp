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

// Domain types shared by every module: token sequences, half-open spans,
// partitions of a sequence into contiguous spans, and the hierarchy of
// partitions produced by successive splits.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hedgekit/error.hpp"

namespace hedgekit {

class TokenSequence {
 public:
  explicit TokenSequence(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty()) {
      throw DomainError("token sequence must contain at least one token");
    }
  }

  /// Splits on ASCII whitespace. Anything finer belongs to the model behind the predictor.
  static TokenSequence FromText(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> tokens;
    for (std::string tok; in >> tok;) tokens.push_back(tok);
    return TokenSequence(std::move(tokens));
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool Contains(const std::string& literal) const {
    return std::find(tokens_.begin(), tokens_.end(), literal) != tokens_.end();
  }

  std::string Join(std::size_t begin, std::size_t end) const {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
      if (i > begin) out += ' ';
      out += tokens_[i];
    }
    return out;
  }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<std::string> tokens_;
};

/// Half-open token interval [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  bool contains(std::size_t i) const noexcept { return start <= i && i < end; }

  friend auto operator<=>(const Span&, const Span&) = default;
};

inline std::string ToString(const Span& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

/// Ordered, gap-free, non-overlapping cover of [0, n) by spans.
class Partition {
 public:
  Partition(std::vector<Span> spans, std::size_t n) : spans_(std::move(spans)) {
    if (spans_.empty()) throw StructuralError("partition has no spans");
    std::size_t cursor = 0;
    for (const Span& s : spans_) {
      if (s.start != cursor || s.end <= s.start) {
        throw StructuralError("partition spans are not contiguous at " + ToString(s));
      }
      cursor = s.end;
    }
    if (cursor != n) throw StructuralError("partition does not end at n=" + std::to_string(n));
  }

  /// {[0, n)}
  static Partition Whole(std::size_t n) { return Partition({Span{0, n}}, n); }

  static Partition Singletons(std::size_t n) {
    std::vector<Span> spans;
    spans.reserve(n);
    for (std::size_t i = 0; i < n; ++i) spans.push_back({i, i + 1});
    return Partition(std::move(spans), n);
  }

  std::size_t size() const noexcept { return spans_.size(); }
  std::size_t sequence_length() const noexcept { return spans_.back().end; }
  const Span& operator[](std::size_t i) const { return spans_[i]; }
  const std::vector<Span>& spans() const noexcept { return spans_; }
  auto begin() const noexcept { return spans_.begin(); }
  auto end() const noexcept { return spans_.end(); }

  /// Position of `s` in the partition, or size() when absent.
  std::size_t IndexOf(const Span& s) const {
    auto it = std::lower_bound(spans_.begin(), spans_.end(), s);
    if (it == spans_.end() || *it != s) return spans_.size();
    return static_cast<std::size_t>(it - spans_.begin());
  }

  bool IsSingletons() const noexcept { return spans_.size() == sequence_length(); }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<Span> spans_;
};

/// partitions[t] is the partition after t splits; partitions[0] = {[0, n)}.
struct Hierarchy {
  std::vector<Partition> partitions;

  friend bool operator==(const Hierarchy&, const Hierarchy&) = default;
};

/// A span with its importance score and the timestep that created it (0 for the root).
struct Contribution {
  Span span;
  double score = 0.0;
  std::size_t timestep = 0;

  friend bool operator==(const Contribution&, const Contribution&) = default;
};

/// Replaces `target` by [target.start, j) and [j, target.end).
inline Partition SplitSpan(const Partition& p, const Span& target, std::size_t j) {
  const std::size_t idx = p.IndexOf(target);
  if (idx == p.size()) {
    throw StructuralError("span " + ToString(target) + " is not in the partition");
  }
  if (j <= target.start || j >= target.end) {
    throw DomainError("split point " + std::to_string(j) + " is not interior to " +
                      ToString(target));
  }
  std::vector<Span> spans;
  spans.reserve(p.size() + 1);
  spans.insert(spans.end(), p.begin(), p.begin() + static_cast<std::ptrdiff_t>(idx));
  spans.push_back({target.start, j});
  spans.push_back({j, target.end});
  spans.insert(spans.end(), p.begin() + static_cast<std::ptrdiff_t>(idx) + 1, p.end());
  return Partition(std::move(spans), p.sequence_length());
}

/// Inverse of SplitSpan for two adjacent members of `p`.
inline Partition MergeSpans(const Partition& p, const Span& left, const Span& right) {
  const std::size_t idx = p.IndexOf(left);
  if (idx == p.size() || idx + 1 == p.size() || p[idx + 1] != right) {
    throw StructuralError(ToString(left) + " and " + ToString(right) +
                          " are not adjacent members of the partition");
  }
  std::vector<Span> spans(p.begin(), p.end());
  spans[idx] = Span{left.start, right.end};
  spans.erase(spans.begin() + static_cast<std::ptrdiff_t>(idx) + 1);
  return Partition(std::move(spans), p.sequence_length());
}

struct SplitCandidate {
  Span span;
  std::size_t j = 0;

  friend bool operator==(const SplitCandidate&, const SplitCandidate&) = default;
};

/// Every interior split point of every non-singleton span, ordered by span start then j.
/// Tie-breaking in the divisive search depends on this order.
inline std::vector<SplitCandidate> CandidateSplits(const Partition& p) {
  std::vector<SplitCandidate> out;
  for (const Span& s : p) {
    for (std::size_t j = s.start + 1; j < s.end; ++j) out.push_back({s, j});
  }
  return out;
}

/// Checks every Hierarchy invariant; throws StructuralError naming the first violation.
inline void ValidateHierarchy(const Hierarchy& h, std::size_t n) {
  if (h.partitions.size() != n) {
    throw StructuralError("hierarchy has " + std::to_string(h.partitions.size()) +
                          " partitions, expected " + std::to_string(n));
  }
  if (h.partitions.front() != Partition::Whole(n)) {
    throw StructuralError("hierarchy does not start from the whole sequence");
  }
  for (std::size_t t = 1; t < n; ++t) {
    const Partition& prev = h.partitions[t - 1];
    const Partition& cur = h.partitions[t];
    if (cur.size() != prev.size() + 1 || cur.sequence_length() != n) {
      throw StructuralError("partition " + std::to_string(t) + " is not one split away");
    }
    // Exactly one span of prev disappears and it is the union of two new adjacent spans.
    std::size_t k = 0;
    while (k < prev.size() && prev[k] == cur[k]) ++k;
    if (k == prev.size() || cur[k].start != prev[k].start || cur[k + 1].end != prev[k].end ||
        !std::equal(prev.begin() + static_cast<std::ptrdiff_t>(k) + 1, prev.end(),
                    cur.begin() + static_cast<std::ptrdiff_t>(k) + 2)) {
      throw StructuralError("partition " + std::to_string(t) + " is not one split away");
    }
  }
  if (!h.partitions.back().IsSingletons()) {
    throw StructuralError("hierarchy does not end at singletons");
  }
}

}  // namespace hedgekit
