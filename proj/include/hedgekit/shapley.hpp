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

// Shapley interaction between two adjacent spans of a partition, with the
// coalition restricted to m neighbouring spans on each side, plus exhaustive
// versions used as oracles.
//
// The worth of a coalition A of spans is f(A): the probability of the frozen
// label when only the tokens of A are shown and every other token is padded.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hedgekit/core.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/predictor.hpp"

namespace hedgekit {

inline constexpr std::size_t kDefaultNeighbors = 2;
inline constexpr std::size_t kDefaultExactLimit = 12;
// Largest |N_m \ {j1, j2}| interaction_score will enumerate (2^q subsets).
inline constexpr std::size_t kMaxCoalitionSpans = 20;

/// Neumaier-compensated running sum. Order of Add calls fixes the result.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// |S|! (M - |S| - 2)! / (M - 1)!, via log-gamma so M up to ~170 stays finite.
inline double InteractionWeight(std::size_t s, std::size_t coalition_size) {
  if (coalition_size < 2 || s + 2 > coalition_size) {
    throw DomainError("interaction weight needs 0 <= |S| <= M - 2");
  }
  const double m = static_cast<double>(coalition_size);
  const double k = static_cast<double>(s);
  return std::exp(std::lgamma(k + 1.0) + std::lgamma(m - k - 1.0) - std::lgamma(m));
}

struct InteractionContext {
  const TokenSequence* seq = nullptr;
  Partition partition;  // the post-split partition
  Span left;
  Span right;
  std::size_t m = kDefaultNeighbors;
  std::size_t label = 0;  // frozen predicted class
};

namespace detail {

inline void CheckPair(const Partition& p, const Span& a, const Span& b) {
  if (p.IndexOf(a) == p.size() || p.IndexOf(b) == p.size()) {
    throw StructuralError("interaction pair is not in the partition");
  }
  if (a.end != b.start && b.end != a.start) {
    throw StructuralError(ToString(a) + " and " + ToString(b) + " are not adjacent");
  }
}

inline Presence Union(std::size_t n, std::span<const Span> spans, std::uint64_t bits,
                      const Span* extra_a, const Span* extra_b) {
  Presence present(n, false);
  auto mark = [&](const Span& s) {
    for (std::size_t i = s.start; i < s.end; ++i) present[i] = true;
  };
  for (std::size_t k = 0; k < spans.size(); ++k) {
    if (bits >> k & 1U) mark(spans[k]);
  }
  if (extra_a) mark(*extra_a);
  if (extra_b) mark(*extra_b);
  return present;
}

}  // namespace detail

/// Spans of N_m other than the pair: up to m on the left of the pair and up
/// to m on its right, truncated at the sequence boundaries, in order.
inline std::vector<Span> NeighborSpans(const Partition& p, const Span& a, const Span& b,
                                       std::size_t m) {
  detail::CheckPair(p, a, b);
  const std::size_t lo = std::min(p.IndexOf(a), p.IndexOf(b));
  const std::size_t hi = lo + 1;
  std::vector<Span> out;
  const std::size_t first = lo >= m ? lo - m : 0;
  for (std::size_t k = first; k < lo; ++k) out.push_back(p[k]);
  for (std::size_t k = hi + 1; k < p.size() && k <= hi + m; ++k) out.push_back(p[k]);
  return out;
}

/// f(S+{a,b}) - f(S+{a}) - f(S+{b}) + f(S), grouped as (ab + none) - (a + b)
/// so that swapping a and b gives a bit-identical value.
inline double GammaFromWorths(double both, double only_a, double only_b, double none) {
  return (both + none) - (only_a + only_b);
}

inline double Gamma(Predictor& predictor, const InteractionContext& ctx,
                    std::span<const Span> coalition) {
  detail::CheckPair(ctx.partition, ctx.left, ctx.right);
  const auto allowed = NeighborSpans(ctx.partition, ctx.left, ctx.right, ctx.m);
  for (const Span& s : coalition) {
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      throw DomainError("coalition span " + ToString(s) + " is not a neighbour of the pair");
    }
  }
  const std::size_t n = ctx.seq->size();
  const std::uint64_t all = coalition.empty() ? 0 : (std::uint64_t{1} << coalition.size()) - 1;
  std::vector<MaskRequest> req{
      {ctx.seq, detail::Union(n, coalition, all, &ctx.left, &ctx.right)},
      {ctx.seq, detail::Union(n, coalition, all, &ctx.left, nullptr)},
      {ctx.seq, detail::Union(n, coalition, all, &ctx.right, nullptr)},
      {ctx.seq, detail::Union(n, coalition, all, nullptr, nullptr)},
  };
  const auto preds = predictor.PredictBatch(req);
  return GammaFromWorths(preds[0][ctx.label], preds[1][ctx.label], preds[2][ctx.label],
                         preds[3][ctx.label]);
}

/// Presence masks in the order InteractionScore consumes them: for each
/// subset S (bitmask order over NeighborSpans), S+{a,b}, S+{a}, S+{b}, S.
inline std::vector<MaskRequest> InteractionRequests(const InteractionContext& ctx) {
  const auto others = NeighborSpans(ctx.partition, ctx.left, ctx.right, ctx.m);
  if (others.size() > kMaxCoalitionSpans) {
    throw CapacityError("neighbour set of " + std::to_string(others.size()) +
                        " spans exceeds the enumeration limit");
  }
  const std::size_t n = ctx.seq->size();
  const std::uint64_t subsets = std::uint64_t{1} << others.size();
  std::vector<MaskRequest> req;
  req.reserve(4 * subsets);
  for (std::uint64_t bits = 0; bits < subsets; ++bits) {
    req.push_back({ctx.seq, detail::Union(n, others, bits, &ctx.left, &ctx.right)});
    req.push_back({ctx.seq, detail::Union(n, others, bits, &ctx.left, nullptr)});
    req.push_back({ctx.seq, detail::Union(n, others, bits, &ctx.right, nullptr)});
    req.push_back({ctx.seq, detail::Union(n, others, bits, nullptr, nullptr)});
  }
  return req;
}

/// Shapley interaction of the pair over the neighbour-restricted coalition N_m.
inline double InteractionScore(Predictor& predictor, const InteractionContext& ctx) {
  const auto others = NeighborSpans(ctx.partition, ctx.left, ctx.right, ctx.m);
  const auto req = InteractionRequests(ctx);
  const auto preds = predictor.PredictBatch(req);
  const std::size_t coalition_size = others.size() + 2;

  std::vector<double> weight(others.size() + 1);
  for (std::size_t s = 0; s <= others.size(); ++s) weight[s] = InteractionWeight(s, coalition_size);

  CompensatedSum total;
  const std::uint64_t subsets = std::uint64_t{1} << others.size();
  for (std::uint64_t bits = 0; bits < subsets; ++bits) {
    const std::size_t base = 4 * static_cast<std::size_t>(bits);
    const double g = GammaFromWorths(preds[base][ctx.label], preds[base + 1][ctx.label],
                                     preds[base + 2][ctx.label], preds[base + 3][ctx.label]);
    total.Add(weight[static_cast<std::size_t>(std::popcount(bits))] * g);
  }
  return total.value();
}

enum class ExactWeighting {
  /// |S|!(P-|S|-2)!/(P-1)!: the coalition-game Shapley interaction index.
  kInteractionIndex,
  /// |S|!(P-|S|-1)!/P!: single-player Shapley weights applied to the pair. These sum
  /// to 1/2 over all S, so scores are not comparable with the interaction index.
  kAsPrinted,
};

inline double ExactInteractionWeight(std::size_t s, std::size_t players, ExactWeighting w) {
  auto fact = [](std::size_t k) {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return f;
  };
  if (players < 2 || s + 2 > players) throw DomainError("exact weight needs |S| <= P - 2");
  if (w == ExactWeighting::kInteractionIndex) {
    return fact(s) * fact(players - s - 2) / fact(players - 1);
  }
  return fact(s) * fact(players - s - 1) / fact(players);
}

/// Exhaustive interaction over every span of the partition. One predictor
/// call per coalition, no batching, so it shares nothing with InteractionScore
/// beyond the predictor itself.
inline double ExactInteractionScore(Predictor& predictor, const TokenSequence& seq,
                                    const Partition& partition, const Span& left,
                                    const Span& right, std::size_t label,
                                    std::size_t exact_limit = kDefaultExactLimit,
                                    ExactWeighting weighting = ExactWeighting::kInteractionIndex) {
  detail::CheckPair(partition, left, right);
  const std::size_t players = partition.size();
  if (players > exact_limit) {
    throw CapacityError("partition of " + std::to_string(players) +
                        " spans exceeds the exact limit " + std::to_string(exact_limit));
  }
  std::vector<Span> others;
  for (const Span& s : partition) {
    if (s != left && s != right) others.push_back(s);
  }
  auto worth = [&](const std::vector<Span>& spans) {
    return predictor.PredictMasked(seq, PresenceOf(seq.size(), spans))[label];
  };
  long double total = 0.0L;
  const std::uint64_t subsets = std::uint64_t{1} << others.size();
  for (std::uint64_t bits = 0; bits < subsets; ++bits) {
    std::vector<Span> coalition;
    for (std::size_t k = 0; k < others.size(); ++k) {
      if (bits >> k & 1U) coalition.push_back(others[k]);
    }
    auto with_left = coalition;
    with_left.push_back(left);
    auto with_right = coalition;
    with_right.push_back(right);
    auto with_both = with_left;
    with_both.push_back(right);
    const long double g = static_cast<long double>(worth(with_both)) - worth(with_left) -
                          worth(with_right) + worth(coalition);
    total += ExactInteractionWeight(coalition.size(), players, weighting) * g;
  }
  return static_cast<double>(total);
}

/// Per-token Shapley values of v(S) = f_label(sequence masked to S).
inline std::vector<double> ExactShapleyValues(Predictor& predictor, const TokenSequence& seq,
                                              std::size_t label,
                                              std::size_t exact_limit = kDefaultExactLimit) {
  const std::size_t n = seq.size();
  if (n > exact_limit) {
    throw CapacityError("sequence of " + std::to_string(n) + " tokens exceeds the exact limit " +
                        std::to_string(exact_limit));
  }
  const std::uint64_t subsets = std::uint64_t{1} << n;
  std::vector<MaskRequest> req;
  req.reserve(subsets);
  for (std::uint64_t bits = 0; bits < subsets; ++bits) {
    Presence present(n);
    for (std::size_t i = 0; i < n; ++i) present[i] = bits >> i & 1U;
    req.push_back({&seq, std::move(present)});
  }
  const auto preds = predictor.PredictBatch(req);

  std::vector<long double> fact(n + 1, 1.0L);
  for (std::size_t k = 1; k <= n; ++k) fact[k] = fact[k - 1] * static_cast<long double>(k);

  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double acc = 0.0L;
    for (std::uint64_t bits = 0; bits < subsets; ++bits) {
      if (bits >> i & 1U) continue;
      const auto s = static_cast<std::size_t>(std::popcount(bits));
      const long double w = fact[s] * fact[n - s - 1] / fact[n];
      acc += w * (static_cast<long double>(preds[bits | (std::uint64_t{1} << i)][label]) -
                  preds[bits][label]);
    }
    phi[i] = static_cast<double>(acc);
  }
  return phi;
}

}  // namespace hedgekit
