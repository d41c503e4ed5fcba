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

// Hierarchical explanations. The top-down driver starts from the whole
// sequence and, at every timestep, splits the span whose weakest internal
// interaction is globally smallest; each new span is scored by how far its
// isolated prediction sits from the decision boundary. The bottom-up driver
// merges the most strongly interacting adjacent pair instead, and its merge
// sequence is reported in split order so both produce the same structure.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hedgekit/core.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/predictor.hpp"
#include "hedgekit/shapley.hpp"

namespace hedgekit {

struct CandidateScore {
  Span span;
  std::size_t j = 0;
  double phi = 0.0;

  friend bool operator==(const CandidateScore&, const CandidateScore&) = default;
};

struct TraceStep {
  std::size_t timestep = 0;
  Span span;  // the span that was split
  std::size_t j = 0;
  double phi = 0.0;
  std::vector<CandidateScore> candidates;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

enum class Variant { kTopDown, kBottomUp };

inline const char* ToString(Variant v) { return v == Variant::kTopDown ? "top-down" : "bottom-up"; }

struct Explanation {
  std::vector<std::string> tokens;
  Variant variant = Variant::kTopDown;
  std::size_t neighbors = kDefaultNeighbors;
  std::size_t predicted_class = 0;
  std::vector<double> prediction;  // unmasked class probabilities
  Hierarchy hierarchy;
  std::vector<Contribution> contributions;  // root first, then two per timestep
  std::vector<TraceStep> trace;

  std::size_t size() const noexcept { return tokens.size(); }

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

/// Thrown when the predictor fails mid-run; carries everything computed so far.
class PartialExplanationError : public Error {
 public:
  PartialExplanationError(Explanation partial, std::exception_ptr cause, const std::string& what)
      : Error("explanation aborted at timestep " + std::to_string(partial.trace.size() + 1) +
              ": " + what),
        partial_(std::move(partial)),
        cause_(std::move(cause)) {}

  const Explanation& partial() const noexcept { return partial_; }
  [[noreturn]] void RethrowCause() const { std::rethrow_exception(cause_); }

 private:
  Explanation partial_;
  std::exception_ptr cause_;
};

struct ExplainOptions {
  std::size_t neighbors = kDefaultNeighbors;
};

/// psi: f_label minus the best rival class, on the sequence masked to `span`.
inline double Importance(Predictor& predictor, const TokenSequence& seq, const Span& span,
                         std::size_t label) {
  return predictor.PredictMasked(seq, PresenceOf(seq.size(), span)).Margin(label);
}

namespace detail {

inline std::pair<Contribution, Contribution> ScoreHalves(Predictor& predictor,
                                                         const TokenSequence& seq, const Span& a,
                                                         const Span& b, std::size_t label,
                                                         std::size_t t) {
  std::vector<MaskRequest> req{{&seq, PresenceOf(seq.size(), a)}, {&seq, PresenceOf(seq.size(), b)}};
  auto preds = predictor.PredictBatch(req);
  return {Contribution{a, preds[0].Margin(label), t}, Contribution{b, preds[1].Margin(label), t}};
}

inline Explanation StartExplanation(Predictor& predictor, const TokenSequence& seq,
                                    Variant variant, std::size_t m) {
  Explanation e;
  e.tokens = seq.tokens();
  e.variant = variant;
  e.neighbors = m;
  const Prediction full = predictor.Predict(seq);
  e.predicted_class = full.ArgMax();
  e.prediction = full.probs;
  return e;
}

inline void Warm(Predictor& predictor, const std::vector<InteractionContext>& contexts) {
  if (!predictor.cache_enabled() || contexts.size() < 2) return;
  std::vector<MaskRequest> all;
  for (const auto& ctx : contexts) {
    auto req = InteractionRequests(ctx);
    all.insert(all.end(), std::make_move_iterator(req.begin()), std::make_move_iterator(req.end()));
  }
  predictor.PredictBatch(all);
}

}  // namespace detail

inline Explanation Explain(Predictor& predictor, const TokenSequence& seq,
                           const ExplainOptions& options = {}) {
  const std::size_t n = seq.size();
  Explanation e = detail::StartExplanation(predictor, seq, Variant::kTopDown, options.neighbors);
  const std::size_t label = e.predicted_class;
  Partition current = Partition::Whole(n);
  e.hierarchy.partitions.push_back(current);
  e.contributions.push_back({Span{0, n}, Importance(predictor, seq, Span{0, n}, label), 0});

  for (std::size_t t = 1; t < n; ++t) {
    try {
      const auto candidates = CandidateSplits(current);
      std::vector<InteractionContext> contexts;
      contexts.reserve(candidates.size());
      for (const auto& c : candidates) {
        contexts.push_back({&seq, SplitSpan(current, c.span, c.j), Span{c.span.start, c.j},
                            Span{c.j, c.span.end}, options.neighbors, label});
      }
      detail::Warm(predictor, contexts);

      TraceStep step;
      step.timestep = t;
      std::size_t best = 0;
      for (std::size_t k = 0; k < contexts.size(); ++k) {
        const double phi = InteractionScore(predictor, contexts[k]);
        step.candidates.push_back({candidates[k].span, candidates[k].j, phi});
        if (phi < step.candidates[best].phi) best = k;
      }
      step.span = candidates[best].span;
      step.j = candidates[best].j;
      step.phi = step.candidates[best].phi;

      auto [left, right] =
          detail::ScoreHalves(predictor, seq, contexts[best].left, contexts[best].right, label, t);
      current = std::move(contexts[best].partition);
      e.hierarchy.partitions.push_back(current);
      e.contributions.push_back(left);
      e.contributions.push_back(right);
      e.trace.push_back(std::move(step));
    } catch (const Error& err) {
      throw PartialExplanationError(e, std::current_exception(), err.what());
    }
  }
  return e;
}

inline Explanation ExplainBottomUp(Predictor& predictor, const TokenSequence& seq,
                                   const ExplainOptions& options = {}) {
  const std::size_t n = seq.size();
  Explanation e = detail::StartExplanation(predictor, seq, Variant::kBottomUp, options.neighbors);
  const std::size_t label = e.predicted_class;

  Partition current = Partition::Singletons(n);
  std::vector<Partition> merged_states{current};
  std::vector<TraceStep> merges;
  try {
    for (std::size_t step_no = 1; step_no < n; ++step_no) {
      std::vector<InteractionContext> contexts;
      for (std::size_t k = 0; k + 1 < current.size(); ++k) {
        contexts.push_back({&seq, current, current[k], current[k + 1], options.neighbors, label});
      }
      detail::Warm(predictor, contexts);

      TraceStep step;
      std::size_t best = 0;
      for (std::size_t k = 0; k < contexts.size(); ++k) {
        const double phi = InteractionScore(predictor, contexts[k]);
        const Span joined{contexts[k].left.start, contexts[k].right.end};
        step.candidates.push_back({joined, contexts[k].left.end, phi});
        if (phi > step.candidates[best].phi) best = k;
      }
      step.span = step.candidates[best].span;
      step.j = step.candidates[best].j;
      step.phi = step.candidates[best].phi;
      current = MergeSpans(current, contexts[best].left, contexts[best].right);
      merged_states.push_back(current);
      merges.push_back(std::move(step));
    }
  } catch (const Error& err) {
    e.trace = merges;
    throw PartialExplanationError(e, std::current_exception(), err.what());
  }

  // Reverse the merges: timestep t undoes merge number n - t.
  e.hierarchy.partitions.assign(merged_states.rbegin(), merged_states.rend());
  e.contributions.push_back({Span{0, n}, Importance(predictor, seq, Span{0, n}, label), 0});
  for (std::size_t t = 1; t < n; ++t) {
    TraceStep step = merges[n - 1 - t];
    step.timestep = t;
    auto [left, right] = detail::ScoreHalves(predictor, seq, Span{step.span.start, step.j},
                                             Span{step.j, step.span.end}, label, t);
    e.contributions.push_back(left);
    e.contributions.push_back(right);
    e.trace.push_back(std::move(step));
  }
  return e;
}

inline Explanation Explain(Predictor& predictor, const TokenSequence& seq, Variant variant,
                           const ExplainOptions& options = {}) {
  return variant == Variant::kTopDown ? Explain(predictor, seq, options)
                                      : ExplainBottomUp(predictor, seq, options);
}

/// Highest-psi non-root span no longer than `max_len`; earlier timestep, then
/// leftmost start, wins ties. A one-token explanation returns its root.
inline Contribution TopFeature(const Explanation& e, std::optional<std::size_t> max_len = {}) {
  if (e.contributions.empty()) throw DomainError("explanation has no contributions");
  const Contribution* best = nullptr;
  for (const auto& c : e.contributions) {
    if (c.timestep == 0 && e.contributions.size() > 1) continue;
    if (max_len && c.span.length() > *max_len) continue;
    if (!best || c.score > best->score ||
        (c.score == best->score &&
         (c.timestep < best->timestep ||
          (c.timestep == best->timestep && c.span.start < best->span.start)))) {
      best = &c;
    }
  }
  return best ? *best : e.contributions.front();
}

/// Token indices by descending singleton psi, ascending position on ties.
inline std::vector<std::size_t> WordRanking(const Explanation& e) {
  const std::size_t n = e.size();
  std::vector<double> psi(n, 0.0);
  std::vector<bool> seen(n, false);
  for (const auto& c : e.contributions) {
    if (c.span.length() == 1) {
      psi[c.span.start] = c.score;
      seen[c.span.start] = true;
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw StructuralError("explanation does not reach single tokens");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return psi[a] > psi[b]; });
  return order;
}

/// Hierarchy validity plus agreement of hierarchy, contributions and trace.
inline void ValidateExplanation(const Explanation& e) {
  const std::size_t n = e.size();
  ValidateHierarchy(e.hierarchy, n);
  if (e.trace.size() + 1 != n) throw StructuralError("trace length is not n - 1");
  if (e.contributions.size() != 2 * n - 1) throw StructuralError("wrong contribution count");
  if (e.contributions.front().span != Span{0, n} || e.contributions.front().timestep != 0) {
    throw StructuralError("first contribution is not the root");
  }
  for (std::size_t t = 1; t < n; ++t) {
    const auto& step = e.trace[t - 1];
    const Partition expected = SplitSpan(e.hierarchy.partitions[t - 1], step.span, step.j);
    if (expected != e.hierarchy.partitions[t]) {
      throw StructuralError("trace step " + std::to_string(t) + " disagrees with the hierarchy");
    }
    const auto& a = e.contributions[2 * t - 1];
    const auto& b = e.contributions[2 * t];
    if (a.timestep != t || b.timestep != t || a.span != Span{step.span.start, step.j} ||
        b.span != Span{step.j, step.span.end}) {
      throw StructuralError("contributions at timestep " + std::to_string(t) +
                            " are not the two new spans");
    }
  }
}

}  // namespace hedgekit
