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

// Fidelity metrics for word rankings and top spans, and the word-level
// baselines they are compared against.
//
//   AOPC(k)      mean drop of p(y|x) after deleting the top k% words.
//   log-odds(r)  mean log(p(y|x~) / p(y|x)) after padding the top r% words.
//   cohesion(Q)  mean drop of p(y|x) after scattering the top span's words
//                back into the rest of the sentence at random positions.
//
// y is always the class predicted on the untouched input.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hedgekit/core.hpp"
#include "hedgekit/dataset.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/hedge.hpp"
#include "hedgekit/predictor.hpp"
#include "hedgekit/random.hpp"

namespace hedgekit {

inline constexpr double kLogOddsFloor = 1e-12;

using Ranking = std::vector<std::size_t>;

struct MetricRecord {
  std::string id;
  double before = 0.0;  // p(y|x)
  double after = 0.0;   // p(y|perturbed), averaged over perturbations for cohesion
  double value = 0.0;
  bool all_removed = false;  // AOPC fell back to the all-pad sequence
};

struct MetricResult {
  double mean = 0.0;
  std::vector<MetricRecord> records;
};

/// ceil(n * percent / 100), at least 1 and at most n.
inline std::size_t TopCount(std::size_t n, int percent) {
  if (percent <= 0 || percent > 100) {
    throw DomainError("percentage must be in (0, 100], got " + std::to_string(percent));
  }
  const std::size_t count = (n * static_cast<std::size_t>(percent) + 99) / 100;
  return std::clamp<std::size_t>(count, 1, n);
}

/// Indices by descending score, ascending position on ties.
inline Ranking RankByScore(const std::vector<double>& scores) {
  Ranking order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace detail {

inline void CheckRanking(const Ranking& r, std::size_t n) {
  if (r.size() != n) throw DomainError("ranking does not cover every token");
  std::vector<bool> seen(n, false);
  for (std::size_t i : r) {
    if (i >= n || seen[i]) throw DomainError("ranking is not a permutation of the tokens");
    seen[i] = true;
  }
}

inline double MeanOf(const std::vector<MetricRecord>& records) {
  if (records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : records) sum += r.value;
  return sum / static_cast<double>(records.size());
}

}  // namespace detail

inline MetricResult Aopc(Predictor& predictor, const Dataset& data,
                         const std::vector<Ranking>& rankings, int k) {
  if (rankings.size() != data.size()) throw DomainError("one ranking per example required");
  MetricResult out;
  for (std::size_t e = 0; e < data.size(); ++e) {
    const auto& seq = data[e].tokens;
    detail::CheckRanking(rankings[e], seq.size());
    const Prediction full = predictor.Predict(seq);
    const std::size_t y = full.ArgMax();
    const std::size_t drop = TopCount(seq.size(), k);

    MetricRecord rec{data[e].id, full[y], 0.0, 0.0, drop == seq.size()};
    if (rec.all_removed) {
      rec.after = predictor.PredictMasked(seq, Presence(seq.size(), false))[y];
    } else {
      std::vector<bool> removed(seq.size(), false);
      for (std::size_t i = 0; i < drop; ++i) removed[rankings[e][i]] = true;
      TokenList kept;
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (!removed[i]) kept.push_back(seq[i]);
      }
      rec.after = predictor.PredictTokens(kept)[y];
    }
    rec.value = rec.before - rec.after;
    out.records.push_back(std::move(rec));
  }
  out.mean = detail::MeanOf(out.records);
  return out;
}

inline MetricResult LogOdds(Predictor& predictor, const Dataset& data,
                            const std::vector<Ranking>& rankings, int r) {
  if (rankings.size() != data.size()) throw DomainError("one ranking per example required");
  MetricResult out;
  for (std::size_t e = 0; e < data.size(); ++e) {
    const auto& seq = data[e].tokens;
    detail::CheckRanking(rankings[e], seq.size());
    const Prediction full = predictor.Predict(seq);
    const std::size_t y = full.ArgMax();
    Presence present(seq.size(), true);
    const std::size_t masked = TopCount(seq.size(), r);
    for (std::size_t i = 0; i < masked; ++i) present[rankings[e][i]] = false;

    MetricRecord rec{data[e].id, full[y], predictor.PredictMasked(seq, present)[y], 0.0, false};
    rec.value = std::log(std::max(rec.after, kLogOddsFloor) / std::max(rec.before, kLogOddsFloor));
    out.records.push_back(std::move(rec));
  }
  out.mean = detail::MeanOf(out.records);
  return out;
}

/// Removes `span` and re-inserts its words one at a time, left to right, each at
/// a uniformly random position 0..size of the growing sequence.
inline TokenList ScatterSpan(const TokenSequence& seq, const Span& span, Rng& rng) {
  TokenList out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!span.contains(i)) out.push_back(seq[i]);
  }
  for (std::size_t i = span.start; i < span.end; ++i) {
    const auto pos = static_cast<std::ptrdiff_t>(rng.Below(out.size() + 1));
    out.insert(out.begin() + pos, seq[i]);
  }
  return out;
}

/// Cohesion of a given span per example; example e draws from stream e of `seed`.
inline MetricResult CohesionOfSpans(Predictor& predictor, const Dataset& data,
                                    const std::vector<Span>& spans, int perturbations,
                                    std::uint64_t seed) {
  if (spans.size() != data.size()) throw DomainError("one span per example required");
  if (perturbations < 1) throw DomainError("cohesion needs at least one perturbation");
  MetricResult out;
  for (std::size_t e = 0; e < data.size(); ++e) {
    const auto& seq = data[e].tokens;
    if (spans[e].end > seq.size() || spans[e].length() == 0) {
      throw DomainError("span " + ToString(spans[e]) + " is outside example " + data[e].id);
    }
    const Prediction full = predictor.Predict(seq);
    const std::size_t y = full.ArgMax();
    Rng rng(DeriveSeed(seed, e));
    std::vector<TokenList> shuffled;
    shuffled.reserve(static_cast<std::size_t>(perturbations));
    for (int q = 0; q < perturbations; ++q) shuffled.push_back(ScatterSpan(seq, spans[e], rng));
    const auto preds = predictor.PredictTokensBatch(shuffled);

    double drop = 0.0;
    double after = 0.0;
    for (const auto& p : preds) {
      drop += full[y] - p[y];
      after += p[y];
    }
    const auto q = static_cast<double>(perturbations);
    out.records.push_back({data[e].id, full[y], after / q, drop / q, false});
  }
  out.mean = detail::MeanOf(out.records);
  return out;
}

inline MetricResult Cohesion(Predictor& predictor, const Dataset& data,
                             const std::vector<Explanation>& explanations, int perturbations,
                             std::optional<std::size_t> max_len, std::uint64_t seed) {
  if (explanations.size() != data.size()) throw DomainError("one explanation per example required");
  std::vector<Span> spans;
  spans.reserve(explanations.size());
  for (const auto& e : explanations) spans.push_back(TopFeature(e, max_len).span);
  return CohesionOfSpans(predictor, data, spans, perturbations, seed);
}

/// p(y|x) - p(y|x with token i padded), per token.
inline std::vector<double> LeaveOneOutScores(Predictor& predictor, const TokenSequence& seq) {
  const Prediction full = predictor.Predict(seq);
  const std::size_t y = full.ArgMax();
  std::vector<MaskRequest> req;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Presence present(seq.size(), true);
    present[i] = false;
    req.push_back({&seq, std::move(present)});
  }
  const auto preds = predictor.PredictBatch(req);
  std::vector<double> scores(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) scores[i] = full[y] - preds[i][y];
  return scores;
}

inline Ranking LeaveOneOut(Predictor& predictor, const TokenSequence& seq) {
  return RankByScore(LeaveOneOutScores(predictor, seq));
}

/// Permutation-sampling Shapley estimates of v(S) = f_y(sequence masked to S).
inline std::vector<double> SampleShapleyValues(Predictor& predictor, const TokenSequence& seq,
                                               int samples, std::uint64_t seed) {
  if (samples < 1) throw DomainError("SampleShapley needs at least one sample");
  const std::size_t n = seq.size();
  const std::size_t y = predictor.Predict(seq).ArgMax();
  Rng rng(seed);
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> perm(n);

  constexpr int kChunk = 512;
  for (int done = 0; done < samples; done += kChunk) {
    const int count = std::min(kChunk, samples - done);
    std::vector<std::vector<std::size_t>> perms;
    std::vector<MaskRequest> req;
    req.reserve(static_cast<std::size_t>(count) * (n + 1));
    for (int s = 0; s < count; ++s) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.Shuffle(perm);
      Presence present(n, false);
      req.push_back({&seq, present});
      for (std::size_t k = 0; k < n; ++k) {
        present[perm[k]] = true;
        req.push_back({&seq, present});
      }
      perms.push_back(perm);
    }
    const auto preds = predictor.PredictBatch(req);
    for (int s = 0; s < count; ++s) {
      const std::size_t base = static_cast<std::size_t>(s) * (n + 1);
      for (std::size_t k = 0; k < n; ++k) {
        sum[perms[static_cast<std::size_t>(s)][k]] += preds[base + k + 1][y] - preds[base + k][y];
      }
    }
  }
  for (double& v : sum) v /= static_cast<double>(samples);
  return sum;
}

inline Ranking SampleShapley(Predictor& predictor, const TokenSequence& seq, int samples,
                             std::uint64_t seed) {
  return RankByScore(SampleShapleyValues(predictor, seq, samples, seed));
}

/// Uniform random ranking; the statistical floor for AOPC and log-odds.
inline Ranking RandomRanking(std::size_t n, std::uint64_t seed) {
  Ranking r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(r);
  return r;
}

}  // namespace hedgekit
