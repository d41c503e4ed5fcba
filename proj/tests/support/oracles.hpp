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

// Test-only oracles. Nothing here goes through Predictor, the shapley module
// or the hedge module: the scoring rule, the interaction index and the
// divisive search are re-derived directly from their definitions, so
// agreement with the library is evidence rather than tautology.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hedgekit/builtin_model.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;

/// Definition of the builtin rule, written as a tiny state machine over the
/// token list: "carry" holds a token waiting to see whether it starts a bigram.
inline double Score(const hedgekit::BuiltinModel& m, const Tokens& tokens, const std::string& pad) {
  double s = 0.0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::string& a = tokens[i];
    if (a == pad) {
      i += 1;
      continue;
    }
    const bool has_next = i + 1 < tokens.size() && tokens[i + 1] != pad;
    const auto bigram = has_next ? m.bigrams.find({a, tokens[i + 1]}) : m.bigrams.end();
    if (bigram != m.bigrams.end()) {
      s += bigram->second;
      i += 2;
    } else {
      const auto u = m.unigrams.find(a);
      s += u == m.unigrams.end() ? 0.0 : u->second;
      i += 1;
    }
  }
  return s;
}

/// Two-class probabilities from the logistic form: p(pos) = 1 / (1 + e^{-2s}).
inline std::vector<double> Probs(const hedgekit::BuiltinModel& m, const Tokens& tokens,
                                 const std::string& pad = "<pad>") {
  const double pos = 1.0 / (1.0 + std::exp(-2.0 * Score(m, tokens, pad)));
  return {1.0 - pos, pos};
}

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using Spans = std::vector<std::pair<std::size_t, std::size_t>>;  // [start, end)

inline Tokens Mask(const Tokens& x, const Spans& shown, const std::string& pad = "<pad>") {
  Tokens out(x.size(), pad);
  for (const auto& [a, b] : shown) {
    for (std::size_t i = a; i < b; ++i) out[i] = x[i];
  }
  return out;
}

inline double Factorial(std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

inline std::size_t PredictedClass(const hedgekit::BuiltinModel& m, const Tokens& x) {
  const auto p = Probs(m, x);
  return p[1] > p[0] ? 1 : 0;
}

/// Shapley interaction of spans a and b over every span of `partition`.
inline double Interaction(const hedgekit::BuiltinModel& m, const Tokens& x, const Spans& partition,
                          std::size_t a, std::size_t b, std::size_t label) {
  Spans others;
  for (std::size_t k = 0; k < partition.size(); ++k) {
    if (k != a && k != b) others.push_back(partition[k]);
  }
  const std::size_t players = partition.size();
  double phi = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << others.size()); ++bits) {
    Spans s;
    for (std::size_t k = 0; k < others.size(); ++k) {
      if (bits >> k & 1U) s.push_back(others[k]);
    }
    Spans sa = s, sb = s, sab = s;
    sa.push_back(partition[a]);
    sb.push_back(partition[b]);
    sab.push_back(partition[a]);
    sab.push_back(partition[b]);
    const double gamma = Probs(m, Mask(x, sab))[label] - Probs(m, Mask(x, sa))[label] -
                         Probs(m, Mask(x, sb))[label] + Probs(m, Mask(x, s))[label];
    const double w = Factorial(s.size()) * Factorial(players - s.size() - 2) / Factorial(players - 1);
    phi += w * gamma;
  }
  return phi;
}

struct Step {
  std::size_t start, end, j;
  bool operator==(const Step&) const = default;
};

struct Reference {
  std::vector<Step> splits;
  std::vector<double> psi;  // root first, then left/right per step
};

/// The divisive search with every span of the candidate partition as context.
inline Reference Divisive(const hedgekit::BuiltinModel& m, const Tokens& x) {
  const std::size_t label = PredictedClass(m, x);
  auto psi = [&](std::size_t a, std::size_t b) {
    const auto p = Probs(m, Mask(x, {{a, b}}));
    return p[label] - p[1 - label];
  };
  Reference ref;
  ref.psi.push_back(psi(0, x.size()));
  Spans current{{0, x.size()}};
  while (current.size() < x.size()) {
    double best = INFINITY;
    Step choice{};
    std::size_t choice_index = 0;
    for (std::size_t k = 0; k < current.size(); ++k) {
      const auto [s, e] = current[k];
      for (std::size_t j = s + 1; j < e; ++j) {
        Spans post = current;
        post[k] = {s, j};
        post.insert(post.begin() + static_cast<std::ptrdiff_t>(k) + 1, {j, e});
        const double phi = Interaction(m, x, post, k, k + 1, label);
        if (phi < best) {
          best = phi;
          choice = {s, e, j};
          choice_index = k;
        }
      }
    }
    current[choice_index] = {choice.start, choice.j};
    current.insert(current.begin() + static_cast<std::ptrdiff_t>(choice_index) + 1,
                   {choice.j, choice.end});
    ref.splits.push_back(choice);
    ref.psi.push_back(psi(choice.start, choice.j));
    ref.psi.push_back(psi(choice.j, choice.end));
  }
  return ref;
}

/// Exact per-token Shapley values by summing marginal contributions.
inline std::vector<double> ShapleyValues(const hedgekit::BuiltinModel& m, const Tokens& x,
                                         std::size_t label) {
  const std::size_t n = x.size();
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
      if (bits >> i & 1U) continue;
      Spans s;
      for (std::size_t k = 0; k < n; ++k) {
        if (bits >> k & 1U) s.push_back({k, k + 1});
      }
      Spans si = s;
      si.push_back({i, i + 1});
      const double w = Factorial(s.size()) * Factorial(n - s.size() - 1) / Factorial(n);
      phi[i] += w * (Probs(m, Mask(x, si))[label] - Probs(m, Mask(x, s))[label]);
    }
  }
  return phi;
}

// ---- generators -----------------------------------------------------------

/// A random model over words w0..w{vocab-1} with Gaussian unigram weights and
/// `bigrams` random bigram overrides.
inline hedgekit::BuiltinModel RandomModel(std::mt19937_64& rng, std::size_t vocab,
                                          std::size_t bigrams, double uni_scale = 1.0,
                                          double bi_scale = 2.0) {
  std::normal_distribution<double> uni(0.0, uni_scale), bi(0.0, bi_scale);
  hedgekit::BuiltinModel m;
  for (std::size_t i = 0; i < vocab; ++i) m.unigrams["w" + std::to_string(i)] = uni(rng);
  std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
  while (m.bigrams.size() < bigrams) {
    m.bigrams[{"w" + std::to_string(pick(rng)), "w" + std::to_string(pick(rng))}] = bi(rng);
  }
  return m;
}

inline Tokens RandomSentence(std::mt19937_64& rng, std::size_t vocab, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
  Tokens out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(pick(rng)));
  return out;
}

/// Sentence that plants model bigrams with probability `plant`.
inline Tokens BigramRichSentence(std::mt19937_64& rng, const hedgekit::BuiltinModel& m,
                                 std::size_t vocab, std::size_t n, double plant = 0.5) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [k, w] : m.bigrams) pairs.push_back(k);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
  Tokens out;
  while (out.size() < n) {
    if (!pairs.empty() && out.size() + 2 <= n && coin(rng) < plant) {
      std::uniform_int_distribution<std::size_t> which(0, pairs.size() - 1);
      const auto& p = pairs[which(rng)];
      out.push_back(p.first);
      out.push_back(p.second);
    } else {
      out.push_back("w" + std::to_string(pick(rng)));
    }
  }
  return out;
}

/// The negation model used throughout: not:-0.5, bad:-2, (not, bad):+1.5.
inline hedgekit::BuiltinModel NegationModel() {
  hedgekit::BuiltinModel m;
  m.unigrams = {{"not", -0.5}, {"bad", -2.0}, {"a", 0.0}, {"movie", 0.0}};
  m.bigrams[{"not", "bad"}] = 1.5;
  return m;
}

}  // namespace oracle
