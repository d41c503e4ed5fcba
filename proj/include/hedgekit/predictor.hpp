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

// Black-box classifier access. A Backend turns rendered token lists into
// probability vectors; the Predictor in front of it renders masked variants
// with the pad literal, validates every answer, memoizes, deduplicates, and
// counts how many sequences actually reached the backend.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hedgekit/core.hpp"
#include "hedgekit/error.hpp"

namespace hedgekit {

using TokenList = std::vector<std::string>;

/// Per-token membership flags; absent positions render as the pad literal.
using Presence = std::vector<bool>;

inline constexpr double kProbabilitySumTolerance = 1e-6;

struct Prediction {
  std::vector<double> probs;

  std::size_t num_classes() const noexcept { return probs.size(); }
  double operator[](std::size_t c) const { return probs[c]; }

  /// Lowest index wins ties.
  std::size_t ArgMax() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
      if (probs[c] > probs[best]) best = c;
    }
    return best;
  }

  /// probs[label] minus the largest probability of any other class.
  double Margin(std::size_t label) const {
    double rival = -1.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
      if (c != label && probs[c] > rival) rival = probs[c];
    }
    return probs[label] - rival;
  }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Throws ContractError unless `probs` is a distribution over `classes` (>= 2) classes.
inline void ValidateProbabilities(std::span<const double> probs, std::size_t classes) {
  if (probs.size() < 2 || (classes != 0 && probs.size() != classes)) {
    throw ContractError("expected " + std::to_string(classes) + " class probabilities, got " +
                        std::to_string(probs.size()));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ContractError("class probability " + std::to_string(p) + " outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw ContractError("class probabilities sum to " + std::to_string(sum));
  }
}

class Backend {
 public:
  virtual ~Backend() = default;

  /// One probability vector per input, positionally aligned.
  virtual std::vector<std::vector<double>> Evaluate(const std::vector<TokenList>& batch) = 0;

  /// 0 when unknown (checked only for internal consistency then).
  virtual std::size_t num_classes() const = 0;
};

inline TokenList Render(const TokenSequence& seq, const Presence& present, const std::string& pad) {
  if (present.size() != seq.size()) {
    throw DomainError("presence mask has " + std::to_string(present.size()) +
                      " entries for a sequence of " + std::to_string(seq.size()));
  }
  TokenList out;
  out.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) out.push_back(present[i] ? seq[i] : pad);
  return out;
}

/// Presence of exactly the tokens covered by `spans`.
inline Presence PresenceOf(std::size_t n, std::span<const Span> spans) {
  Presence present(n, false);
  for (const Span& s : spans) {
    for (std::size_t i = s.start; i < s.end; ++i) present[i] = true;
  }
  return present;
}

inline Presence PresenceOf(std::size_t n, const Span& span) {
  return PresenceOf(n, std::span<const Span>(&span, 1));
}

struct MaskRequest {
  const TokenSequence* seq;
  Presence present;
};

struct TokenListHash {
  std::size_t operator()(const TokenList& tokens) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens) {
      h ^= std::hash<std::string>{}(t) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

class Predictor {
 public:
  explicit Predictor(std::shared_ptr<Backend> backend, std::string pad = "<pad>",
                     bool cache_enabled = true)
      : backend_(std::move(backend)), pad_(std::move(pad)), cache_enabled_(cache_enabled) {
    if (!backend_) throw ConfigError("predictor needs a backend");
    if (pad_.empty()) throw ConfigError("pad literal must be non-empty");
  }

  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;

  const std::string& pad() const noexcept { return pad_; }
  bool cache_enabled() const noexcept { return cache_enabled_; }
  Backend& backend() const noexcept { return *backend_; }
  std::shared_ptr<Backend> shared_backend() const noexcept { return backend_; }

  /// Sequences sent to the backend so far (cache misses only).
  std::uint64_t evaluations() const noexcept { return evaluations_.load(); }

  Prediction PredictMasked(const TokenSequence& seq, const Presence& present) {
    return PredictTokens(RenderChecked(seq, present));
  }

  Prediction Predict(const TokenSequence& seq) {
    return PredictMasked(seq, Presence(seq.size(), true));
  }

  std::vector<Prediction> PredictBatch(std::span<const MaskRequest> requests) {
    std::vector<TokenList> rendered;
    rendered.reserve(requests.size());
    for (const auto& r : requests) rendered.push_back(RenderChecked(*r.seq, r.present));
    return PredictTokensBatch(rendered);
  }

  /// Unmasked token lists of any length; used where tokens are deleted or reordered.
  Prediction PredictTokens(const TokenList& tokens) {
    return PredictTokensBatch(std::vector<TokenList>{tokens}).front();
  }

  std::vector<Prediction> PredictTokensBatch(const std::vector<TokenList>& batch) {
    std::vector<const Prediction*> slots(batch.size(), nullptr);
    std::vector<TokenList> misses;
    std::unordered_map<TokenList, std::size_t, TokenListHash> miss_index;
    std::vector<std::size_t> slot_to_miss(batch.size(), 0);
    {
      std::lock_guard lock(mutex_);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (cache_enabled_) {
          if (auto it = cache_.find(batch[i]); it != cache_.end()) {
            slots[i] = &it->second;
            continue;
          }
        }
        auto [it, inserted] = miss_index.try_emplace(batch[i], misses.size());
        if (inserted) misses.push_back(batch[i]);
        slot_to_miss[i] = it->second;
      }
    }

    std::vector<Prediction> fresh;
    if (!misses.empty()) {
      auto raw = backend_->Evaluate(misses);
      if (raw.size() != misses.size()) {
        throw ProtocolError("backend returned " + std::to_string(raw.size()) +
                            " predictions for " + std::to_string(misses.size()) + " inputs");
      }
      evaluations_ += misses.size();
      fresh.reserve(raw.size());
      for (auto& probs : raw) {
        ValidateProbabilities(probs, backend_->num_classes());
        fresh.push_back(Prediction{std::move(probs)});
      }
    }

    std::vector<Prediction> out;
    out.reserve(batch.size());
    std::lock_guard lock(mutex_);
    if (cache_enabled_) {
      for (std::size_t k = 0; k < misses.size(); ++k) cache_.try_emplace(misses[k], fresh[k]);
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out.push_back(slots[i] ? *slots[i] : fresh[slot_to_miss[i]]);
    }
    return out;
  }

 private:
  TokenList RenderChecked(const TokenSequence& seq, const Presence& present) const {
    if (seq.Contains(pad_)) {
      throw DomainError("input already contains the pad literal '" + pad_ + "'");
    }
    TokenList out = Render(seq, present, pad_);
    if (out.size() != seq.size()) throw StructuralError("masked rendering changed the length");
    return out;
  }

  std::shared_ptr<Backend> backend_;
  std::string pad_;
  bool cache_enabled_;
  std::atomic<std::uint64_t> evaluations_{0};
  std::mutex mutex_;
  std::unordered_map<TokenList, Prediction, TokenListHash> cache_;
};

}  // namespace hedgekit
