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

// The explain / evaluate / selftest commands behind the hedgekit CLI.
//
// Exit codes: 0 success, 2 usage or input error, 3 backend error,
// 4 internal invariant violation.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hedgekit/config.hpp"
#include "hedgekit/core.hpp"
#include "hedgekit/dataset.hpp"
#include "hedgekit/error.hpp"
#include "hedgekit/hedge.hpp"
#include "hedgekit/json_io.hpp"
#include "hedgekit/metrics.hpp"
#include "hedgekit/predictor.hpp"
#include "hedgekit/random.hpp"
#include "hedgekit/render.hpp"
#include "hedgekit/shapley.hpp"

namespace hedgekit {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitBackend = 3,
  kExitInvariant = 4,
};

/// Maps an in-flight exception to the documented exit code.
inline int ExitCodeFor(std::exception_ptr ex) {
  try {
    std::rethrow_exception(ex);
  } catch (const PartialExplanationError& e) {
    try {
      e.RethrowCause();
    } catch (...) {
      return ExitCodeFor(std::current_exception());
    }
  } catch (const TransportError&) {
    return kExitBackend;
  } catch (const ProtocolError&) {
    return kExitBackend;
  } catch (const ContractError&) {
    return kExitBackend;
  } catch (const ConfigError&) {
    return kExitUsage;
  } catch (const DomainError&) {
    return kExitUsage;
  } catch (const CapacityError&) {
    return kExitUsage;
  } catch (...) {
    return kExitInvariant;
  }
  return kExitInvariant;
}

inline std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

inline std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(0, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary file and a rename so readers never see half a file.
inline void WriteFileAtomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp);
    out << content;
    if (!out) throw ConfigError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. The exception of
/// the lowest failing index is rethrown after every worker stops.
inline void ParallelFor(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed && (i = next++) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const auto width = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct LoadedDataset {
  std::string path;
  std::string sha256;
  Dataset examples;
};

inline LoadedDataset LoadDataset(const std::string& path, const std::string& pad) {
  const std::string bytes = ReadFileBytes(path);
  std::istringstream in(bytes);
  return {path, Sha256Hex(bytes), ReadDataset(in, pad)};
}

inline ojson DatasetStamp(const LoadedDataset& d) {
  return ojson{{"path", d.path}, {"sha256", d.sha256}, {"examples", d.examples.size()}};
}

inline std::string SafeFileStem(std::size_t index, const std::string& id) {
  char prefix[16];
  std::snprintf(prefix, sizeof(prefix), "%05zu-", index);
  std::string stem = prefix;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    stem += ok ? c : '_';
  }
  return stem;
}

inline RenderSpec RenderSpecFor(const Config& c) {
  RenderSpec spec;
  spec.format = ParseRenderFormat(c.render.empty() ? "html" : c.render);
  spec.palette = c.palette == "colorblind" ? Palette::kColorblind : Palette::kRedGreen;
  return spec;
}

/// One explanation JSON per example (+ optional rendering), manifest.json with
/// per-example predictor evaluation counts, timings.json with wall times.
inline int CmdExplain(const Config& config, const std::string& dataset_path, std::ostream& log) {
  ValidateConfig(config);
  const LoadedDataset data = LoadDataset(dataset_path, config.pad);
  auto backend = MakeBackend(config);
  const Variant variant = ParseVariant(config.variant);
  const std::filesystem::path out_dir(config.out);
  const ojson effective = ArtifactConfigJson(config);
  const ojson stamp = DatasetStamp(data);

  const std::size_t count = data.examples.size();
  std::vector<std::uint64_t> evaluations(count);
  std::vector<double> wall_ms(count);
  std::vector<std::string> files(count);

  ParallelFor(count, config.jobs, [&](std::size_t i) {
    const Example& ex = data.examples[i];
    Predictor predictor(backend, config.pad);
    const auto t0 = std::chrono::steady_clock::now();
    const Explanation e = Explain(predictor, ex.tokens, variant, ExplainOptions{config.m});
    const auto t1 = std::chrono::steady_clock::now();
    ValidateExplanation(e);
    evaluations[i] = predictor.evaluations();
    wall_ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();

    const std::string stem = SafeFileStem(i, ex.id);
    files[i] = stem + ".json";
    ojson doc{{"config", effective},
              {"dataset", stamp},
              {"example_id", ex.id},
              {"explanation", ExplanationToJson(e)}};
    WriteFileAtomic(out_dir / files[i], CanonicalDump(doc) + "\n");
    if (!config.render.empty()) {
      const RenderSpec spec = RenderSpecFor(config);
      if (spec.format != RenderFormat::kJson) {
        std::string body = Render(e, spec);
        body += "<!-- config " + CanonicalDump(effective, -1) + " dataset " + data.sha256 +
                " -->\n";
        WriteFileAtomic(out_dir / (stem + "." + Extension(spec.format)), body);
      }
    }
  });

  ojson examples = ojson::array();
  ojson timings = ojson::array();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    total += evaluations[i];
    examples.push_back({{"id", data.examples[i].id},
                        {"file", files[i]},
                        {"tokens", data.examples[i].tokens.size()},
                        {"evaluations", evaluations[i]}});
    timings.push_back({{"id", data.examples[i].id}, {"wall_ms", wall_ms[i]}});
  }
  ojson manifest{{"config", effective},
                 {"dataset", stamp},
                 {"variant", config.variant},
                 {"total_evaluations", total},
                 {"examples", std::move(examples)}};
  WriteFileAtomic(out_dir / "manifest.json", CanonicalDump(manifest) + "\n");
  WriteFileAtomic(out_dir / "timings.json",
                  CanonicalDump(ojson{{"config", effective}, {"dataset", stamp},
                                      {"examples", std::move(timings)}}) +
                      "\n");
  log << "explained " << count << " example(s) into " << out_dir.string() << " (" << total
      << " predictor evaluations)\n";
  return kExitOk;
}

inline const std::vector<std::string>& KnownMethods() {
  static const std::vector<std::string> methods{"hedge", "hedge-bottom-up", "leave-one-out",
                                                "sample-shapley", "random"};
  return methods;
}

struct EvaluationOptions {
  std::vector<std::string> methods{"hedge", "random"};
  std::vector<int> k{20};
  std::vector<int> r{20};
  int q = 100;
  int samples = 100;
  std::uint64_t seed = 1;
  std::size_t m = kDefaultNeighbors;
  std::size_t max_len = 0;
  int jobs = 1;
};

struct MethodScores {
  std::string name;
  std::vector<Ranking> rankings;
  std::vector<MetricResult> aopc;      // one per k
  std::vector<MetricResult> log_odds;  // one per r
  std::optional<MetricResult> cohesion;
};

/// Rankings and metric results for every requested method.
inline std::vector<MethodScores> EvaluateMethods(Predictor& predictor, const Dataset& data,
                                                 const EvaluationOptions& opt) {
  std::vector<MethodScores> out;
  for (const auto& name : opt.methods) {
    const auto known = std::find(KnownMethods().begin(), KnownMethods().end(), name);
    if (known == KnownMethods().end()) throw ConfigError("unknown method '" + name + "'");
    const auto salt = static_cast<std::uint64_t>(known - KnownMethods().begin());
    const std::uint64_t method_seed = DeriveSeed(opt.seed, salt);

    MethodScores scores;
    scores.name = name;
    scores.rankings.resize(data.size());
    const bool hierarchical = name == "hedge" || name == "hedge-bottom-up";
    std::vector<Explanation> explanations(hierarchical ? data.size() : 0);
    ParallelFor(data.size(), opt.jobs, [&](std::size_t e) {
      const auto& seq = data[e].tokens;
      if (hierarchical) {
        const Variant v = name == "hedge" ? Variant::kTopDown : Variant::kBottomUp;
        explanations[e] = Explain(predictor, seq, v, ExplainOptions{opt.m});
        scores.rankings[e] = WordRanking(explanations[e]);
      } else if (name == "leave-one-out") {
        scores.rankings[e] = LeaveOneOut(predictor, seq);
      } else if (name == "sample-shapley") {
        scores.rankings[e] = SampleShapley(predictor, seq, opt.samples, DeriveSeed(method_seed, e));
      } else {
        scores.rankings[e] = RandomRanking(seq.size(), DeriveSeed(method_seed, e));
      }
    });
    for (int k : opt.k) scores.aopc.push_back(Aopc(predictor, data, scores.rankings, k));
    for (int r : opt.r) scores.log_odds.push_back(LogOdds(predictor, data, scores.rankings, r));
    if (hierarchical) {
      std::optional<std::size_t> cap;
      if (opt.max_len > 0) cap = opt.max_len;
      scores.cohesion = Cohesion(predictor, data, explanations, opt.q, cap, DeriveSeed(method_seed, ~0ULL));
    }
    out.push_back(std::move(scores));
  }
  return out;
}

inline std::string FormatTable(const std::vector<MethodScores>& methods,
                               const EvaluationOptions& opt) {
  std::vector<std::string> header{"method"};
  for (int k : opt.k) header.push_back("AOPC(" + std::to_string(k) + ")");
  for (int r : opt.r) header.push_back("log-odds(" + std::to_string(r) + ")");
  header.push_back("cohesion");
  std::vector<std::vector<std::string>> rows{header};
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  for (const auto& m : methods) {
    std::vector<std::string> row{m.name};
    for (const auto& a : m.aopc) row.push_back(num(a.mean));
    for (const auto& l : m.log_odds) row.push_back(num(l.mean));
    row.push_back(m.cohesion ? num(m.cohesion->mean) : "-");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const auto& cell = rows[i][c];
      if (c == 0) {
        out += cell + std::string(width[c] - cell.size(), ' ');
      } else {
        out += "  " + std::string(width[c] - cell.size(), ' ') + cell;
      }
    }
    out += '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

inline ojson ReportJson(const std::vector<MethodScores>& methods, const Dataset& data,
                        const EvaluationOptions& opt) {
  ojson out = ojson::array();
  for (const auto& m : methods) {
    ojson aopc = ojson::object();
    for (std::size_t i = 0; i < opt.k.size(); ++i) aopc[std::to_string(opt.k[i])] = m.aopc[i].mean;
    ojson log_odds = ojson::object();
    for (std::size_t i = 0; i < opt.r.size(); ++i) {
      log_odds[std::to_string(opt.r[i])] = m.log_odds[i].mean;
    }
    ojson records = ojson::array();
    for (std::size_t e = 0; e < data.size(); ++e) {
      ojson ra = ojson::object();
      for (std::size_t i = 0; i < opt.k.size(); ++i) {
        ra[std::to_string(opt.k[i])] = m.aopc[i].records[e].value;
      }
      ojson rl = ojson::object();
      for (std::size_t i = 0; i < opt.r.size(); ++i) {
        rl[std::to_string(opt.r[i])] = m.log_odds[i].records[e].value;
      }
      ojson rec{{"id", data[e].id}, {"ranking", m.rankings[e]}, {"aopc", ra}, {"log_odds", rl}};
      if (m.cohesion) rec["cohesion"] = m.cohesion->records[e].value;
      records.push_back(std::move(rec));
    }
    ojson entry{{"method", m.name}, {"aopc", aopc}, {"log_odds", log_odds}};
    entry["cohesion"] = m.cohesion ? ojson(m.cohesion->mean) : ojson(nullptr);
    entry["records"] = std::move(records);
    out.push_back(std::move(entry));
  }
  return out;
}

inline int CmdEvaluate(const Config& config, const std::string& dataset_path,
                       const std::vector<std::string>& methods, std::ostream& log) {
  ValidateConfig(config);
  for (const auto& m : methods) {
    if (std::find(KnownMethods().begin(), KnownMethods().end(), m) == KnownMethods().end()) {
      throw ConfigError("unknown method '" + m + "'");
    }
  }
  const LoadedDataset data = LoadDataset(dataset_path, config.pad);
  Predictor predictor(MakeBackend(config), config.pad);
  EvaluationOptions opt;
  opt.methods = methods;
  opt.k = config.k;
  opt.r = config.r;
  opt.q = config.q;
  opt.samples = config.samples;
  opt.seed = config.seed;
  opt.m = config.m;
  opt.max_len = config.max_len;
  opt.jobs = config.jobs;
  const auto scores = EvaluateMethods(predictor, data.examples, opt);
  const std::string table = FormatTable(scores, opt);

  const ojson effective = ArtifactConfigJson(config);
  ojson report{{"config", effective},
               {"dataset", DatasetStamp(data)},
               {"methods", ReportJson(scores, data.examples, opt)},
               {"table", table}};
  const std::filesystem::path out_dir(config.out);
  WriteFileAtomic(out_dir / "report.json", CanonicalDump(report) + "\n");
  WriteFileAtomic(out_dir / "report.txt", "# config " + CanonicalDump(effective, -1) +
                                              "\n# dataset " + data.path + " sha256 " +
                                              data.sha256 + "\n" + table);
  log << table;
  return kExitOk;
}

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

/// Sentences of at most `max_len` tokens to run the oracle suites on.
inline std::vector<TokenSequence> SelftestSentences(const Config& config, const Backend& backend,
                                                    const Dataset* data, std::size_t max_len) {
  std::vector<TokenSequence> out;
  if (data) {
    for (const auto& ex : *data) {
      if (ex.tokens.size() <= max_len) out.push_back(ex.tokens);
      if (out.size() == 8) return out;
    }
    if (!out.empty()) return out;
  }
  if (const auto* builtin = dynamic_cast<const BuiltinBackend*>(&backend)) {
    std::vector<std::string> vocab;
    for (const auto& [tok, w] : builtin->model().unigrams) vocab.push_back(tok);
    for (const auto& [key, w] : builtin->model().bigrams) {
      vocab.push_back(key.first);
      vocab.push_back(key.second);
    }
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    if (!vocab.empty()) {
      Rng rng(config.seed);
      for (std::size_t n = 1; n <= max_len; ++n) {
        std::vector<std::string> tokens;
        for (std::size_t i = 0; i < n; ++i) tokens.push_back(vocab[rng.Below(vocab.size())]);
        out.emplace_back(std::move(tokens));
      }
      // Keep every bigram of the model in play.
      for (const auto& [key, w] : builtin->model().bigrams) {
        out.emplace_back(std::vector<std::string>{vocab[rng.Below(vocab.size())], key.first,
                                                  key.second, vocab[rng.Below(vocab.size())]});
        if (out.size() >= 12) break;
      }
      return out;
    }
  }
  out.push_back(TokenSequence::FromText("the movie is not bad"));
  out.push_back(TokenSequence::FromText("a waste of good performance"));
  out.push_back(TokenSequence::FromText("great"));
  return out;
}

}  // namespace detail

/// Oracle and axiom checks against the configured predictor. Exit 0 when
/// every check passes, 4 when one fails.
inline int CmdSelftest(const Config& config, const std::string& dataset_path, std::ostream& log,
                       std::shared_ptr<Backend> backend = nullptr) {
  ValidateConfig(config);
  std::optional<LoadedDataset> data;
  if (!dataset_path.empty()) data = LoadDataset(dataset_path, config.pad);
  if (!backend) backend = MakeBackend(config);
  constexpr std::size_t kMaxTokens = 6;
  const auto sentences =
      detail::SelftestSentences(config, *backend, data ? &data->examples : nullptr, kMaxTokens);

  std::vector<SelftestCheck> checks;
  auto record = [&](const std::string& name, const std::function<std::string()>& body) {
    SelftestCheck c{name, false, ""};
    const std::string failure = body();
    c.passed = failure.empty();
    c.detail = failure;
    checks.push_back(c);
  };

  Predictor predictor(backend, config.pad);

  record("efficiency-axiom", [&]() -> std::string {
    for (const auto& seq : sentences) {
      const std::size_t y = predictor.Predict(seq).ArgMax();
      const auto phi = ExactShapleyValues(predictor, seq, y, config.exact_limit);
      double sum = 0.0;
      for (double v : phi) sum += v;
      const double expected =
          predictor.Predict(seq)[y] - predictor.PredictMasked(seq, Presence(seq.size(), false))[y];
      if (std::abs(sum - expected) > 1e-10) {
        return "sum of Shapley values " + FormatDouble(sum) + " != " + FormatDouble(expected) +
               " on '" + seq.Join(0, seq.size()) + "'";
      }
    }
    return "";
  });

  record("exact-vs-approximate-interaction", [&]() -> std::string {
    for (const auto& seq : sentences) {
      const std::size_t n = seq.size();
      if (n < 2) continue;
      const std::size_t y = predictor.Predict(seq).ArgMax();
      // Every candidate of the first two timesteps, with N_m covering everything.
      std::vector<Partition> parents{Partition::Whole(n)};
      if (n >= 3) parents.push_back(SplitSpan(parents[0], Span{0, n}, n / 2));
      for (const auto& parent : parents) {
        for (const auto& c : CandidateSplits(parent)) {
          const Partition post = SplitSpan(parent, c.span, c.j);
          const Span a{c.span.start, c.j}, b{c.j, c.span.end};
          const double approx = InteractionScore(predictor, {&seq, post, a, b, n, y});
          const double exact = ExactInteractionScore(predictor, seq, post, a, b, y, config.exact_limit);
          if (std::abs(approx - exact) > 1e-12) {
            return "split " + ToString(c.span) + "@" + std::to_string(c.j) + " of '" +
                   seq.Join(0, n) + "': " + FormatDouble(approx) + " vs " + FormatDouble(exact);
          }
        }
      }
    }
    return "";
  });

  record("hierarchy-validity", [&]() -> std::string {
    for (const auto& seq : sentences) {
      for (Variant v : {Variant::kTopDown, Variant::kBottomUp}) {
        try {
          ValidateExplanation(Explain(predictor, seq, v, ExplainOptions{config.m}));
        } catch (const StructuralError& e) {
          return std::string(ToString(v)) + " on '" + seq.Join(0, seq.size()) + "': " + e.what();
        }
      }
    }
    return "";
  });

  const auto* builtin = dynamic_cast<const BuiltinBackend*>(backend.get());
  if (builtin) {
    record("bag-of-words-cohesion", [&]() -> std::string {
      Predictor unigram(std::make_shared<BuiltinBackend>(builtin->model().UnigramProjection(), config.pad),
                        config.pad);
      Dataset ds;
      std::vector<Span> spans;
      for (const auto& seq : sentences) {
        for (std::size_t a = 0; a < seq.size(); ++a) {
          for (std::size_t b = a + 1; b <= seq.size(); ++b) {
            ds.push_back({"s", seq, std::nullopt});
            spans.push_back({a, b});
          }
        }
      }
      const auto res = CohesionOfSpans(unigram, ds, spans, config.q, config.seed);
      for (std::size_t i = 0; i < res.records.size(); ++i) {
        if (std::abs(res.records[i].value) > 1e-12) {
          return "span " + ToString(spans[i]) + " has cohesion " + FormatDouble(res.records[i].value);
        }
      }
      return "";
    });
  }

  bool ok = true;
  for (const auto& c : checks) {
    log << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed) log << ": " << c.detail;
    log << '\n';
    ok = ok && c.passed;
  }
  if (!builtin) log << "SKIP bag-of-words-cohesion (needs a builtin model)\n";
  log << (ok ? "selftest passed" : "selftest FAILED") << " on " << sentences.size()
      << " sentence(s), m=" << config.m << '\n';
  return ok ? kExitOk : kExitInvariant;
}

}  // namespace hedgekit
