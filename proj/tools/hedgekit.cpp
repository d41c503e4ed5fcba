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

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "hedgekit/commands.hpp"
#include "hedgekit/config.hpp"

namespace {

struct Flags {
  std::string config_file;
  std::string predictor;
  std::string pad;
  std::size_t m = 0;
  std::vector<int> k;
  std::vector<int> r;
  int q = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string variant;
  std::string render;
  std::string palette;
  std::string out;
  std::size_t exact_limit = 0;
  std::size_t max_len = 0;
  int jobs = 0;
};

void AddCommonFlags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "JSON config file (overrides $HEDGE_KIT_CONFIG)");
  cmd->add_option("--predictor", f.predictor, "builtin:<path> | subprocess:<cmd> | http:<url>");
  cmd->add_option("--pad", f.pad, "pad literal for masked positions");
  cmd->add_option("--m", f.m, "neighbour spans per side");
  cmd->add_option("--exact-limit", f.exact_limit, "largest partition the exact oracles enumerate");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--q", f.q, "cohesion perturbations per example");
  cmd->add_option("--jobs", f.jobs, "worker threads over examples");
  cmd->add_option("--out", f.out, "output directory");
}

hedgekit::Config Resolve(const CLI::App& cmd, const Flags& f) {
  hedgekit::Config c = f.config_file.empty() ? hedgekit::ConfigFromEnvironment()
                                             : hedgekit::LoadConfigFile(f.config_file);
  auto given = [&](const char* name) {
    const CLI::Option* opt = cmd.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--predictor")) c.predictor = f.predictor;
  if (given("--pad")) c.pad = f.pad;
  if (given("--m")) c.m = f.m;
  if (given("--k")) c.k = f.k;
  if (given("--r")) c.r = f.r;
  if (given("--q")) c.q = f.q;
  if (given("--samples")) c.samples = f.samples;
  if (given("--seed")) c.seed = f.seed;
  if (given("--variant")) c.variant = f.variant;
  if (given("--render")) c.render = f.render;
  if (given("--palette")) c.palette = f.palette;
  if (given("--out")) c.out = f.out;
  if (given("--exact-limit")) c.exact_limit = f.exact_limit;
  if (given("--max-len")) c.max_len = f.max_len;
  if (given("--jobs")) c.jobs = f.jobs;
  if (c.predictor.empty()) throw hedgekit::ConfigError("no --predictor given");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hedgekit: hierarchical explanations for black-box text classifiers"};
  app.require_subcommand(1);
  Flags f;
  std::string dataset;
  std::vector<std::string> methods{"hedge", "random"};

  auto* explain = app.add_subcommand("explain", "explain every example of a JSON-lines dataset");
  explain->add_option("dataset", dataset, "JSON-lines dataset")->required();
  AddCommonFlags(explain, f);
  explain->add_option("--variant", f.variant, "top-down | bottom-up");
  explain->add_option("--render", f.render, "also render each explanation: html | svg | json");
  explain->add_option("--palette", f.palette, "red-green | colorblind");

  auto* evaluate = app.add_subcommand("evaluate", "AOPC, log-odds and cohesion for several methods");
  evaluate->add_option("dataset", dataset, "JSON-lines dataset")->required();
  AddCommonFlags(evaluate, f);
  evaluate->add_option("--methods", methods,
                       "hedge, hedge-bottom-up, leave-one-out, sample-shapley, random")
      ->delimiter(',');
  evaluate->add_option("--k", f.k, "AOPC deletion percentage (repeatable)");
  evaluate->add_option("--r", f.r, "log-odds masking percentage (repeatable)");
  evaluate->add_option("--samples", f.samples, "SampleShapley permutations");
  evaluate->add_option("--max-len", f.max_len, "longest top span considered for cohesion (0 = any)");

  auto* selftest = app.add_subcommand("selftest", "oracle and axiom checks against the predictor");
  selftest->add_option("--dataset", dataset, "optional dataset to draw short sentences from");
  AddCommonFlags(selftest, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hedgekit::kExitUsage;
  }

  try {
    if (*explain) return hedgekit::CmdExplain(Resolve(*explain, f), dataset, std::cout);
    if (*evaluate) return hedgekit::CmdEvaluate(Resolve(*evaluate, f), dataset, methods, std::cout);
    return hedgekit::CmdSelftest(Resolve(*selftest, f), dataset, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "hedgekit: " << e.what() << '\n';
    return hedgekit::ExitCodeFor(std::current_exception());
  }
}
