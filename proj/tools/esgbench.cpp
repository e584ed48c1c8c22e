// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

// esgbench: prep, train, eval and report over a run registry.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "esgbench/bench.hpp"

namespace {

using esg::Error;
using esg::ErrorKind;
namespace bench = esg::bench;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

bench::KeyValues merged(const std::string& config_file, const std::vector<std::string>& sets) {
  bench::KeyValues kv;
  if (!config_file.empty()) kv = bench::load_key_values(config_file);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::BadFormat, "--set expects key=value, got '" + s + "'");
    }
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

void print_run(const bench::Registry& reg, const bench::RunRecord& r) {
  std::cout << r.id << '\n';
  std::cerr << "run " << r.id << " at " << reg.dir(r.id).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ESG text-classification benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out = "runs";
  app.add_option("--out", out, "Run registry directory")->capture_default_str();

  // prep
  auto* prep = app.add_subcommand("prep", "Split a labelled dataset into train/test/eval pool");
  std::string data, domain = "env";
  std::size_t synthetic = 0;
  std::uint64_t synthetic_seed = 1;
  esg::corpus::SplitConfig split_cfg;
  prep->add_option("--data", data, "CSV with text and label columns");
  prep->add_option("--synthetic", synthetic, "Generate a synthetic keyword corpus of this size instead");
  prep->add_option("--synthetic-seed", synthetic_seed)->capture_default_str();
  prep->add_option("--domain", domain, "env, soc or gov")->capture_default_str();
  prep->add_option("--seed", split_cfg.seed, "Split seed")->capture_default_str();
  prep->add_option("--train-size", split_cfg.train_size)->capture_default_str();
  prep->add_option("--test-size", split_cfg.test_size)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train svm, gbt or qlora on a prepared split");
  std::string kind, split, config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  train->add_option("--kind", kind, "svm, gbt or qlora")->required();
  train->add_option("--split", split, "Prep run id")->required();
  train->add_option("--config", config_file, "key = value file");
  train->add_option("--set", sets, "key=value override (repeatable)");
  train->add_option("--seed", seed, "Shorthand for --set seed=N");
  train->add_flag("--quiet", quiet, "No progress output");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a trained run or a baseline on the test partition");
  std::string model, partition = "test";
  eval->add_option("--model", model, "Train run id or baseline name")->required();
  eval->add_option("--split", split, "Prep run id")->required();
  eval->add_option("--partition", partition)->capture_default_str();
  eval->add_option("--config", config_file, "key = value generation settings");
  eval->add_option("--set", sets, "key=value override (repeatable)");
  eval->add_option("--seed", seed, "Shorthand for --set seed=N");

  // report
  auto* report = app.add_subcommand("report", "Comparison table over evaluated runs");
  std::vector<std::string> runs;
  std::optional<std::string> baseline;
  std::string format = "text";
  report->add_option("runs", runs, "Eval run ids (default: all)");
  report->add_option("--baseline", baseline, "Category for the improvement delta (classical, svm, xgboost, ...)");
  report->add_option("--format", format, "text, markdown or json")
      ->check(CLI::IsMember({"text", "markdown", "json"}))
      ->capture_default_str();

  auto* baselines = app.add_subcommand("baselines", "List registered baselines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const bench::Registry reg(out);
  try {
    if (seed) sets.push_back("seed=" + std::to_string(*seed));
    if (*prep) {
      if (data.empty() == (synthetic == 0)) {
        std::cerr << "esgbench prep: give exactly one of --data or --synthetic\n";
        return kUsage;
      }
      bench::PrepOptions o;
      if (!data.empty()) o.dataset = data;
      o.synthetic = synthetic;
      o.synthetic_seed = synthetic_seed;
      o.domain = esg::parse_domain(domain);
      o.split = split_cfg;
      print_run(reg, bench::cmd_prep(reg, o));
    } else if (*train) {
      bench::TrainOptions o;
      o.kind = bench::parse_model_kind(kind);
      o.split = split;
      o.overrides = merged(config_file, sets);
      o.progress = quiet ? nullptr : &std::cerr;
      print_run(reg, bench::cmd_train(reg, o));
    } else if (*eval) {
      bench::EvalOptions o;
      o.model = model;
      o.split = split;
      o.partition = partition;
      o.overrides = merged(config_file, sets);
      const auto r = bench::cmd_eval(reg, o);
      print_run(reg, r);
      std::cerr << reg.read_artifact(r.id, "confusion.txt");
    } else if (*report) {
      bench::ReportOptions o;
      o.runs = runs;
      o.baseline = baseline;
      const auto rep = bench::cmd_report(reg, o);
      if (format == "json") std::cout << rep.to_json().dump(2) << '\n';
      else if (format == "markdown") std::cout << rep.render_markdown();
      else std::cout << rep.render_text();
    } else if (*baselines) {
      for (const auto& b : bench::list_baselines()) {
        std::printf("%-18s %-12s %s\n", b.name.c_str(), b.available ? "available" : "unavailable", b.notes.c_str());
      }
    }
  } catch (const Error& e) {
    std::cerr << "esgbench: " << e.what() << '\n';
    return e.kind() == ErrorKind::NonFiniteLoss ? kFailure : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "esgbench: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
