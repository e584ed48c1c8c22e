// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "esgbench/bench.hpp"
#include "esgbench/synthetic.hpp"
#include "oracles.hpp"
#include "reference_results.hpp"

using namespace esg;
using namespace esg::bench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "esgbench_bench_XXXXXX").string();
    path = ::mkdtemp(tmpl.data());
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no esg::Error thrown");
  return ErrorKind::InvalidConfig;
}

RunRecord small_split(const Registry& reg, Domain d = Domain::Environmental, std::size_t train = 40,
                      std::size_t test = 20) {
  PrepOptions o;
  o.synthetic = 200;
  o.domain = d;
  o.split.train_size = train;
  o.split.test_size = test;
  return cmd_prep(reg, o);
}

std::vector<corpus::LabeledExample> test_part(const Registry& reg, const RunRecord& split) {
  return corpus::parse_examples(reg.read_artifact(split.id, "test.csv"),
                                parse_domain(split.config.at("domain").get<std::string>()));
}

}  // namespace

TEST_CASE("key-value config: comments, quotes, overrides and line numbers") {
  const auto kv = parse_key_values("# header\nlora_alpha = 16\n\n  lora_r=64  # trailing\noptim = \"paged_adamw_32bit\"\n"
                                   "lora_r = 8\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("lora_alpha") == "16");
  CHECK(kv.at("lora_r") == "8");
  CHECK(kv.at("optim") == "paged_adamw_32bit");
  try {
    parse_key_values("a = 1\nno equals here\n");
    FAIL("accepted a line without '='");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadFormat);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(kind_of([] { parse_key_values("= 3\n"); }) == ErrorKind::BadFormat);
  CHECK(kind_of([] { load_key_values("/nonexistent/esgbench.cfg"); }) == ErrorKind::MissingInput);
}

TEST_CASE("format_cell drops trailing zeros but keeps one decimal") {
  CHECK(format_cell(0.91) == "0.91");
  CHECK(format_cell(0.6) == "0.6");
  CHECK(format_cell(0.60000001) == "0.6");
  CHECK(format_cell(0.1) == "0.1");
  CHECK(format_cell(1.0) == "1.0");
  CHECK(format_cell(0.0) == "0.0");
  CHECK(format_cell(0.333333) == "0.33");
  CHECK(format_cell(0.996) == "1.0");
  CHECK(format_cell(0.125) == "0.12");
  CHECK(format_cell(-0.0001) == "0.0");
}

TEST_CASE("prep: default sizes, replayed ids and missing input") {
  TempDir tmp;
  const Registry reg(tmp.path);
  const auto path = tmp.path / "environmental_2k.csv";
  {
    std::ofstream out(path);
    corpus::write_csv(out, synthetic::keyword_corpus(Domain::Environmental, 2000, 3));
  }
  PrepOptions o;
  o.dataset = path;
  const auto a = cmd_prep(reg, o);
  CHECK(a.meta.at("sizes") == Json({{"train", 250}, {"test", 250}, {"eval_pool", 1500}}));
  CHECK(a.meta.at("labels").at("test") == Json({{"0", 125}, {"1", 125}}));
  CHECK(a.inputs.at("dataset_sha256").get<std::string>().size() == 64);
  CHECK(a.source_revision == source_revision());
  CHECK(fs::exists(reg.dir(a.id) / "train.csv"));
  CHECK(fs::exists(reg.dir(a.id) / "manifest.json"));

  const auto b = cmd_prep(reg, o);
  CHECK(b.id == a.id);
  CHECK(b.created_at == a.created_at);

  o.split.seed = 11;
  CHECK(cmd_prep(reg, o).id != a.id);

  o.dataset = tmp.path / "missing.csv";
  CHECK(kind_of([&] { cmd_prep(reg, o); }) == ErrorKind::MissingInput);
  CHECK(kind_of([&] { cmd_prep(reg, PrepOptions{}); }) == ErrorKind::MissingInput);
}

TEST_CASE("registry: immutable records, atomic publish, sorted listing") {
  TempDir tmp;
  const Registry reg(tmp.path / "runs");
  RunRecord r;
  r.command = "eval";
  r.config = {{"x", 1}};
  r.inputs = {{"y", 2}};
  const auto a = reg.commit(r, {{"note.txt", "first"}});
  CHECK(a.id == run_id("eval", r.config, r.inputs));
  CHECK(a.artifacts == std::vector<std::string>{"note.txt"});
  r.meta = {{"different", true}};
  const auto b = reg.commit(r, {{"note.txt", "second"}});
  CHECK(b.id == a.id);
  CHECK(reg.read_artifact(a.id, "note.txt") == "first");
  CHECK(b.meta.is_null());

  r.config = {{"x", 0}};
  reg.commit(r, {});
  const auto all = reg.list();
  REQUIRE(all.size() == 2);
  CHECK(all[0].id < all[1].id);
  for (const auto& e : fs::directory_iterator(reg.root())) {
    CHECK(e.path().filename().string().rfind(".tmp", 0) != 0);
  }
  CHECK(RunRecord::from_json(a.to_json()).to_json() == a.to_json());
  CHECK(kind_of([] { RunRecord::from_json(Json{{"schema", "other"}}); }) == ErrorKind::BadFormat);
  CHECK_FALSE(reg.find("../x"));
}

TEST_CASE("train: classical config echo and error surfacing") {
  TempDir tmp;
  const Registry reg(tmp.path);
  const auto split = small_split(reg);

  TrainOptions o;
  o.kind = ModelKind::Svm;
  o.split = split.id;
  o.overrides = {{"kernel", "polynomial"}, {"degree", "3"}, {"tune", "false"}};
  const auto svm = cmd_train(reg, o);
  CHECK(svm.meta.at("resolved").at("kernel") == "polynomial");
  CHECK(svm.meta.at("resolved").at("degree") == 3);
  CHECK(svm.config.at("overrides").at("kernel") == "polynomial");
  CHECK(svm.artifacts == std::vector<std::string>{"classifier.json", "tuning.json", "vocabulary.txt"});
  CHECK(Json::parse(reg.read_artifact(svm.id, "tuning.json")).empty());

  o.overrides = {{"kernel", "linear"}, {"n_trials", "4"}};
  const auto tuned = cmd_train(reg, o);
  const auto trace = Json::parse(reg.read_artifact(tuned.id, "tuning.json"));
  CHECK(trace.size() == 4);
  for (const auto& t : trace) CHECK(t.at("params").at("kernel") == 0.0);
  CHECK(cmd_train(reg, o).id == tuned.id);

  o.kind = ModelKind::Gbt;
  o.overrides = {{"n_trees", "20"}, {"max_depth", "2"}, {"tune", "false"}};
  const auto gbt = cmd_train(reg, o);
  CHECK(gbt.meta.at("resolved").at("n_trees") == 20);
  CHECK(gbt.meta.at("resolved").at("max_depth") == 2);

  o.overrides = {{"kernel", "rbf"}};
  try {
    cmd_train(reg, o);
    FAIL("gbt accepted an svm key");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
    CHECK(std::string(e.what()).find("'kernel'") != std::string::npos);
  }
  o.kind = ModelKind::Svm;
  o.overrides = {{"C", "lots"}};
  CHECK(kind_of([&] { cmd_train(reg, o); }) == ErrorKind::InvalidConfig);
  o.overrides = {{"n_trials", "0"}};
  CHECK(kind_of([&] { cmd_train(reg, o); }) == ErrorKind::InvalidConfig);
  o.overrides = {};
  o.split = "prep-000000000000";
  CHECK(kind_of([&] { cmd_train(reg, o); }) == ErrorKind::UnknownSplit);
  o.split = svm.id;
  CHECK(kind_of([&] { cmd_train(reg, o); }) == ErrorKind::UnknownSplit);
  CHECK(kind_of([] { parse_model_kind("bert"); }) == ErrorKind::UnknownKind);
  CHECK(parse_model_kind("xgboost") == ModelKind::Gbt);
}

TEST_CASE("train and eval: qlora resolved config equals the published defaults") {
  TempDir tmp;
  const Registry reg(tmp.path);
  const auto split = small_split(reg, Domain::Social, 16, 10);
  TrainOptions o;
  o.kind = ModelKind::Qlora;
  o.split = split.id;
  o.overrides = {{"pretrain_steps", "40"}, {"pretraining_texts", "100"}, {"eval_records", "4"}};
  const auto run = cmd_train(reg, o);

  auto resolved = run.config;
  resolved.erase("kind");
  resolved.erase("desk_model");
  resolved.erase("eval_records");
  CHECK(resolved == ft::QloraRunConfig{}.to_json());
  CHECK(resolved.at("lora_alpha") == 16.0);
  CHECK(resolved.at("lora_r") == 64);
  CHECK(resolved.at("learning_rate") == 2e-4);
  CHECK(run.meta.at("optimizer_steps") == 6);
  const auto log = ft::TrainingLog::from_jsonl(reg.read_artifact(run.id, "training_log.jsonl"));
  CHECK(log.epochs.size() == 3);
  REQUIRE(log.epochs[0].eval_accuracy.has_value());
  CHECK(fs::exists(reg.root() / "bases"));

  EvalOptions e;
  e.model = run.id;
  e.split = split.id;
  const auto ev = cmd_eval(reg, e);
  CHECK(ev.config.at("label") == "SocTinyLM-Qlora");
  CHECK(ev.config.at("category") == "qlora");
  CHECK(ev.meta.at("test_size") == 10);
  CHECK(cmd_eval(reg, e).id == ev.id);

  o.overrides["lora_alpha"] = "-1";
  CHECK(kind_of([&] { cmd_train(reg, o); }) == ErrorKind::InvalidConfig);
  o.overrides.erase("lora_alpha");
  o.overrides["lora_rank"] = "8";
  try {
    cmd_train(reg, o);
    FAIL("accepted an unknown key");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::InvalidConfig);
    CHECK(std::string(err.what()).find("lora_rank") != std::string::npos);
  }
}

TEST_CASE("eval: baselines, report round trip and leakage guard") {
  TempDir tmp;
  const Registry reg(tmp.path);
  const auto split = small_split(reg);
  const auto test = test_part(reg, split);

  EvalOptions e;
  e.split = split.id;
  e.model = "oracle";
  const auto oracle = cmd_eval(reg, e);
  const auto perfect = metrics::report_from_json(oracle.report);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.weighted.precision == 1.0);
  CHECK(perfect.weighted.recall == 1.0);
  CHECK(perfect.weighted.f1 == 1.0);

  e.model = "constant-positive";
  const auto pos = cmd_eval(reg, e);
  const auto rep = metrics::report_from_json(pos.report);
  std::vector<int> gold, pred;
  for (const auto& ex : test) {
    gold.push_back(ex.label);
    pred.push_back(1);
  }
  const auto brute = oracle::brute_force_report(gold, pred);
  CHECK(rep.accuracy == 0.5);
  CHECK(rep.accuracy == doctest::Approx(brute.accuracy).epsilon(1e-12));
  CHECK(rep.weighted.precision == doctest::Approx(brute.w_precision).epsilon(1e-12));
  CHECK(rep.weighted.f1 == doctest::Approx(brute.w_f1).epsilon(1e-12));
  const auto recomputed = metrics::weighted_report(gold, pred, std::vector<int>{0, 1});
  CHECK(metrics::report_from_json(Json::parse(reg.read_artifact(pos.id, "report.json"))) == recomputed);
  CHECK(reg.read_artifact(pos.id, "predictions.csv").rfind("row,gold,pred\n", 0) == 0);
  CHECK(reg.read_artifact(pos.id, "confusion.txt").find("gold\\pred") != std::string::npos);

  e.model = "finbert-esg";
  CHECK(kind_of([&] { cmd_eval(reg, e); }) == ErrorKind::Unavailable);
  e.model = "bert-large";
  CHECK(kind_of([&] { cmd_eval(reg, e); }) == ErrorKind::UnknownModel);
  e.model = "oracle";
  e.partition = "train";
  CHECK(kind_of([&] { cmd_eval(reg, e); }) == ErrorKind::LeakageRefused);
  e.partition = "eval_pool";
  CHECK(kind_of([&] { cmd_eval(reg, e); }) == ErrorKind::LeakageRefused);
  e.partition = "test";
  e.split = "nope";
  CHECK(kind_of([&] { cmd_eval(reg, e); }) == ErrorKind::UnknownSplit);

  TrainOptions t;
  t.split = split.id;
  t.overrides = {{"tune", "false"}};
  const auto svm = cmd_train(reg, t);
  PrepOptions other;
  other.synthetic = 200;
  other.synthetic_seed = 2;
  other.split.train_size = 40;
  other.split.test_size = 20;
  const auto split2 = cmd_prep(reg, other);
  e.model = svm.id;
  e.split = split2.id;
  CHECK(kind_of([&] { cmd_eval(reg, e); }) == ErrorKind::LeakageRefused);
  e.split = split.id;
  const auto ev = cmd_eval(reg, e);
  CHECK(ev.config.at("label") == "SVM");
  CHECK(metrics::report_from_json(ev.report).accuracy >= 0.9);

  const auto names = list_baselines();
  CHECK(std::count_if(names.begin(), names.end(), [](const auto& b) { return !b.available; }) == 2);
}

TEST_CASE("report: published table cell for cell, deltas and JSON round trip") {
  TempDir tmp;
  const Registry reg(tmp.path);
  const auto ids = fixture::commit_published(reg);

  const auto rep = cmd_report(reg, {{}, std::string("classical")});
  const auto cells = rep.cells();
  REQUIRE(cells.size() == fixture::kPublishedCells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t k = 0; k < 6; ++k) CHECK(cells[i][k] == fixture::kPublishedCells[i][k]);
  }
  REQUIRE(rep.deltas.size() == 1);
  CHECK(std::abs(rep.deltas[0].delta_percent - 7.37) <= 0.01);
  CHECK(rep.render_text().find("7.37%") != std::string::npos);

  const auto fin = build_report(reg.list(), std::string("finbert-esg"));
  REQUIRE(fin.deltas.size() == 1);
  CHECK(std::abs(fin.deltas[0].delta_percent - 12.30) <= 0.01);
  CHECK(fin.render_markdown().find("12.30%") != std::string::npos);
  CHECK(fin.render_markdown().rfind("| Domain | Model | Accuracy | Precision | Recall | F1-score |", 0) == 0);

  CHECK(ComparisonReport::from_json(rep.to_json()) == rep);
  CHECK(ComparisonReport::from_json(Json::parse(rep.to_json().dump())) == rep);
  CHECK(kind_of([] { ComparisonReport::from_json(Json{{"schema", "x"}}); }) == ErrorKind::BadFormat);

  TempDir tmp2;
  const Registry reg2(tmp2.path);
  CHECK(fixture::commit_published(reg2) == ids);
  cmd_report(reg2, {{}, std::string("classical")});
  const auto read_reports = [](const fs::path& root) {
    std::vector<std::string> out;
    for (const auto& d : fs::directory_iterator(root / "reports")) {
      std::ifstream in(d.path() / "report.json");
      std::stringstream ss;
      ss << in.rdbuf();
      out.push_back(ss.str());
    }
    return out;
  };
  CHECK(read_reports(tmp.path) == read_reports(tmp2.path));

  const auto single = build_report(std::vector<RunRecord>{*reg.find(ids[0])}, std::nullopt);
  CHECK(single.rows.size() == 1);
  CHECK(single.deltas.empty());
  const auto one_side = build_report(std::vector<RunRecord>{*reg.find(ids[0])}, std::string("svm"));
  CHECK(one_side.deltas.empty());
  CHECK(one_side.notes.size() == 1);

  TempDir empty;
  CHECK(kind_of([&] { cmd_report(Registry(empty.path), {}); }) == ErrorKind::NoRuns);
  CHECK(kind_of([&] { cmd_report(reg, {{"eval-missing"}, std::nullopt}); }) == ErrorKind::NoRuns);
  CHECK(kind_of([&] { build_report(std::vector<RunRecord>{}, std::nullopt); }) == ErrorKind::NoRuns);
}
