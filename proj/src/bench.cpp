// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "binio.hpp"
#include "esgbench/classical.hpp"
#include "esgbench/hash.hpp"
#include "esgbench/synthetic.hpp"
#include "esgbench/text.hpp"

#ifndef ESGBENCH_SOURCE_REVISION
#define ESGBENCH_SOURCE_REVISION "unknown"
#endif

namespace esg::bench {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Error invalid(const std::string& msg) { return Error(ErrorKind::InvalidConfig, msg); }

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::BadFormat, "config line " + std::to_string(lineno) + " has no '='");
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::BadFormat, "config line " + std::to_string(lineno) + " has no key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    kv[key] = value;
  }
  return kv;
}

KeyValues load_key_values(const fs::path& path) { return parse_key_values(binio::read_file(path.string())); }

std::string_view source_revision() { return ESGBENCH_SOURCE_REVISION; }

// ---------------------------------------------------------------------------

Json RunRecord::to_json() const {
  return {{"schema", "esgbench.run/1"}, {"id", id},
          {"command", command},         {"config", config},
          {"inputs", inputs},           {"meta", meta},
          {"report", report},           {"artifacts", artifacts},
          {"source_revision", source_revision}, {"created_at", created_at}};
}

RunRecord RunRecord::from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != "esgbench.run/1") throw Error(ErrorKind::BadFormat, "not a run manifest");
    RunRecord r;
    r.id = j.at("id").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.config = j.at("config");
    r.inputs = j.at("inputs");
    r.meta = j.at("meta");
    r.report = j.at("report");
    r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    r.source_revision = j.at("source_revision").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("malformed run manifest: ") + e.what());
  }
}

std::string run_id(std::string_view command, const Json& config, const Json& inputs) {
  const Json key = {{"command", command}, {"config", config}, {"inputs", inputs}};
  return std::string(command) + "-" + short_hash(key.dump(), 12);
}

Registry::Registry(fs::path root) : root_(std::move(root)) {}

bool Registry::contains(const std::string& id) const {
  return !id.empty() && id.find('/') == std::string::npos && fs::exists(root_ / id / "manifest.json");
}

std::optional<RunRecord> Registry::find(const std::string& id) const {
  if (!contains(id)) return std::nullopt;
  return RunRecord::from_json(Json::parse(binio::read_file((root_ / id / "manifest.json").string())));
}

std::vector<RunRecord> Registry::list() const {
  std::vector<RunRecord> out;
  if (!fs::exists(root_)) return out;
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) ids.push_back(e.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) out.push_back(*find(id));
  return out;
}

std::string Registry::read_artifact(const std::string& id, const std::string& name) const {
  return binio::read_file((root_ / id / name).string());
}

void write_atomically(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  const auto tmp = path.parent_path() / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

RunRecord Registry::commit(RunRecord rec, const std::map<std::string, std::string>& files) const {
  rec.id = run_id(rec.command, rec.config, rec.inputs);
  if (auto existing = find(rec.id)) return *existing;
  rec.source_revision = std::string(source_revision());
  rec.created_at = now_utc();
  rec.artifacts.clear();
  for (const auto& [name, _] : files) rec.artifacts.push_back(name);
  fs::create_directories(root_);
  const auto scratch = root_ / (".tmp-" + rec.id + "-" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  for (const auto& [name, content] : files) {
    std::ofstream out(scratch / name, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + (scratch / name).string());
  }
  {
    std::ofstream out(scratch / "manifest.json");
    out << rec.to_json().dump(2) << '\n';
  }
  std::error_code ec;
  fs::rename(scratch, dir(rec.id), ec);
  if (ec) {
    fs::remove_all(scratch);
    if (auto winner = find(rec.id)) return *winner;
    throw Error(ErrorKind::MissingInput, "cannot publish run " + rec.id + ": " + ec.message());
  }
  return rec;
}

// ---------------------------------------------------------------------------

std::vector<BaselineInfo> list_baselines() {
  return {
      {"oracle", "Oracle", true, "returns the gold label; sanity check of the evaluation path"},
      {"constant-positive", "Constant positive", true, "always predicts the domain label"},
      {"constant-negative", "Constant negative", true, "always predicts Not <domain>"},
      {"base-llm", "TinyLM", true, "desk-scale base model without adapters, zero-shot"},
      {"finbert-esg", "FinBERT-ESG", false, "requires user-provided FinBERT-ESG weights; none are shipped"},
      {"llama2-7b", "Llama 2", false, "requires user-provided Llama 2 7B weights; none are shipped"},
  };
}

namespace {

std::optional<BaselineInfo> baseline_named(std::string_view name) {
  for (auto& b : list_baselines()) {
    if (b.name == name) return b;
  }
  return std::nullopt;
}

std::string csv_of(std::span<const corpus::LabeledExample> ex) {
  std::ostringstream os;
  corpus::write_csv(os, ex);
  return os.str();
}

Json label_counts(std::span<const corpus::LabeledExample> ex) {
  std::int64_t pos = 0;
  for (const auto& e : ex) pos += e.label == 1;
  return {{"0", static_cast<std::int64_t>(ex.size()) - pos}, {"1", pos}};
}

RunRecord require_split(const Registry& reg, const std::string& id) {
  auto r = reg.find(id);
  if (!r || r->command != "prep") throw Error(ErrorKind::UnknownSplit, "no prepared split '" + id + "'");
  return *r;
}

std::vector<corpus::LabeledExample> split_part(const Registry& reg, const RunRecord& split, const std::string& part) {
  const Domain d = parse_domain(split.config.at("domain").get<std::string>());
  return corpus::parse_examples(reg.read_artifact(split.id, part + ".csv"), d);
}

}  // namespace

RunRecord cmd_prep(const Registry& reg, const PrepOptions& opts) {
  std::vector<corpus::LabeledExample> examples;
  Json meta;
  if (opts.synthetic > 0) {
    examples = synthetic::keyword_corpus(opts.domain, opts.synthetic, opts.synthetic_seed);
    meta["source"] = "synthetic keyword corpus, n=" + std::to_string(opts.synthetic) +
                     ", seed=" + std::to_string(opts.synthetic_seed);
  } else if (opts.dataset) {
    examples = corpus::load_csv(*opts.dataset, opts.domain);
    meta["source"] = opts.dataset->string();
  } else {
    throw Error(ErrorKind::MissingInput, "prep needs a dataset path or a synthetic size");
  }
  const auto bundle = corpus::stratified_split(examples, opts.split);

  RunRecord rec;
  rec.command = "prep";
  rec.config = {{"domain", std::string(short_name(opts.domain))},
                {"train_size", opts.split.train_size},
                {"test_size", opts.split.test_size},
                {"seed", opts.split.seed},
                {"stratified", opts.split.stratified}};
  rec.inputs = {{"dataset_sha256", sha256_hex(csv_of(examples))}};
  meta["sizes"] = {{"train", bundle.train.size()}, {"test", bundle.test.size()}, {"eval_pool", bundle.eval_pool.size()}};
  meta["labels"] = {{"train", label_counts(bundle.train)},
                    {"test", label_counts(bundle.test)},
                    {"eval_pool", label_counts(bundle.eval_pool)}};
  rec.meta = meta;
  return reg.commit(rec, {{"train.csv", csv_of(bundle.train)},
                          {"test.csv", csv_of(bundle.test)},
                          {"eval_pool.csv", csv_of(bundle.eval_pool)}});
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Svm: return "svm";
    case ModelKind::Gbt: return "gbt";
    case ModelKind::Qlora: return "qlora";
  }
  return "";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "svm") return ModelKind::Svm;
  if (s == "gbt" || s == "xgboost") return ModelKind::Gbt;
  if (s == "qlora") return ModelKind::Qlora;
  throw Error(ErrorKind::UnknownKind, "unknown model kind '" + std::string(s) + "' (svm, gbt, qlora)");
}

// ---------------------------------------------------------------------------

namespace {

double number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw invalid(key + " expects a number, got '" + v + "'");
  return out;
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw invalid(key + " expects true or false, got '" + v + "'");
}

struct ClassicalSetup {
  bool tune = true;
  classical::TrialBudget budget;
  classical::ParamSet fixed;
  std::optional<bool> gamma_scale;
};

ClassicalSetup classical_setup(ModelKind kind, const KeyValues& kv) {
  ClassicalSetup s;
  const auto space = kind == ModelKind::Svm ? classical::default_svm_space() : classical::default_gbt_space();
  for (const auto& [key, value] : kv) {
    if (key == "tune") {
      s.tune = boolean(key, value);
    } else if (key == "n_trials") {
      s.budget.n_trials = static_cast<int>(number(key, value));
    } else if (key == "validation_fraction") {
      s.budget.validation_fraction = number(key, value);
    } else if (key == "seed") {
      s.budget.seed = static_cast<std::uint64_t>(number(key, value));
    } else if (kind == ModelKind::Svm && key == "kernel") {
      s.fixed["kernel"] = static_cast<double>(classical::parse_kernel(value));
    } else if (kind == ModelKind::Svm && key == "gamma" && value == "scale") {
      s.gamma_scale = true;
    } else if (kind == ModelKind::Svm && key == "coef0") {
      s.fixed["coef0"] = number(key, value);
    } else if (std::any_of(space.params.begin(), space.params.end(), [&](const auto& p) { return p.name == key; })) {
      s.fixed[key] = number(key, value);
    } else {
      throw invalid("unknown " + std::string(to_string(kind)) + " key '" + key + "'");
    }
  }
  s.budget.validate();
  return s;
}

Json svm_json(const classical::SvmConfig& c) {
  return {{"kernel", std::string(classical::to_string(c.kernel))},
          {"C", c.C},
          {"degree", c.degree},
          {"gamma", c.gamma ? Json(*c.gamma) : Json("scale")},
          {"coef0", c.coef0}};
}

Json gbt_json(const classical::GbtConfig& c) {
  return {{"n_trees", c.n_trees},
          {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate},
          {"reg_lambda", c.reg_lambda},
          {"reg_alpha", c.reg_alpha}};
}

RunRecord train_classical(const Registry& reg, const RunRecord& split, const TrainOptions& opts) {
  const auto setup = classical_setup(opts.kind, opts.overrides);
  const auto train = split_part(reg, split, "train");
  std::vector<text::Tokens> docs;
  std::vector<int> y;
  for (const auto& ex : train) {
    docs.push_back(text::normalize_tokens(ex.text));
    y.push_back(ex.label);
  }
  const auto vocab = text::Vocabulary::build(docs);
  const Eigen::MatrixXd X = text::feature_matrix(docs, vocab);

  classical::SvmConfig svm_base;
  if (auto it = setup.fixed.find("coef0"); it != setup.fixed.end()) svm_base.coef0 = it->second;
  auto space = opts.kind == ModelKind::Svm ? classical::default_svm_space() : classical::default_gbt_space();
  std::erase_if(space.params, [&](const classical::Param& p) {
    return setup.fixed.count(p.name) || (p.name == "gamma" && setup.gamma_scale);
  });
  classical::ParamSet chosen = setup.fixed;
  chosen.erase("coef0");
  Json trace = Json::array();
  Json tuning = nullptr;
  if (setup.tune && !space.params.empty()) {
    const auto base_fn = opts.kind == ModelKind::Svm ? classical::svm_trainer(svm_base) : classical::gbt_trainer();
    const classical::TrainFn fn = [&](const Eigen::MatrixXd& Xs, std::span<const int> ys, const classical::ParamSet& p) {
      classical::ParamSet all = p;
      for (const auto& [k, v] : chosen) all[k] = v;
      return base_fn(Xs, ys, all);
    };
    const auto res = classical::tune(fn, space, setup.budget, X, y);
    for (const auto& t : res.trials) {
      classical::ParamSet all = t.params;
      for (const auto& [k, v] : chosen) all[k] = v;
      trace.push_back({{"params", all}, {"validation_f1", t.validation_f1}, {"cached", t.cached}});
    }
    for (const auto& [k, v] : res.best) chosen[k] = v;
    tuning = {{"best_trial", res.best_trial}, {"best_validation_f1", res.best_f1}, {"evaluations", res.evaluations}};
  }

  classical::TrainedClassifier clf;
  Json resolved;
  if (opts.kind == ModelKind::Svm) {
    const auto cfg = classical::svm_config_from(chosen, svm_base);
    clf = classical::train_svm(X, y, cfg);
    resolved = svm_json(cfg);
  } else {
    const auto cfg = classical::gbt_config_from(chosen);
    clf = classical::train_gbt(X, y, cfg);
    resolved = gbt_json(cfg);
  }
  clf.vocabulary_fingerprint = vocab.fingerprint();

  RunRecord rec;
  rec.command = "train";
  rec.config = {{"kind", std::string(to_string(opts.kind))},
                {"tune", setup.tune},
                {"n_trials", setup.budget.n_trials},
                {"validation_fraction", setup.budget.validation_fraction},
                {"seed", setup.budget.seed},
                {"overrides", opts.overrides}};
  rec.inputs = {{"split", split.id}, {"train_sha256", sha256_hex(reg.read_artifact(split.id, "train.csv"))}};
  rec.meta = {{"domain", split.config.at("domain")}, {"resolved", resolved}, {"tuning", tuning},
              {"vocabulary_size", vocab.size()}};
  return reg.commit(rec, {{"classifier.json", classical::to_json(clf).dump() + "\n"},
                          {"vocabulary.txt", vocab.serialize()},
                          {"tuning.json", trace.dump(1) + "\n"}});
}

struct LmSetup {
  ft::QloraRunConfig run;
  ft::DeskModelConfig desk;
  std::size_t eval_records = 50;
};

LmSetup lm_setup(const KeyValues& kv) {
  LmSetup s;
  for (const auto& [key, value] : kv) {
    if (key == "pretrain_steps") s.desk.pretrain.steps = static_cast<int>(number(key, value));
    else if (key == "pretraining_texts") s.desk.pretraining_texts = static_cast<std::size_t>(number(key, value));
    else if (key == "eval_records") s.eval_records = static_cast<std::size_t>(number(key, value));
    else s.run.set(key, value);
  }
  s.run.validate();
  if (s.desk.pretrain.steps < 1) throw invalid("pretrain_steps must be at least 1");
  return s;
}

Json desk_json(const ft::DeskModelConfig& d) {
  return {{"d_model", d.lm.d_model},
          {"n_heads", d.lm.n_heads},
          {"n_layers", d.lm.n_layers},
          {"d_ff", d.lm.d_ff},
          {"max_positions", d.lm.max_positions},
          {"vocab_cap", d.lm.vocab},
          {"pretrain_steps", d.pretrain.steps},
          {"pretrain_learning_rate", d.pretrain.learning_rate},
          {"pretraining_texts", d.pretraining_texts},
          {"corpus_seed", d.corpus_seed}};
}

/// The pretrained base for a split, cached under <root>/bases/.
lm::TinyCausalLm desk_base(const Registry& reg, const RunRecord& split, const ft::DeskModelConfig& desk,
                           std::ostream* progress) {
  const auto key = short_hash(Json{{"desk", desk_json(desk)}, {"split", split.id}}.dump(), 12);
  const auto path = reg.root() / "bases" / (key + ".bin");
  if (fs::exists(path)) return lm::TinyCausalLm::load(path);
  std::vector<std::string> extra;
  for (const auto& ex : split_part(reg, split, "train")) extra.push_back(ex.text);
  if (progress) *progress << "pretraining desk base " << key << " (" << desk.pretrain.steps << " steps)\n";
  auto model = ft::build_desk_model(desk, extra, [&](int step, double loss) {
    if (progress && (step + 1) % 500 == 0) *progress << "  pretrain step " << step + 1 << " loss " << loss << "\n";
  });
  fs::create_directories(path.parent_path());
  const auto tmp = path.parent_path() / ("." + key + ".tmp" + std::to_string(::getpid()));
  model.save(tmp);
  fs::rename(tmp, path);
  return model;
}

std::vector<ft::PromptRecord> prompts_of(std::span<const corpus::LabeledExample> ex) {
  std::vector<ft::PromptRecord> out;
  for (const auto& e : ex) out.push_back(ft::build_prompt(e, ft::PromptMode::Training));
  return out;
}

RunRecord train_qlora(const Registry& reg, const RunRecord& split, const TrainOptions& opts) {
  const auto setup = lm_setup(opts.overrides);
  auto model = desk_base(reg, split, setup.desk, opts.progress);
  const auto train = split_part(reg, split, "train");
  auto pool = split_part(reg, split, "eval_pool");
  if (pool.size() > setup.eval_records) pool.resize(setup.eval_records);
  ft::FinetuneOptions fo;
  fo.on_epoch = [&](const ft::EpochLog& e) {
    if (!opts.progress) return;
    *opts.progress << "epoch " << e.epoch + 1 << " mean loss " << e.mean_loss;
    if (e.eval_accuracy) *opts.progress << " eval accuracy " << *e.eval_accuracy;
    *opts.progress << "\n";
  };
  const auto res = ft::run_finetune(model, prompts_of(train), prompts_of(pool), setup.run, fo);

  RunRecord rec;
  rec.command = "train";
  rec.config = setup.run.to_json();
  rec.config["kind"] = "qlora";
  rec.config["desk_model"] = desk_json(setup.desk);
  rec.config["eval_records"] = setup.eval_records;
  rec.inputs = {{"split", split.id},
                {"train_sha256", sha256_hex(reg.read_artifact(split.id, "train.csv"))},
                {"base_fingerprint", model.base_fingerprint()}};
  rec.meta = {{"domain", split.config.at("domain")},
              {"optimizer_steps", res.log.steps.size()},
              {"final_epoch_loss", res.log.epochs.back().mean_loss},
              {"wall_clock_seconds", res.log.wall_clock_seconds},
              {"parameters", model.config().parameter_count()}};
  return reg.commit(rec, {{"adapter.json", res.checkpoint.to_json().dump() + "\n"},
                          {"training_log.jsonl", res.log.to_jsonl()}});
}

}  // namespace

RunRecord cmd_train(const Registry& reg, const TrainOptions& opts) {
  const auto split = require_split(reg, opts.split);
  return opts.kind == ModelKind::Qlora ? train_qlora(reg, split, opts) : train_classical(reg, split, opts);
}

// ---------------------------------------------------------------------------

namespace {

std::string display_label(std::string_view category, Domain d) {
  if (category == "qlora") {
    std::string s(short_name(d));
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s + "TinyLM-Qlora";
  }
  if (category == "svm") return "SVM";
  if (category == "xgboost") return "XGBoost";
  if (auto b = baseline_named(category)) return b->label;
  return std::string(category);
}

ft::GenerationConfig generation_from(const KeyValues& kv) {
  ft::GenerationConfig g;
  for (const auto& [key, value] : kv) {
    if (key == "max_new_tokens") g.max_new_tokens = static_cast<int>(number(key, value));
    else if (key == "temperature") g.temperature = number(key, value);
    else if (key == "seed") g.seed = static_cast<std::uint64_t>(number(key, value));
    else throw invalid("unknown generation key '" + key + "'");
  }
  g.validate();
  return g;
}

}  // namespace

RunRecord cmd_eval(const Registry& reg, const EvalOptions& opts) {
  if (opts.partition != "test") {
    throw Error(ErrorKind::LeakageRefused, "evaluation on the '" + opts.partition +
                                               "' partition is refused; only the test partition is scored");
  }
  const auto split = require_split(reg, opts.split);
  const Domain domain = parse_domain(split.config.at("domain").get<std::string>());
  const auto test = split_part(reg, split, "test");
  const auto gen = generation_from(opts.overrides);

  std::string category;
  Json model_inputs;
  ft::PredictFn predict;
  std::optional<classical::TrainedClassifier> clf;
  std::optional<text::Vocabulary> vocab;
  std::optional<lm::TinyCausalLm> lm_model;
  Json gen_json = nullptr;

  if (const auto run = reg.find(opts.model); run && run->command == "train") {
    if (run->inputs.at("split").get<std::string>() != split.id) {
      throw Error(ErrorKind::LeakageRefused, "model " + run->id + " was trained on split " +
                                                 run->inputs.at("split").get<std::string>() +
                                                 "; evaluating it on another split could score training data");
    }
    const auto kind = parse_model_kind(run->config.at("kind").get<std::string>());
    model_inputs = {{"run", run->id}};
    if (kind == ModelKind::Qlora) {
      category = "qlora";
      ft::DeskModelConfig desk;
      const auto& dj = run->config.at("desk_model");
      desk.pretrain.steps = dj.at("pretrain_steps").get<int>();
      desk.pretraining_texts = dj.at("pretraining_texts").get<std::size_t>();
      lm_model = desk_base(reg, split, desk, nullptr);
      ft::apply_checkpoint(*lm_model, ft::AdapterCheckpoint::from_json(Json::parse(reg.read_artifact(run->id, "adapter.json"))));
      predict = ft::llm_predictor(*lm_model, gen);
      gen_json = {{"max_new_tokens", gen.max_new_tokens}, {"temperature", gen.temperature}, {"seed", gen.seed}};
    } else {
      category = kind == ModelKind::Svm ? "svm" : "xgboost";
      clf = classical::classifier_from_json(Json::parse(reg.read_artifact(run->id, "classifier.json")));
      vocab = text::Vocabulary::deserialize(reg.read_artifact(run->id, "vocabulary.txt"));
      if (vocab->fingerprint() != clf->vocabulary_fingerprint) {
        throw Error(ErrorKind::BadFormat, "vocabulary does not match classifier in run " + run->id);
      }
      predict = [&](const corpus::LabeledExample& ex) {
        const std::vector<text::Tokens> doc{text::normalize_tokens(ex.text)};
        return classical::predict(*clf, text::feature_matrix(doc, *vocab))[0];
      };
    }
  } else if (const auto b = baseline_named(opts.model)) {
    if (!b->available) throw Error(ErrorKind::Unavailable, b->name + " is unavailable: " + b->notes);
    category = b->name;
    model_inputs = {{"baseline", b->name}};
    if (b->name == "oracle") {
      predict = [](const corpus::LabeledExample& ex) { return ex.label; };
    } else if (b->name == "constant-positive") {
      predict = [](const corpus::LabeledExample&) { return 1; };
    } else if (b->name == "constant-negative") {
      predict = [](const corpus::LabeledExample&) { return 0; };
    } else {
      lm_model = desk_base(reg, split, ft::DeskModelConfig{}, nullptr);
      model_inputs["base_fingerprint"] = lm_model->base_fingerprint();
      predict = ft::llm_predictor(*lm_model, gen);
      gen_json = {{"max_new_tokens", gen.max_new_tokens}, {"temperature", gen.temperature}, {"seed", gen.seed}};
    }
  } else {
    throw Error(ErrorKind::UnknownModel, "'" + opts.model + "' is neither a trained run nor a baseline");
  }

  std::vector<int> preds;
  const ft::PredictFn recording = [&](const corpus::LabeledExample& ex) {
    preds.push_back(predict(ex));
    return preds.back();
  };
  const auto report = ft::evaluate_model(recording, test);
  std::ostringstream pred_csv;
  pred_csv << "row,gold,pred\n";
  for (std::size_t i = 0; i < test.size(); ++i) pred_csv << test[i].row << ',' << test[i].label << ',' << preds[i] << '\n';

  RunRecord rec;
  rec.command = "eval";
  rec.config = {{"model", opts.model},
                {"category", category},
                {"label", display_label(category, domain)},
                {"domain", std::string(short_name(domain))},
                {"split", split.id},
                {"partition", opts.partition},
                {"generation", gen_json}};
  rec.inputs = {{"model", model_inputs}, {"test_sha256", sha256_hex(reg.read_artifact(split.id, "test.csv"))}};
  rec.report = metrics::to_json(report);
  rec.meta = {{"test_size", test.size()}};
  return reg.commit(rec, {{"report.json", rec.report.dump(2) + "\n"},
                          {"confusion.txt", metrics::render_confusion(report)},
                          {"predictions.csv", pred_csv.str()}});
}

// ---------------------------------------------------------------------------

std::string format_cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

namespace {

int category_rank(std::string_view c) {
  static const std::string_view order[] = {"qlora", "base-llm", "llama2-7b", "finbert-esg", "svm", "xgboost"};
  for (int i = 0; i < 6; ++i) {
    if (order[i] == c) return i;
  }
  return 6;
}

std::string baseline_label(std::string_view b) {
  if (b == "classical") return "SVM/XGBoost mean";
  return display_label(b, Domain::Environmental);
}

const Domain kDomains[] = {Domain::Environmental, Domain::Social, Domain::Governance};

std::string domain_cell(Domain d) {
  std::string s(short_name(d));
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

ComparisonReport build_report(std::span<const RunRecord> eval_runs, const std::optional<std::string>& baseline) {
  if (eval_runs.empty()) throw Error(ErrorKind::NoRuns, "no evaluated runs to report");
  ComparisonReport rep;
  for (const auto& r : eval_runs) {
    if (r.command != "eval" || r.report.is_null()) {
      throw Error(ErrorKind::NoRuns, "run " + r.id + " is not an evaluated run");
    }
    const auto w = metrics::report_from_json(r.report);
    ReportRow row;
    row.domain = parse_domain(r.config.at("domain").get<std::string>());
    row.category = r.config.at("category").get<std::string>();
    row.model = r.config.at("label").get<std::string>();
    row.accuracy = w.accuracy;
    row.precision = w.weighted.precision;
    row.recall = w.weighted.recall;
    row.f1 = w.weighted.f1;
    row.run_id = r.id;
    rep.rows.push_back(row);
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.domain != b.domain) return static_cast<int>(a.domain) < static_cast<int>(b.domain);
    const int ra = category_rank(a.category), rb = category_rank(b.category);
    if (ra != rb) return ra < rb;
    if (a.model != b.model) return a.model < b.model;
    return a.run_id < b.run_id;
  });
  if (!baseline) return rep;

  const std::string& base = *baseline;
  auto f1_of = [&](Domain d, std::string_view category) -> std::optional<double> {
    std::optional<double> found;
    for (const auto& row : rep.rows) {
      if (row.domain != d || row.category != category) continue;
      if (found) {
        throw invalid("several " + std::string(category) + " runs for " + std::string(short_name(d)) +
                      "; name the runs to compare explicitly");
      }
      found = row.f1;
    }
    return found;
  };
  DeltaRow delta;
  delta.model = "qlora";
  delta.baseline = base;
  for (Domain d : kDomains) {
    const auto mine = f1_of(d, "qlora");
    std::optional<double> theirs;
    if (base == "classical") {
      const auto s = f1_of(d, "svm"), x = f1_of(d, "xgboost");
      if (s && x) theirs = (*s + *x) / 2;
    } else {
      theirs = f1_of(d, base);
    }
    if (!mine || !theirs) continue;
    delta.domains.push_back(d);
    delta.f1_model.push_back(*mine);
    delta.f1_baseline.push_back(*theirs);
  }
  if (delta.domains.empty()) {
    rep.notes.push_back("no domain has both a qlora run and a " + base + " run; no delta computed");
    return rep;
  }
  delta.delta_percent = metrics::improvement_delta(delta.f1_model, delta.f1_baseline);
  rep.deltas.push_back(delta);
  return rep;
}

std::vector<std::array<std::string, 6>> ComparisonReport::cells() const {
  std::vector<std::array<std::string, 6>> out;
  std::optional<Domain> current;
  for (const auto& r : rows) {
    const bool first = !current || *current != r.domain;
    current = r.domain;
    out.push_back({first ? domain_cell(r.domain) : std::string(), r.model, format_cell(r.accuracy),
                   format_cell(r.precision), format_cell(r.recall), format_cell(r.f1)});
  }
  return out;
}

namespace {

std::string delta_line(const DeltaRow& d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", d.delta_percent);
  std::string domains;
  for (Domain x : d.domains) domains += (domains.empty() ? "" : ", ") + domain_cell(x);
  return "Mean F1 improvement of " + d.model + " over " + baseline_label(d.baseline) + " (" + domains + "): " + buf;
}

}  // namespace

std::string ComparisonReport::render_text() const {
  const auto c = cells();
  const std::array<std::string, 6> head = {"Domain", "Model", "Accuracy", "Precision", "Recall", "F1-score"};
  std::array<std::size_t, 6> width{};
  for (std::size_t k = 0; k < 6; ++k) {
    width[k] = head[k].size();
    for (const auto& row : c) width[k] = std::max(width[k], row[k].size());
  }
  std::ostringstream os;
  std::size_t lead = width[0] + width[1] + 4;
  os << std::string(lead, ' ') << "Weighted average\n";
  auto line = [&](const std::array<std::string, 6>& row) {
    std::string s;
    for (std::size_t k = 0; k < 6; ++k) {
      s += row[k];
      if (k < 5) s += std::string(width[k] - row[k].size() + 2, ' ');
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    os << s << '\n';
  };
  line(head);
  for (const auto& row : c) line(row);
  for (const auto& d : deltas) os << '\n' << delta_line(d) << '\n';
  for (const auto& n : notes) os << "note: " << n << '\n';
  return os.str();
}

std::string ComparisonReport::render_markdown() const {
  std::ostringstream os;
  os << "| Domain | Model | Accuracy | Precision | Recall | F1-score |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& row : cells()) {
    os << '|';
    for (const auto& cell : row) os << ' ' << cell << " |";
    os << '\n';
  }
  if (!deltas.empty()) os << '\n';
  for (const auto& d : deltas) os << "- " << delta_line(d) << '\n';
  for (const auto& n : notes) os << "\n> " << n << '\n';
  return os.str();
}

Json ComparisonReport::to_json() const {
  Json j;
  j["schema"] = "esgbench.comparison/1";
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"domain", std::string(short_name(r.domain))},
                         {"category", r.category},
                         {"model", r.model},
                         {"accuracy", r.accuracy},
                         {"precision", r.precision},
                         {"recall", r.recall},
                         {"f1", r.f1},
                         {"run_id", r.run_id}});
  }
  j["deltas"] = Json::array();
  for (const auto& d : deltas) {
    Json domains = Json::array();
    for (Domain x : d.domains) domains.push_back(std::string(short_name(x)));
    j["deltas"].push_back({{"model", d.model},
                           {"baseline", d.baseline},
                           {"domains", domains},
                           {"f1_model", d.f1_model},
                           {"f1_baseline", d.f1_baseline},
                           {"delta_percent", d.delta_percent}});
  }
  j["notes"] = notes;
  return j;
}

ComparisonReport ComparisonReport::from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != "esgbench.comparison/1") {
      throw Error(ErrorKind::BadFormat, "not a comparison report");
    }
    ComparisonReport rep;
    for (const auto& r : j.at("rows")) {
      rep.rows.push_back({parse_domain(r.at("domain").get<std::string>()), r.at("category").get<std::string>(),
                          r.at("model").get<std::string>(), r.at("accuracy").get<double>(),
                          r.at("precision").get<double>(), r.at("recall").get<double>(), r.at("f1").get<double>(),
                          r.at("run_id").get<std::string>()});
    }
    for (const auto& d : j.at("deltas")) {
      DeltaRow row;
      row.model = d.at("model").get<std::string>();
      row.baseline = d.at("baseline").get<std::string>();
      for (const auto& x : d.at("domains")) row.domains.push_back(parse_domain(x.get<std::string>()));
      row.f1_model = d.at("f1_model").get<std::vector<double>>();
      row.f1_baseline = d.at("f1_baseline").get<std::vector<double>>();
      row.delta_percent = d.at("delta_percent").get<double>();
      rep.deltas.push_back(std::move(row));
    }
    rep.notes = j.at("notes").get<std::vector<std::string>>();
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("malformed comparison report: ") + e.what());
  }
}

ComparisonReport cmd_report(const Registry& reg, const ReportOptions& opts) {
  std::vector<RunRecord> runs;
  if (opts.runs.empty()) {
    for (auto& r : reg.list()) {
      if (r.command == "eval") runs.push_back(std::move(r));
    }
  } else {
    for (const auto& id : opts.runs) {
      auto r = reg.find(id);
      if (!r) throw Error(ErrorKind::NoRuns, "no run '" + id + "'");
      runs.push_back(std::move(*r));
    }
  }
  auto rep = build_report(runs, opts.baseline);
  const auto json = rep.to_json().dump(2) + "\n";
  const auto dir = reg.root() / "reports" / short_hash(json, 12);
  write_atomically(dir / "report.json", json);
  write_atomically(dir / "report.md", rep.render_markdown());
  write_atomically(dir / "report.txt", rep.render_text());
  return rep;
}

}  // namespace esg::bench
