// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/finetune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "esgbench/hash.hpp"
#include "esgbench/synthetic.hpp"

namespace esg::ft {

using nlohmann::ordered_json;

namespace {

Error invalid(const std::string& msg) { return Error(ErrorKind::InvalidConfig, msg); }

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "True") return true;
  if (v == "false" || v == "0" || v == "False") return false;
  throw invalid(key + " expects true or false, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw invalid(key + " expects a number, got '" + v + "'");
  return out;
}

}  // namespace

void QloraRunConfig::validate() const {
  if (!load_in_4bit) throw invalid("the desk-scale base is always 4-bit; load_in_4bit must be true");
  if (bnb_4bit_quant_type != "nf4") throw invalid("bnb_4bit_quant_type must be nf4");
  if (per_device_train_batch_size < 1) throw invalid("per_device_train_batch_size must be at least 1");
  if (gradient_accumulation_steps < 1) throw invalid("gradient_accumulation_steps must be at least 1");
  if (!(learning_rate > 0)) throw invalid("learning_rate must be positive");
  if (weight_decay < 0) throw invalid("weight_decay must be non-negative");
  if (task_type != "CAUSAL_LM") throw invalid("task_type must be CAUSAL_LM");
  if (num_train_epochs < 1) throw invalid("num_train_epochs must be at least 1");
  if (lora_r < 1) throw invalid("lora_r must be at least 1");
  if (!(lora_alpha > 0)) throw invalid("lora_alpha must be positive");
  if (lora_dropout < 0 || lora_dropout >= 1) throw invalid("lora_dropout must be in [0, 1)");
  if (optim != "paged_adamw_32bit" && optim != "adamw_torch") throw invalid("unsupported optimizer '" + optim + "'");
  if (warmup_ratio < 0 || warmup_ratio > 1) throw invalid("warmup_ratio must be in [0, 1]");
  if (!(max_grad_norm > 0)) throw invalid("max_grad_norm must be positive");
  if (lr_scheduler_type != "cosine") throw invalid("lr_scheduler_type must be cosine");
  if (fp16 && bf16) throw invalid("fp16 and bf16 are mutually exclusive");
  if (max_seq_length < 4) throw invalid("max_seq_length is too small");
}

ordered_json QloraRunConfig::to_json() const {
  return {{"load_in_4bit", load_in_4bit},
          {"bnb_4bit_use_double_quant", bnb_4bit_use_double_quant},
          {"bnb_4bit_quant_type", bnb_4bit_quant_type},
          {"per_device_train_batch_size", per_device_train_batch_size},
          {"gradient_accumulation_steps", gradient_accumulation_steps},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"task_type", task_type},
          {"num_train_epochs", num_train_epochs},
          {"lora_r", lora_r},
          {"lora_alpha", lora_alpha},
          {"lora_dropout", lora_dropout},
          {"optim", optim},
          {"warmup_ratio", warmup_ratio},
          {"max_grad_norm", max_grad_norm},
          {"lr_scheduler_type", lr_scheduler_type},
          {"fp16", fp16},
          {"bf16", bf16},
          {"max_seq_length", max_seq_length},
          {"seed", seed}};
}

QloraRunConfig QloraRunConfig::from_json(const ordered_json& j) {
  QloraRunConfig c;
  if (!j.is_object()) throw invalid("fine-tuning config must be a JSON object");
  const auto known = c.to_json();
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw invalid("unknown fine-tuning key '" + key + "'");
      if (value.is_string()) {
        c.set(key, value.get<std::string>());
      } else if (value.is_boolean()) {
        c.set(key, value.get<bool>() ? "true" : "false");
      } else if (value.is_number_integer() || value.is_number_unsigned()) {
        c.set(key, std::to_string(value.get<long long>()));
      } else if (value.is_number()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", value.get<double>());
        c.set(key, buf);
      } else {
        throw invalid("bad value for '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw invalid(std::string("malformed fine-tuning config: ") + e.what());
  }
  c.validate();
  return c;
}

void QloraRunConfig::set(const std::string& key, const std::string& v) {
  if (key == "load_in_4bit") load_in_4bit = parse_bool(key, v);
  else if (key == "bnb_4bit_use_double_quant") bnb_4bit_use_double_quant = parse_bool(key, v);
  else if (key == "bnb_4bit_quant_type") bnb_4bit_quant_type = v;
  else if (key == "per_device_train_batch_size") per_device_train_batch_size = parse_number<int>(key, v);
  else if (key == "gradient_accumulation_steps") gradient_accumulation_steps = parse_number<int>(key, v);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, v);
  else if (key == "weight_decay") weight_decay = parse_number<double>(key, v);
  else if (key == "task_type") task_type = v;
  else if (key == "num_train_epochs") num_train_epochs = parse_number<int>(key, v);
  else if (key == "lora_r") lora_r = parse_number<int>(key, v);
  else if (key == "lora_alpha") lora_alpha = parse_number<double>(key, v);
  else if (key == "lora_dropout") lora_dropout = parse_number<double>(key, v);
  else if (key == "optim") optim = v;
  else if (key == "warmup_ratio") warmup_ratio = parse_number<double>(key, v);
  else if (key == "max_grad_norm") max_grad_norm = parse_number<double>(key, v);
  else if (key == "lr_scheduler_type") lr_scheduler_type = v;
  else if (key == "fp16") fp16 = parse_bool(key, v);
  else if (key == "bf16") bf16 = parse_bool(key, v);
  else if (key == "max_seq_length") max_seq_length = parse_number<int>(key, v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else throw invalid("unknown fine-tuning key '" + key + "'");
}

std::string QloraRunConfig::fingerprint() const { return short_hash(to_json().dump()); }

// ---------------------------------------------------------------------------

PromptRecord build_prompt(const corpus::LabeledExample& ex, PromptMode mode) {
  PromptRecord r;
  r.instruction = "Analyze the following text and decide whether it is about " + std::string(topic_phrase(ex.domain)) +
                  ". Return the label.\nText: ";
  r.body = ex.text;
  r.cue = "\nLabel: ";
  r.domain = ex.domain;
  r.label = ex.label;
  if (mode == PromptMode::Training) r.completion = corpus::relabel_to_text(ex.label, ex.domain);
  return r;
}

std::vector<std::string> template_texts() {
  std::vector<std::string> out;
  for (Domain d : {Domain::Environmental, Domain::Social, Domain::Governance}) {
    for (int label : {0, 1}) {
      corpus::LabeledExample ex;
      ex.domain = d;
      ex.label = label;
      out.push_back(build_prompt(ex, PromptMode::Training).prompt() + build_prompt(ex, PromptMode::Training).completion);
    }
  }
  out.emplace_back("none");
  return out;
}

EncodedPrompt encode_prompt(const lm::Tokenizer& tok, const PromptRecord& r, std::size_t max_len) {
  const auto instr = tok.encode(r.instruction);
  auto body = tok.encode(r.body);
  const auto cue = tok.encode(r.cue);
  const auto completion = tok.encode(r.completion);
  const std::size_t tail = r.completion.empty() ? 0 : completion.size() + 1;
  const std::size_t fixed = 1 + instr.size() + cue.size() + tail;
  if (fixed > max_len) {
    throw Error(ErrorKind::TokenizationOverflow, "instruction, cue and answer need " + std::to_string(fixed) +
                                                     " tokens but the limit is " + std::to_string(max_len));
  }
  EncodedPrompt e;
  if (fixed + body.size() > max_len) {
    e.truncated = fixed + body.size() - max_len;
    body.erase(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(e.truncated));
  }
  e.ids.reserve(fixed + body.size());
  e.ids.push_back(lm::Tokenizer::kBos);
  e.ids.insert(e.ids.end(), instr.begin(), instr.end());
  e.ids.insert(e.ids.end(), body.begin(), body.end());
  e.ids.insert(e.ids.end(), cue.begin(), cue.end());
  e.first_target = e.ids.size();
  if (!r.completion.empty()) {
    e.ids.insert(e.ids.end(), completion.begin(), completion.end());
    e.ids.push_back(lm::Tokenizer::kEos);
  }
  return e;
}

// ---------------------------------------------------------------------------

namespace {

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> optional_from(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

/// Lines: one "config" header, one "step" record per optimizer step, one
/// "epoch" record per epoch and a closing "summary".
std::string TrainingLog::to_jsonl() const {
  std::string out;
  out += ordered_json{{"type", "config"},
                      {"config_fingerprint", config_fingerprint},
                      {"base_fingerprint", base_fingerprint},
                      {"config", config}}
             .dump() +
         "\n";
  for (const auto& s : steps) {
    out += ordered_json{{"type", "step"},
                        {"step", s.step},
                        {"epoch", s.epoch},
                        {"loss", s.loss},
                        {"learning_rate", s.learning_rate},
                        {"grad_norm", s.grad_norm},
                        {"clipped_grad_norm", s.clipped_grad_norm}}
               .dump() +
           "\n";
  }
  for (const auto& e : epochs) {
    out += ordered_json{{"type", "epoch"},
                        {"epoch", e.epoch},
                        {"mean_loss", e.mean_loss},
                        {"eval_loss", optional_json(e.eval_loss)},
                        {"eval_accuracy", optional_json(e.eval_accuracy)},
                        {"eval_weighted_f1", optional_json(e.eval_weighted_f1)}}
               .dump() +
           "\n";
  }
  out += ordered_json{{"type", "summary"}, {"wall_clock_seconds", wall_clock_seconds}, {"notes", notes}}.dump() + "\n";
  return out;
}

TrainingLog TrainingLog::from_jsonl(std::string_view text) {
  TrainingLog log;
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  try {
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "config") {
        log.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        log.base_fingerprint = j.at("base_fingerprint").get<std::string>();
        log.config = j.at("config");
      } else if (type == "step") {
        log.steps.push_back({j.at("step").get<int>(), j.at("epoch").get<int>(), j.at("loss").get<double>(),
                             j.at("learning_rate").get<double>(), j.at("grad_norm").get<double>(),
                             j.at("clipped_grad_norm").get<double>()});
      } else if (type == "epoch") {
        log.epochs.push_back({j.at("epoch").get<int>(), j.at("mean_loss").get<double>(), optional_from(j, "eval_loss"),
                              optional_from(j, "eval_accuracy"), optional_from(j, "eval_weighted_f1")});
      } else if (type == "summary") {
        log.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
        log.notes = j.at("notes").get<std::vector<std::string>>();
      } else {
        throw Error(ErrorKind::BadFormat, "unknown log record type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, "training log line " + std::to_string(lineno) + ": " + e.what());
  }
  return log;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kAdapterSchema = "esgbench.adapter/1";

std::string state_hash(const std::vector<std::pair<std::string, lm::Matrix<float>>>& tensors, long steps) {
  std::string bytes = std::to_string(steps);
  for (const auto& [name, m] : tensors) {
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(m.data()), sizeof(float) * static_cast<std::size_t>(m.size()));
  }
  return sha256_hex(bytes);
}

}  // namespace

ordered_json AdapterCheckpoint::to_json() const {
  ordered_json t = ordered_json::object();
  for (const auto& [name, m] : tensors) {
    std::vector<float> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    }
    t[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
  }
  return {{"schema", kAdapterSchema},
          {"config_fingerprint", config_fingerprint},
          {"base_fingerprint", base_fingerprint},
          {"lora_r", rank},
          {"lora_alpha", alpha},
          {"lora_dropout", dropout},
          {"training_state_hash", training_state_hash},
          {"tensors", t}};
}

AdapterCheckpoint AdapterCheckpoint::from_json(const ordered_json& j) {
  try {
    if (j.at("schema").get<std::string>() != kAdapterSchema) throw Error(ErrorKind::BadFormat, "not an adapter file");
    AdapterCheckpoint c;
    c.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    c.base_fingerprint = j.at("base_fingerprint").get<std::string>();
    c.rank = j.at("lora_r").get<int>();
    c.alpha = j.at("lora_alpha").get<double>();
    c.dropout = j.at("lora_dropout").get<double>();
    c.training_state_hash = j.at("training_state_hash").get<std::string>();
    for (const auto& [name, t] : j.at("tensors").items()) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto data = t.at("data").get<std::vector<float>>();
      if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw Error(ErrorKind::BadFormat, "tensor " + name + " has the wrong number of values");
      }
      lm::Matrix<float> m(rows, cols);
      for (Eigen::Index r = 0, i = 0; r < rows; ++r) {
        for (Eigen::Index col = 0; col < cols; ++col) m(r, col) = data[static_cast<std::size_t>(i++)];
      }
      c.tensors.emplace_back(name, std::move(m));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("malformed adapter file: ") + e.what());
  }
}

void AdapterCheckpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  out << to_json().dump() << '\n';
  if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + path.string());
}

AdapterCheckpoint AdapterCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("malformed adapter file: ") + e.what());
  }
  return from_json(j);
}

void apply_checkpoint(lm::CausalLm& model, const AdapterCheckpoint& ckpt) {
  if (ckpt.base_fingerprint != model.base_fingerprint()) {
    throw invalid("adapter was trained on a different base model");
  }
  Rng unused(0);
  model.attach_adapters(ckpt.rank, ckpt.alpha, ckpt.dropout, unused);
  auto slots = model.adapter_tensors();
  if (slots.size() != ckpt.tensors.size()) throw invalid("adapter tensor count does not match the model");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, m] = ckpt.tensors[i];
    if (slots[i].first != name || slots[i].second->rows() != m.rows() || slots[i].second->cols() != m.cols()) {
      throw invalid("adapter tensor " + name + " does not fit the model");
    }
    *slots[i].second = m;
  }
}

// ---------------------------------------------------------------------------

void GenerationConfig::validate() const {
  if (max_new_tokens < 1) throw invalid("max_new_tokens must be at least 1");
  if (!(temperature >= 0)) throw invalid("temperature must be non-negative");
}

std::vector<int> generate_ids(const lm::CausalLm& model, const PromptRecord& prompt, const GenerationConfig& gen) {
  gen.validate();
  PromptRecord p = prompt;
  p.completion.clear();
  auto ids = encode_prompt(model.tokenizer(), p, model.max_positions()).ids;
  Rng rng(gen.seed);
  std::vector<int> out;
  for (int i = 0; i < gen.max_new_tokens && ids.size() < model.max_positions(); ++i) {
    const Eigen::VectorXf logits = model.next_logits(ids);
    int next = 0;
    if (gen.temperature == 0) {
      logits.maxCoeff(&next);
    } else {
      const Eigen::ArrayXd z = logits.cast<double>().array() / gen.temperature;
      const Eigen::ArrayXd p = (z - z.maxCoeff()).exp();
      double u = rng.uniform() * p.sum();
      next = static_cast<int>(p.size()) - 1;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if ((u -= p(k)) < 0) {
          next = static_cast<int>(k);
          break;
        }
      }
    }
    out.push_back(next);
    if (next == lm::Tokenizer::kEos) break;
    ids.push_back(next);
  }
  return out;
}

std::string generate(const lm::CausalLm& model, const PromptRecord& prompt, const GenerationConfig& gen) {
  return model.tokenizer().decode(generate_ids(model, prompt, gen));
}

int extract_label(std::string_view generated, Domain domain) {
  std::string text;
  bool space = false;
  for (char ch : generated) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !text.empty();
      continue;
    }
    if (space) text += ' ';
    space = false;
    text += static_cast<char>(std::tolower(c));
  }
  std::string positive(to_string(domain));
  std::transform(positive.begin(), positive.end(), positive.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const std::pair<std::string, int> phrases[] = {{"not " + positive, 0}, {positive, 1}, {"none", -1}};
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (const auto& [phrase, label] : phrases) {
      if (text.compare(i, phrase.size(), phrase) == 0) return label;
    }
  }
  return -1;
}

metrics::WeightedReport evaluate_model(const PredictFn& predict, std::span<const corpus::LabeledExample> test) {
  if (test.empty()) throw Error(ErrorKind::EmptyTestSet, "no test examples");
  std::vector<metrics::Label> gold, pred;
  for (const auto& ex : test) {
    gold.push_back(ex.label);
    const int p = predict(ex);
    if (p < -1 || p > 1) throw Error(ErrorKind::NonBinaryLabel, "prediction " + std::to_string(p) + " is not 1, 0 or -1");
    pred.push_back(p);
  }
  const metrics::Label classes[] = {0, 1};
  return metrics::weighted_report(gold, pred, classes);
}

PredictFn llm_predictor(const lm::CausalLm& model, const GenerationConfig& gen) {
  return [&model, gen](const corpus::LabeledExample& ex) {
    return extract_label(generate(model, build_prompt(ex, PromptMode::Inference), gen), ex.domain);
  };
}

// ---------------------------------------------------------------------------

namespace {

double completion_loss(lm::CausalLm& model, std::span<const EncodedPrompt> records) {
  // Reuses the gradient path with a zero scale so nothing accumulates.
  double sum = 0;
  for (const auto& e : records) sum += model.accumulate_adapter_gradients(e.ids, e.first_target, nullptr, 0.0f);
  return sum / static_cast<double>(records.size());
}

}  // namespace

FinetuneResult run_finetune(lm::CausalLm& model, std::span<const PromptRecord> train,
                            std::span<const PromptRecord> eval, const QloraRunConfig& cfg,
                            const FinetuneOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  opts.eval_generation.validate();
  if (train.empty()) throw Error(ErrorKind::EmptyInput, "no training records");
  const std::size_t max_len = std::min(static_cast<std::size_t>(cfg.max_seq_length), model.max_positions());
  std::vector<EncodedPrompt> train_enc, eval_enc;
  FinetuneResult res;
  TrainingLog& log = res.log;
  std::size_t truncated = 0;
  for (const auto& r : train) {
    if (r.completion.empty()) throw invalid("training records need a completion");
    train_enc.push_back(encode_prompt(model.tokenizer(), r, max_len));
    truncated += train_enc.back().truncated > 0;
  }
  for (const auto& r : eval) {
    if (r.completion.empty()) throw invalid("evaluation records need a completion");
    eval_enc.push_back(encode_prompt(model.tokenizer(), r, max_len));
  }

  log.config = cfg.to_json();
  log.config_fingerprint = cfg.fingerprint();
  log.base_fingerprint = model.base_fingerprint();
  if (cfg.fp16) log.notes.emplace_back("fp16 requested; the reference backend computes in float32");
  if (cfg.optim == "paged_adamw_32bit") log.notes.emplace_back("paged_adamw_32bit runs as AdamW without paging");
  if (truncated) log.notes.push_back(std::to_string(truncated) + " training prompts truncated to fit max_seq_length");

  Rng root(cfg.seed);
  Rng init_rng = root.fork(1), dropout_rng = root.fork(2), order_rng = root.fork(3);
  model.attach_adapters(cfg.lora_r, cfg.lora_alpha, cfg.lora_dropout, init_rng);
  auto tensors = model.adapter_tensors();
  auto grads = model.adapter_gradients();
  std::vector<lm::Matrix<float>*> params, grad_ptrs;
  for (auto& [n, m] : tensors) params.push_back(m);
  for (auto& [n, g] : grads) grad_ptrs.push_back(g);
  std::vector<const lm::Matrix<float>*> grad_view(grad_ptrs.begin(), grad_ptrs.end());

  const auto batch = static_cast<std::size_t>(cfg.effective_batch());
  const int steps_per_epoch = static_cast<int>((train_enc.size() + batch - 1) / batch);
  const int total = steps_per_epoch * cfg.num_train_epochs;
  const int warmup = lm::warmup_steps(total, cfg.warmup_ratio);
  lm::AdamW<float> opt;
  std::vector<std::size_t> order(train_enc.size());
  int step = 0;
  for (int epoch = 0; epoch < cfg.num_train_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(std::span(order));
    double epoch_loss = 0;
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      const std::size_t begin = static_cast<std::size_t>(s) * batch;
      const std::size_t end = std::min(begin + batch, order.size());
      const auto n = static_cast<float>(end - begin);
      model.zero_adapter_gradients();
      double loss = 0;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& e = train_enc[order[k]];
        const double l = model.accumulate_adapter_gradients(e.ids, e.first_target, &dropout_rng, 1.0f / n);
        if (!std::isfinite(l)) {
          throw Error(ErrorKind::NonFiniteLoss, "loss is " + std::to_string(l) + " at step " + std::to_string(step) +
                                                    " on training record " + std::to_string(order[k]));
        }
        loss += l / n;
      }
      StepLog sl;
      sl.step = step;
      sl.epoch = epoch;
      sl.loss = loss;
      const auto clip = lm::clip_grad_norm<float>(grad_ptrs, cfg.max_grad_norm);
      sl.grad_norm = clip.norm;
      sl.clipped_grad_norm = clip.clipped_norm;
      if (!std::isfinite(clip.norm)) throw Error(ErrorKind::NonFiniteLoss, "gradient norm is not finite at step " + std::to_string(step));
      sl.learning_rate = lm::cosine_lr(step, total, warmup, cfg.learning_rate);
      opt.step(params, grad_view, sl.learning_rate, cfg.weight_decay);
      epoch_loss += loss;
      log.steps.push_back(sl);
      if (opts.on_step) opts.on_step(sl);
    }
    EpochLog el;
    el.epoch = epoch;
    el.mean_loss = epoch_loss / steps_per_epoch;
    if (!eval_enc.empty()) {
      el.eval_loss = completion_loss(model, eval_enc);
      std::vector<corpus::LabeledExample> examples;
      for (const auto& r : eval) {
        corpus::LabeledExample ex;
        ex.text = r.body;
        ex.label = r.label;
        ex.domain = r.domain;
        examples.push_back(std::move(ex));
      }
      const auto rep = evaluate_model(llm_predictor(model, opts.eval_generation), examples);
      el.eval_accuracy = rep.accuracy;
      el.eval_weighted_f1 = rep.weighted.f1;
    }
    log.epochs.push_back(el);
    if (opts.on_epoch) opts.on_epoch(el);
  }
  model.zero_adapter_gradients();

  auto& ck = res.checkpoint;
  ck.config_fingerprint = log.config_fingerprint;
  ck.base_fingerprint = model.base_fingerprint();
  const auto hyper = model.adapter_hyper();
  ck.rank = static_cast<int>(hyper[0]);
  ck.alpha = cfg.lora_alpha;
  ck.dropout = cfg.lora_dropout;
  for (auto& [name, m] : tensors) ck.tensors.emplace_back(name, *m);
  ck.training_state_hash = state_hash(ck.tensors, opt.steps());
  log.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return res;
}

// ---------------------------------------------------------------------------

lm::TinyCausalLm build_desk_model(const DeskModelConfig& cfg, std::span<const std::string> extra_texts,
                                  const std::function<void(int, double)>& on_step) {
  const auto pre = synthetic::pretraining_texts(cfg.pretraining_texts, cfg.corpus_seed);
  std::vector<std::string> vocab_texts = pre;
  const auto templates = template_texts();
  vocab_texts.insert(vocab_texts.end(), extra_texts.begin(), extra_texts.end());
  std::vector<std::string> required;
  for (const auto& t : templates) {
    for (auto& w : lm::Tokenizer::split(t)) {
      if (std::find(required.begin(), required.end(), w) == required.end()) required.push_back(std::move(w));
    }
  }
  const auto tok = lm::Tokenizer::train(vocab_texts, static_cast<std::size_t>(cfg.lm.vocab), required);
  lm::TinyLmConfig lmc = cfg.lm;
  lmc.vocab = static_cast<int>(tok.size());
  auto weights = lm::pretrain(lmc, tok, pre, cfg.pretrain, on_step);
  return lm::TinyCausalLm(lmc, tok, weights, true);
}

}  // namespace esg::ft
