// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esgbench/corpus.hpp"
#include "esgbench/metrics.hpp"
#include "esgbench/tinylm.hpp"
#include "json.hpp"

namespace esg::ft {

/// Fine-tuning run configuration. Keys follow the usual trainer and
/// quantization argument names so a config reads like the run it describes.
struct QloraRunConfig {
  bool load_in_4bit = true;
  bool bnb_4bit_use_double_quant = true;
  std::string bnb_4bit_quant_type = "nf4";
  int per_device_train_batch_size = 1;
  int gradient_accumulation_steps = 8;
  double learning_rate = 2e-4;
  double weight_decay = 0.001;
  std::string task_type = "CAUSAL_LM";
  int num_train_epochs = 3;
  int lora_r = 64;
  double lora_alpha = 16;
  double lora_dropout = 0.1;
  std::string optim = "paged_adamw_32bit";
  double warmup_ratio = 0.03;
  double max_grad_norm = 0.3;
  std::string lr_scheduler_type = "cosine";
  bool fp16 = true;
  bool bf16 = false;
  int max_seq_length = 1024;
  std::uint64_t seed = 10;

  void validate() const;
  int effective_batch() const { return per_device_train_batch_size * gradient_accumulation_steps; }

  nlohmann::ordered_json to_json() const;
  /// Unknown keys are rejected; missing keys keep their defaults.
  static QloraRunConfig from_json(const nlohmann::ordered_json& j);
  /// Applies "key=value" overrides.
  void set(const std::string& key, const std::string& value);
  std::string fingerprint() const;
};

/// A prompt split into the parts that truncation treats differently: the
/// instruction and the answer cue are kept whole, the body may lose tokens
/// from its left end.
struct PromptRecord {
  std::string instruction;
  std::string body;
  std::string cue;
  std::string completion;  // empty in inference mode
  Domain domain = Domain::Environmental;
  int label = 0;

  std::string prompt() const { return instruction + body + cue; }
  bool operator==(const PromptRecord&) const = default;
};

enum class PromptMode { Training, Inference };

/// "Analyze the following text and decide whether it is about <topic>. Return
/// the label.\nText: <text>\nLabel: " followed, in training mode, by the text label.
PromptRecord build_prompt(const corpus::LabeledExample& ex, PromptMode mode);

/// Every piece of the fixed template, for tokenizer training.
std::vector<std::string> template_texts();

struct EncodedPrompt {
  std::vector<int> ids;          // <bos> prompt [completion <eos>]
  std::size_t first_target = 0;  // index of the first completion token (== ids.size() in inference mode)
  std::size_t truncated = 0;     // body tokens dropped
};

EncodedPrompt encode_prompt(const lm::Tokenizer& tok, const PromptRecord& r, std::size_t max_len);

struct StepLog {
  int step = 0;
  int epoch = 0;
  double loss = 0;
  double learning_rate = 0;
  double grad_norm = 0;
  double clipped_grad_norm = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0;
  std::optional<double> eval_loss;
  std::optional<double> eval_accuracy;
  std::optional<double> eval_weighted_f1;
};

struct TrainingLog {
  nlohmann::ordered_json config;
  std::string config_fingerprint;
  std::string base_fingerprint;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  double wall_clock_seconds = 0;
  std::vector<std::string> notes;

  std::string to_jsonl() const;
  static TrainingLog from_jsonl(std::string_view text);
};

/// Trained adapter weights with enough context to refuse a mismatched base.
struct AdapterCheckpoint {
  std::string config_fingerprint;
  std::string base_fingerprint;
  int rank = 0;
  double alpha = 0;
  double dropout = 0;
  std::vector<std::pair<std::string, lm::Matrix<float>>> tensors;
  std::string training_state_hash;

  nlohmann::ordered_json to_json() const;
  static AdapterCheckpoint from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static AdapterCheckpoint load(const std::filesystem::path& path);
};

/// Attaches the checkpoint's adapters to `model`; throws InvalidConfig when
/// the base fingerprint or tensor shapes differ.
void apply_checkpoint(lm::CausalLm& model, const AdapterCheckpoint& ckpt);

struct GenerationConfig {
  int max_new_tokens = 8;
  double temperature = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FinetuneOptions {
  GenerationConfig eval_generation;
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
};

struct FinetuneResult {
  AdapterCheckpoint checkpoint;
  TrainingLog log;
};

/// Trains fresh adapters on `train` and evaluates `eval` after each epoch.
/// The model keeps the trained adapters attached on return.
FinetuneResult run_finetune(lm::CausalLm& model, std::span<const PromptRecord> train,
                            std::span<const PromptRecord> eval, const QloraRunConfig& cfg,
                            const FinetuneOptions& opts = {});

std::vector<int> generate_ids(const lm::CausalLm& model, const PromptRecord& prompt, const GenerationConfig& gen);
std::string generate(const lm::CausalLm& model, const PromptRecord& prompt, const GenerationConfig& gen);

/// 1 for the domain label, 0 for "Not <domain>", -1 for "none" or no match.
/// Case-insensitive with whitespace runs collapsed; the earliest match wins
/// and at equal positions the longer phrase is preferred.
int extract_label(std::string_view generated, Domain domain);

using PredictFn = std::function<int(const corpus::LabeledExample&)>;

/// Gold labels are 0/1; a -1 prediction is an extra class no gold label matches.
metrics::WeightedReport evaluate_model(const PredictFn& predict, std::span<const corpus::LabeledExample> test);

PredictFn llm_predictor(const lm::CausalLm& model, const GenerationConfig& gen = {});

// ---------------------------------------------------------------------------
// Desk-scale base model.

struct DeskModelConfig {
  lm::TinyLmConfig lm;
  lm::PretrainConfig pretrain;
  std::size_t pretraining_texts = 4000;
  std::uint64_t corpus_seed = 1234;
};

/// Trains the word tokenizer on synthetic pretraining texts, the prompt
/// template and `extra_texts`, pretrains the tiny decoder and quantizes it.
lm::TinyCausalLm build_desk_model(const DeskModelConfig& cfg, std::span<const std::string> extra_texts = {},
                                  const std::function<void(int, double)>& on_step = {});

}  // namespace esg::ft
