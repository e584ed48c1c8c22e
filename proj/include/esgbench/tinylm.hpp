// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "esgbench/quant.hpp"
#include "esgbench/rng.hpp"
#include "esgbench/tokenizer.hpp"

namespace esg::lm {

template <typename Scalar>
using Matrix = quant::Matrix<Scalar>;

struct TinyLmConfig {
  int vocab = 512;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 256;
  int max_positions = 1024;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const TinyLmConfig&) const = default;
};

/// Pre-LayerNorm decoder block. Linear weights are stored d_out x d_in;
/// gains, shifts and biases are 1 x n row matrices.
template <typename Scalar>
struct LayerWeights {
  Matrix<Scalar> ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
};

template <typename Scalar>
struct Weights {
  Matrix<Scalar> emb;  // vocab x d
  Matrix<Scalar> pos;  // max_positions x d
  std::vector<LayerWeights<Scalar>> layers;
  Matrix<Scalar> lnf_g, lnf_b;
  Matrix<Scalar> head;  // vocab x d

  /// Calls f(name, matrix) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f("emb", emb);
    f("pos", pos);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      f(p + "ln1_g", L.ln1_g);
      f(p + "ln1_b", L.ln1_b);
      f(p + "wq", L.wq);
      f(p + "wk", L.wk);
      f(p + "wv", L.wv);
      f(p + "wo", L.wo);
      f(p + "ln2_g", L.ln2_g);
      f(p + "ln2_b", L.ln2_b);
      f(p + "w1", L.w1);
      f(p + "b1", L.b1);
      f(p + "w2", L.w2);
      f(p + "b2", L.b2);
    }
    f("lnf_g", lnf_g);
    f("lnf_b", lnf_b);
    f("head", head);
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<Weights*>(this)->visit([&](const std::string& n, Matrix<Scalar>& m) { f(n, std::as_const(m)); });
  }

  Weights zeros_like() const;
};

template <typename Scalar>
Weights<Scalar> init_weights(const TinyLmConfig& cfg, Rng& rng);

/// Names of the linear weights kept in 4-bit form inside a quantized base.
bool is_quantized_tensor(const std::string& name);

enum class Projection { Q = 0, K = 1, V = 2, O = 3 };

/// One adapter per attention projection per layer.
template <typename Scalar>
struct AdapterSet {
  std::vector<std::array<quant::LoraAdapter<Scalar>, 4>> layers;

  template <typename F>
  void visit(F&& f) {
    static const char* names[] = {"q", "k", "v", "o"};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t p = 0; p < 4; ++p) {
        const std::string base = "layers." + std::to_string(l) + "." + names[p] + ".";
        f(base + "A", layers[l][p].A);
        f(base + "B", layers[l][p].B);
      }
    }
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<AdapterSet*>(this)->visit([&](const std::string& n, Matrix<Scalar>& m) { f(n, std::as_const(m)); });
  }

  AdapterSet zeros_like() const;
  std::size_t parameter_count() const;
};

template <typename Scalar>
AdapterSet<Scalar> init_adapters(const TinyLmConfig& cfg, int rank, double alpha, double dropout, Rng& rng);

/// Logits for every position, rows = positions.
template <typename Scalar>
Matrix<Scalar> forward_logits(const Weights<Scalar>& w, const TinyLmConfig& cfg, std::span<const int> ids,
                              const AdapterSet<Scalar>* adapters = nullptr);

/// Mean cross-entropy over the tokens ids[first_target..], each predicted
/// from its prefix. Gradients, scaled by `scale`, are added into `dw` and
/// `dad` when those are non-null. Adapter dropout is sampled from
/// `dropout_rng` when given and skipped otherwise.
template <typename Scalar>
double loss_and_grads(const Weights<Scalar>& w, const TinyLmConfig& cfg, std::span<const int> ids,
                      std::size_t first_target, const AdapterSet<Scalar>* adapters, Rng* dropout_rng,
                      Weights<Scalar>* dw, AdapterSet<Scalar>* dad, Scalar scale = Scalar(1));

// ---------------------------------------------------------------------------
// Optimizer pieces shared by pretraining and adapter fine-tuning.

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight decay Adam with bias correction.
template <typename Scalar>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Matrix<Scalar>* const> params, std::span<const Matrix<Scalar>* const> grads, double lr,
            double weight_decay);

  long steps() const { return t_; }
  const std::vector<Matrix<Scalar>>& first_moments() const { return m_; }
  const std::vector<Matrix<Scalar>>& second_moments() const { return v_; }

 private:
  AdamWConfig cfg_;
  long t_ = 0;
  std::vector<Matrix<Scalar>> m_, v_;
};

/// ceil(ratio * total_steps).
int warmup_steps(int total_steps, double ratio);

/// Linear warmup from 0 then half-cosine decay to 0 over the remaining steps;
/// `step` is the 0-based optimizer step about to be taken.
double cosine_lr(int step, int total_steps, int warmup, double peak);

struct ClipResult {
  double norm = 0.0;
  double clipped_norm = 0.0;
};

/// Rescales so the global L2 norm is at most max_norm (coef = max_norm / (norm + 1e-6)).
template <typename Scalar>
ClipResult clip_grad_norm(std::span<Matrix<Scalar>* const> grads, double max_norm);

template <typename Scalar>
double global_norm(std::span<const Matrix<Scalar>* const> grads);

// ---------------------------------------------------------------------------
// Base-model pretraining and the model handle used by the fine-tuning harness.

struct PretrainConfig {
  int steps = 3000;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.2;  // learning rate after 70% of the steps
  double weight_decay = 0.0;
  std::uint64_t seed = 1234;
};

/// Next-token training of every parameter, one text per step in the given order
/// (cycled). Texts are wrapped as <bos> text <eos>.
Weights<float> pretrain(const TinyLmConfig& cfg, const Tokenizer& tok, std::span<const std::string> texts,
                        const PretrainConfig& pc, const std::function<void(int, double)>& on_step = {});

/// Abstract causal language model as seen by the fine-tuning harness. The base
/// is frozen; only the attached adapters are exposed for training.
class CausalLm {
 public:
  virtual ~CausalLm() = default;

  virtual const Tokenizer& tokenizer() const = 0;
  virtual std::size_t max_positions() const = 0;

  /// Next-token logits for the last position.
  virtual Eigen::VectorXf next_logits(std::span<const int> ids) const = 0;

  virtual void attach_adapters(int rank, double alpha, double dropout, Rng& rng) = 0;
  virtual void detach_adapters() = 0;
  virtual bool has_adapters() const = 0;

  virtual std::vector<std::pair<std::string, Matrix<float>*>> adapter_tensors() = 0;
  virtual std::vector<std::pair<std::string, Matrix<float>*>> adapter_gradients() = 0;
  virtual void zero_adapter_gradients() = 0;
  virtual std::vector<double> adapter_hyper() const = 0;  // {rank, alpha, dropout}

  /// Adds scale * d(loss)/d(adapters) into the gradient buffers; returns the loss.
  virtual double accumulate_adapter_gradients(std::span<const int> ids, std::size_t first_target, Rng* dropout_rng,
                                              float scale) = 0;

  /// SHA-256 over the frozen base: 4-bit payloads and full-precision tensors.
  virtual std::string base_fingerprint() const = 0;
};

/// The shipped desk-scale model: a small decoder whose linear weights are held
/// as NF4 with double-quantized scales and dequantized for compute.
class TinyCausalLm final : public CausalLm {
 public:
  TinyCausalLm(TinyLmConfig cfg, Tokenizer tok, const Weights<float>& full, bool quantize = true);

  const Tokenizer& tokenizer() const override { return tok_; }
  std::size_t max_positions() const override { return static_cast<std::size_t>(cfg_.max_positions); }
  Eigen::VectorXf next_logits(std::span<const int> ids) const override;

  void attach_adapters(int rank, double alpha, double dropout, Rng& rng) override;
  void detach_adapters() override;
  bool has_adapters() const override { return !adapters_.layers.empty(); }
  std::vector<std::pair<std::string, Matrix<float>*>> adapter_tensors() override;
  std::vector<std::pair<std::string, Matrix<float>*>> adapter_gradients() override;
  void zero_adapter_gradients() override;
  std::vector<double> adapter_hyper() const override;
  double accumulate_adapter_gradients(std::span<const int> ids, std::size_t first_target, Rng* dropout_rng,
                                      float scale) override;
  std::string base_fingerprint() const override;

  const TinyLmConfig& config() const { return cfg_; }
  const Weights<float>& compute_weights() const { return w_; }
  const AdapterSet<float>& adapters() const { return adapters_; }
  AdapterSet<float>& adapters() { return adapters_; }
  bool quantized() const { return !quantized_.empty(); }
  const std::map<std::string, quant::QuantizedMatrix<float>>& quantized_tensors() const { return quantized_; }

  void save(const std::filesystem::path& path) const;
  static TinyCausalLm load(const std::filesystem::path& path);

 private:
  TinyCausalLm() = default;

  TinyLmConfig cfg_;
  Tokenizer tok_;
  Weights<float> w_;
  std::map<std::string, quant::QuantizedMatrix<float>> quantized_;
  AdapterSet<float> adapters_;
  AdapterSet<float> grads_;
};

}  // namespace esg::lm
