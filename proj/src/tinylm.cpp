// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/tinylm.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "binio.hpp"
#include "esgbench/hash.hpp"
#include "esgbench/quant_io.hpp"

namespace esg::lm {

void TinyLmConfig::validate() const {
  if (vocab < Tokenizer::kSpecials) throw Error(ErrorKind::InvalidConfig, "vocab is smaller than the special tokens");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
    throw Error(ErrorKind::InvalidConfig, "d_model must be a positive multiple of n_heads");
  }
  if (n_layers < 1 || d_ff < 1 || max_positions < 2) throw Error(ErrorKind::InvalidConfig, "bad model dimensions");
}

std::size_t TinyLmConfig::parameter_count() const {
  const auto d = static_cast<std::size_t>(d_model), f = static_cast<std::size_t>(d_ff);
  const std::size_t layer = 4 * d + 4 * d * d + 2 * d * f + f + d;
  return 2 * static_cast<std::size_t>(vocab) * d + static_cast<std::size_t>(max_positions) * d +
         static_cast<std::size_t>(n_layers) * layer + 2 * d;
}

bool is_quantized_tensor(const std::string& name) {
  for (const char* suffix : {".wq", ".wk", ".wv", ".wo", ".w1", ".w2"}) {
    if (name.size() > 3 && name.compare(name.size() - 3, 3, suffix) == 0) return true;
  }
  return false;
}

template <typename Scalar>
Weights<Scalar> Weights<Scalar>::zeros_like() const {
  Weights z = *this;
  z.visit([](const std::string&, Matrix<Scalar>& m) { m.setZero(); });
  return z;
}

template <typename Scalar>
Weights<Scalar> init_weights(const TinyLmConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index d = cfg.d_model, f = cfg.d_ff, V = cfg.vocab;
  auto normal = [&](Eigen::Index r, Eigen::Index c, double sd) -> Matrix<Scalar> {
    return Matrix<Scalar>::NullaryExpr(r, c, [&] { return static_cast<Scalar>(sd * rng.normal()); });
  };
  Weights<Scalar> w;
  w.emb = normal(V, d, 0.1);
  w.pos = normal(cfg.max_positions, d, 0.1);
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerWeights<Scalar> L;
    L.ln1_g = Matrix<Scalar>::Ones(1, d);
    L.ln1_b = Matrix<Scalar>::Zero(1, d);
    L.wq = normal(d, d, 1 / std::sqrt(double(d)));
    L.wk = normal(d, d, 1 / std::sqrt(double(d)));
    L.wv = normal(d, d, 1 / std::sqrt(double(d)));
    L.wo = normal(d, d, 1 / std::sqrt(double(d)));
    L.ln2_g = Matrix<Scalar>::Ones(1, d);
    L.ln2_b = Matrix<Scalar>::Zero(1, d);
    L.w1 = normal(f, d, 1 / std::sqrt(double(d)));
    L.b1 = Matrix<Scalar>::Zero(1, f);
    L.w2 = normal(d, f, 1 / std::sqrt(double(f)));
    L.b2 = Matrix<Scalar>::Zero(1, d);
    w.layers.push_back(std::move(L));
  }
  w.lnf_g = Matrix<Scalar>::Ones(1, d);
  w.lnf_b = Matrix<Scalar>::Zero(1, d);
  w.head = normal(V, d, 1 / std::sqrt(double(d)));
  return w;
}

template <typename Scalar>
AdapterSet<Scalar> AdapterSet<Scalar>::zeros_like() const {
  AdapterSet z = *this;
  z.visit([](const std::string&, Matrix<Scalar>& m) { m.setZero(); });
  return z;
}

template <typename Scalar>
std::size_t AdapterSet<Scalar>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
AdapterSet<Scalar> init_adapters(const TinyLmConfig& cfg, int rank, double alpha, double dropout, Rng& rng) {
  if (rank < 1) throw Error(ErrorKind::InvalidConfig, "lora_r must be at least 1");
  AdapterSet<Scalar> set;
  for (int l = 0; l < cfg.n_layers; ++l) {
    std::array<quant::LoraAdapter<Scalar>, 4> a;
    for (auto& ad : a) {
      ad = quant::init_adapter<Scalar>(cfg.d_model, cfg.d_model, rank, static_cast<Scalar>(alpha),
                                       static_cast<Scalar>(dropout), rng);
    }
    set.layers.push_back(std::move(a));
  }
  return set;
}

namespace {

constexpr double kLnEps = 1e-5;

template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct LnCache {
  Matrix<S> xhat;
  Col<S> rstd;
};

template <typename S>
Matrix<S> layer_norm(const Matrix<S>& x, const Matrix<S>& g, const Matrix<S>& b, LnCache<S>& c) {
  const auto T = x.rows();
  const S n = static_cast<S>(x.cols());
  c.xhat.resize(T, x.cols());
  c.rstd.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const S mu = x.row(t).sum() / n;
    const S var = (x.row(t).array() - mu).square().sum() / n;
    c.rstd(t) = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    c.xhat.row(t) = (x.row(t).array() - mu) * c.rstd(t);
  }
  return (c.xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

template <typename S>
Matrix<S> layer_norm_backward(const Matrix<S>& dy, const Matrix<S>& g, const LnCache<S>& c, Matrix<S>* dg,
                              Matrix<S>* db) {
  if (dg) *dg += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  if (db) *db += dy.colwise().sum();
  const Matrix<S> dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
  const S n = static_cast<S>(dy.cols());
  Matrix<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index t = 0; t < dy.rows(); ++t) {
    const S m1 = dxhat.row(t).sum() / n;
    const S m2 = dxhat.row(t).dot(c.xhat.row(t)) / n;
    dx.row(t) = c.rstd(t) * (dxhat.row(t).array() - m1 - c.xhat.row(t).array() * m2);
  }
  return dx;
}

template <typename S>
struct ProjCache {
  Matrix<S> xin;  // adapter input after dropout
  Matrix<S> mask;
  Matrix<S> u;  // xin * A^T
  bool masked = false;
};

template <typename S>
Matrix<S> project(const Matrix<S>& x, const Matrix<S>& w, const quant::LoraAdapter<S>* ad, Rng* rng,
                  ProjCache<S>& c) {
  Matrix<S> y = x * w.transpose();
  if (ad) {
    c.masked = rng && ad->dropout > S(0);
    if (c.masked) {
      c.mask = quant::dropout_mask<S>(x.rows(), x.cols(), ad->dropout, *rng);
      c.xin = x.cwiseProduct(c.mask);
    } else {
      c.xin = x;
    }
    c.u = c.xin * ad->A.transpose();
    y.noalias() += ad->scaling() * (c.u * ad->B.transpose());
  }
  return y;
}

template <typename S>
Matrix<S> project_backward(const Matrix<S>& dy, const Matrix<S>& x, const Matrix<S>& w,
                           const quant::LoraAdapter<S>* ad, const ProjCache<S>& c, Matrix<S>* dw,
                           quant::LoraAdapter<S>* dad) {
  Matrix<S> dx = dy * w;
  if (dw) dw->noalias() += dy.transpose() * x;
  if (ad) {
    const S s = ad->scaling();
    const Matrix<S> du = s * (dy * ad->B);
    if (dad) {
      dad->B.noalias() += s * (dy.transpose() * c.u);
      dad->A.noalias() += du.transpose() * c.xin;
    }
    if (c.masked) {
      dx += (du * ad->A).cwiseProduct(c.mask);
    } else {
      dx.noalias() += du * ad->A;
    }
  }
  return dx;
}

template <typename S>
S gelu(S h) {
  const S c = static_cast<S>(0.7978845608028654);
  return S(0.5) * h * (S(1) + std::tanh(c * (h + S(0.044715) * h * h * h)));
}

template <typename S>
S gelu_grad(S h) {
  const S c = static_cast<S>(0.7978845608028654);
  const S t = std::tanh(c * (h + S(0.044715) * h * h * h));
  return S(0.5) * (S(1) + t) + S(0.5) * h * (S(1) - t * t) * c * (S(1) + S(3 * 0.044715) * h * h);
}

template <typename S>
struct LayerCache {
  Matrix<S> x_in, a, q, k, v, y, x_mid, b, h1, g;
  LnCache<S> ln1, ln2;
  ProjCache<S> pq, pk, pv, po;
  std::vector<Matrix<S>> probs;  // per head, T x T
};

template <typename S>
struct Forward {
  std::vector<LayerCache<S>> layers;
  Matrix<S> x_final;
  LnCache<S> lnf;
  Matrix<S> z;
};

template <typename S>
void run_forward(const Weights<S>& w, const TinyLmConfig& cfg, std::span<const int> ids,
                 const AdapterSet<S>* adapters, Rng* rng, Forward<S>& f) {
  const auto T = static_cast<Eigen::Index>(ids.size());
  if (T == 0) throw Error(ErrorKind::EmptyInput, "no tokens");
  if (T > cfg.max_positions) {
    throw Error(ErrorKind::TokenizationOverflow, std::to_string(T) + " tokens exceed the model's " +
                                                     std::to_string(cfg.max_positions) + " positions");
  }
  const Eigen::Index d = cfg.d_model, H = cfg.n_heads, hd = d / H;
  Matrix<S> x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const int id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= cfg.vocab) throw Error(ErrorKind::ShapeMismatch, "token id out of range");
    x.row(t) = w.emb.row(id) + w.pos.row(t);
  }
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(hd));
  f.layers.resize(w.layers.size());
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& L = w.layers[l];
    auto& c = f.layers[l];
    const quant::LoraAdapter<S>* ad[4] = {nullptr, nullptr, nullptr, nullptr};
    if (adapters && !adapters->layers.empty()) {
      for (int p = 0; p < 4; ++p) ad[p] = &adapters->layers[l][static_cast<std::size_t>(p)];
    }
    c.x_in = x;
    c.a = layer_norm(x, L.ln1_g, L.ln1_b, c.ln1);
    c.q = project(c.a, L.wq, ad[0], rng, c.pq);
    c.k = project(c.a, L.wk, ad[1], rng, c.pk);
    c.v = project(c.a, L.wv, ad[2], rng, c.pv);
    c.y.resize(T, d);
    c.probs.resize(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
      Matrix<S> s = (c.q.middleCols(h * hd, hd) * c.k.middleCols(h * hd, hd).transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < T; ++i) {
        const S mx = s.row(i).head(i + 1).maxCoeff();
        S sum = 0;
        for (Eigen::Index j = 0; j <= i; ++j) sum += (s(i, j) = std::exp(s(i, j) - mx));
        s.row(i).head(i + 1) /= sum;
        s.row(i).tail(T - i - 1).setZero();
      }
      c.y.middleCols(h * hd, hd) = s * c.v.middleCols(h * hd, hd);
      c.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    x += project(c.y, L.wo, ad[3], rng, c.po);
    c.x_mid = x;
    c.b = layer_norm(x, L.ln2_g, L.ln2_b, c.ln2);
    c.h1 = (c.b * L.w1.transpose()).rowwise() + L.b1.row(0);
    c.g = c.h1.unaryExpr([](S v) { return gelu(v); });
    x += (c.g * L.w2.transpose()).rowwise() + L.b2.row(0);
  }
  f.x_final = x;
  f.z = layer_norm(x, w.lnf_g, w.lnf_b, f.lnf);
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> forward_logits(const Weights<Scalar>& w, const TinyLmConfig& cfg, std::span<const int> ids,
                              const AdapterSet<Scalar>* adapters) {
  Forward<Scalar> f;
  run_forward(w, cfg, ids, adapters, nullptr, f);
  return f.z * w.head.transpose();
}

template <typename Scalar>
double loss_and_grads(const Weights<Scalar>& w, const TinyLmConfig& cfg, std::span<const int> ids,
                      std::size_t first_target, const AdapterSet<Scalar>* adapters, Rng* dropout_rng,
                      Weights<Scalar>* dw, AdapterSet<Scalar>* dad, Scalar scale) {
  using S = Scalar;
  if (first_target < 1 || first_target >= ids.size()) {
    throw Error(ErrorKind::EmptyInput, "no target tokens to score");
  }
  Forward<S> f;
  run_forward(w, cfg, ids, adapters, dropout_rng, f);
  const auto T = static_cast<Eigen::Index>(ids.size());
  const auto first_row = static_cast<Eigen::Index>(first_target) - 1;
  const Eigen::Index n_rows = T - 1 - first_row;
  const Matrix<S> logits = f.z.middleRows(first_row, n_rows) * w.head.transpose();

  double loss = 0;
  Matrix<S> dlogits(n_rows, logits.cols());
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const int target = ids[static_cast<std::size_t>(first_row + r + 1)];
    const S mx = logits.row(r).maxCoeff();
    const auto e = (logits.row(r).array() - mx).exp();
    const S sum = e.sum();
    loss += static_cast<double>(std::log(sum) + mx - logits(r, target));
    dlogits.row(r) = e / sum;
    dlogits(r, target) -= S(1);
  }
  loss /= static_cast<double>(n_rows);
  if (!dw && !dad) return loss;
  dlogits *= scale / static_cast<S>(n_rows);

  Matrix<S> dz = Matrix<S>::Zero(T, cfg.d_model);
  dz.middleRows(first_row, n_rows) = dlogits * w.head;
  if (dw) dw->head.noalias() += dlogits.transpose() * f.z.middleRows(first_row, n_rows);
  Matrix<S> dx = layer_norm_backward(dz, w.lnf_g, f.lnf, dw ? &dw->lnf_g : nullptr, dw ? &dw->lnf_b : nullptr);

  const Eigen::Index d = cfg.d_model, H = cfg.n_heads, hd = d / H;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(hd));
  for (std::size_t li = w.layers.size(); li-- > 0;) {
    const auto& L = w.layers[li];
    const auto& c = f.layers[li];
    LayerWeights<S>* G = dw ? &dw->layers[li] : nullptr;
    const quant::LoraAdapter<S>* ad[4] = {nullptr, nullptr, nullptr, nullptr};
    quant::LoraAdapter<S>* gad[4] = {nullptr, nullptr, nullptr, nullptr};
    if (adapters && !adapters->layers.empty()) {
      for (int p = 0; p < 4; ++p) {
        ad[p] = &adapters->layers[li][static_cast<std::size_t>(p)];
        if (dad) gad[p] = &dad->layers[li][static_cast<std::size_t>(p)];
      }
    }

    // Feed-forward branch.
    if (G) {
      G->w2.noalias() += dx.transpose() * c.g;
      G->b2 += dx.colwise().sum();
    }
    Matrix<S> dh = (dx * L.w2).cwiseProduct(c.h1.unaryExpr([](S v) { return gelu_grad(v); }));
    if (G) {
      G->w1.noalias() += dh.transpose() * c.b;
      G->b1 += dh.colwise().sum();
    }
    dx += layer_norm_backward<S>(dh * L.w1, L.ln2_g, c.ln2, G ? &G->ln2_g : nullptr, G ? &G->ln2_b : nullptr);

    // Attention branch.
    const Matrix<S> dy = project_backward<S>(dx, c.y, L.wo, ad[3], c.po, G ? &G->wo : nullptr, gad[3]);
    Matrix<S> dq(T, d), dk(T, d), dv(T, d);
    for (Eigen::Index h = 0; h < H; ++h) {
      const auto& P = c.probs[static_cast<std::size_t>(h)];
      const auto dyh = dy.middleCols(h * hd, hd);
      const Matrix<S> dP = dyh * c.v.middleCols(h * hd, hd).transpose();
      dv.middleCols(h * hd, hd) = P.transpose() * dyh;
      const Col<S> rs = (dP.cwiseProduct(P)).rowwise().sum();
      const Matrix<S> dS = (P.array() * (dP.colwise() - rs).array()).matrix() * inv_sqrt;
      dq.middleCols(h * hd, hd) = dS * c.k.middleCols(h * hd, hd);
      dk.middleCols(h * hd, hd) = dS.transpose() * c.q.middleCols(h * hd, hd);
    }
    Matrix<S> da = project_backward<S>(dq, c.a, L.wq, ad[0], c.pq, G ? &G->wq : nullptr, gad[0]);
    da += project_backward<S>(dk, c.a, L.wk, ad[1], c.pk, G ? &G->wk : nullptr, gad[1]);
    da += project_backward<S>(dv, c.a, L.wv, ad[2], c.pv, G ? &G->wv : nullptr, gad[2]);
    dx += layer_norm_backward<S>(da, L.ln1_g, c.ln1, G ? &G->ln1_g : nullptr, G ? &G->ln1_b : nullptr);
  }
  if (dw) {
    for (Eigen::Index t = 0; t < T; ++t) {
      dw->emb.row(ids[static_cast<std::size_t>(t)]) += dx.row(t);
      dw->pos.row(t) += dx.row(t);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
void AdamW<Scalar>::step(std::span<Matrix<Scalar>* const> params, std::span<const Matrix<Scalar>* const> grads,
                         double lr, double weight_decay) {
  if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "params and grads differ in count");
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  const double bc1 = 1 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
  const auto step_size = static_cast<Scalar>(lr / bc1);
  const auto sqrt_bc2 = static_cast<Scalar>(std::sqrt(bc2));
  const auto eps = static_cast<Scalar>(cfg_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& P = *params[i];
    const auto& G = *grads[i];
    P *= static_cast<Scalar>(1 - lr * weight_decay);
    m_[i] = b1 * m_[i] + (Scalar(1) - b1) * G;
    v_[i] = b2 * v_[i] + (Scalar(1) - b2) * G.cwiseAbs2();
    P.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() / sqrt_bc2 + eps);
  }
}

int warmup_steps(int total_steps, double ratio) {
  return static_cast<int>(std::ceil(static_cast<double>(total_steps) * ratio - 1e-12));
}

double cosine_lr(int step, int total_steps, int warmup, double peak) {
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(std::max(1, warmup));
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(std::max(1, total_steps - warmup));
  return peak * std::max(0.0, 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress)));
}

template <typename Scalar>
double global_norm(std::span<const Matrix<Scalar>* const> grads) {
  double sq = 0;
  for (const auto* g : grads) sq += g->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename Scalar>
ClipResult clip_grad_norm(std::span<Matrix<Scalar>* const> grads, double max_norm) {
  std::vector<const Matrix<Scalar>*> view(grads.begin(), grads.end());
  ClipResult r;
  r.norm = global_norm<Scalar>(view);
  const double coef = max_norm / (r.norm + 1e-6);
  if (coef < 1.0) {
    for (auto* g : grads) *g *= static_cast<Scalar>(coef);
  }
  r.clipped_norm = global_norm<Scalar>(view);
  return r;
}

// ---------------------------------------------------------------------------

Weights<float> pretrain(const TinyLmConfig& cfg, const Tokenizer& tok, std::span<const std::string> texts,
                        const PretrainConfig& pc, const std::function<void(int, double)>& on_step) {
  if (texts.empty()) throw Error(ErrorKind::EmptyCorpus, "no pretraining texts");
  if (static_cast<int>(tok.size()) > cfg.vocab) throw Error(ErrorKind::InvalidConfig, "tokenizer exceeds vocab");
  Rng rng(pc.seed);
  Weights<float> w = init_weights<float>(cfg, rng);
  Weights<float> g = w.zeros_like();
  std::vector<Matrix<float>*> params, grads;
  w.visit([&](const std::string&, Matrix<float>& m) { params.push_back(&m); });
  g.visit([&](const std::string&, Matrix<float>& m) { grads.push_back(&m); });
  std::vector<const Matrix<float>*> cgrads(grads.begin(), grads.end());
  AdamW<float> opt;
  const int drop_at = static_cast<int>(0.7 * pc.steps);
  for (int step = 0; step < pc.steps; ++step) {
    const auto& text = texts[static_cast<std::size_t>(step) % texts.size()];
    std::vector<int> ids{Tokenizer::kBos};
    for (int id : tok.encode(text)) ids.push_back(id);
    ids.push_back(Tokenizer::kEos);
    if (ids.size() > static_cast<std::size_t>(cfg.max_positions)) ids.resize(static_cast<std::size_t>(cfg.max_positions));
    for (auto* m : grads) m->setZero();
    const double loss = loss_and_grads<float>(w, cfg, ids, 1, nullptr, nullptr, &g, nullptr);
    if (!std::isfinite(loss)) throw Error(ErrorKind::NonFiniteLoss, "pretraining diverged at step " + std::to_string(step));
    const double lr = step < drop_at ? pc.learning_rate : pc.learning_rate * pc.final_lr_fraction;
    opt.step(params, cgrads, lr, pc.weight_decay);
    if (on_step) on_step(step, loss);
  }
  return w;
}

// ---------------------------------------------------------------------------

TinyCausalLm::TinyCausalLm(TinyLmConfig cfg, Tokenizer tok, const Weights<float>& full, bool quantize)
    : cfg_(cfg), tok_(std::move(tok)), w_(full) {
  cfg_.validate();
  if (static_cast<int>(tok_.size()) > cfg_.vocab) throw Error(ErrorKind::InvalidConfig, "tokenizer exceeds vocab");
  if (!quantize) return;
  const auto cb = quant::build_nf4_codebook<float>();
  w_.visit([&](const std::string& name, Matrix<float>& m) {
    if (!is_quantized_tensor(name)) return;
    auto q = quant::quantize_matrix(m, cb, true);
    m = quant::dequantize_matrix(q);
    quantized_.emplace(name, std::move(q));
  });
}

Eigen::VectorXf TinyCausalLm::next_logits(std::span<const int> ids) const {
  Forward<float> f;
  run_forward<float>(w_, cfg_, ids, has_adapters() ? &adapters_ : nullptr, nullptr, f);
  return w_.head * f.z.row(f.z.rows() - 1).transpose();
}

void TinyCausalLm::attach_adapters(int rank, double alpha, double dropout, Rng& rng) {
  adapters_ = init_adapters<float>(cfg_, rank, alpha, dropout, rng);
  grads_ = adapters_.zeros_like();
}

void TinyCausalLm::detach_adapters() {
  adapters_ = {};
  grads_ = {};
}

std::vector<std::pair<std::string, Matrix<float>*>> TinyCausalLm::adapter_tensors() {
  std::vector<std::pair<std::string, Matrix<float>*>> out;
  adapters_.visit([&](const std::string& n, Matrix<float>& m) { out.emplace_back(n, &m); });
  return out;
}

std::vector<std::pair<std::string, Matrix<float>*>> TinyCausalLm::adapter_gradients() {
  std::vector<std::pair<std::string, Matrix<float>*>> out;
  grads_.visit([&](const std::string& n, Matrix<float>& m) { out.emplace_back(n, &m); });
  return out;
}

void TinyCausalLm::zero_adapter_gradients() {
  grads_.visit([](const std::string&, Matrix<float>& m) { m.setZero(); });
}

std::vector<double> TinyCausalLm::adapter_hyper() const {
  if (!has_adapters()) return {};
  const auto& a = adapters_.layers[0][0];
  return {static_cast<double>(a.rank()), static_cast<double>(a.alpha), static_cast<double>(a.dropout)};
}

double TinyCausalLm::accumulate_adapter_gradients(std::span<const int> ids, std::size_t first_target,
                                                  Rng* dropout_rng, float scale) {
  if (!has_adapters()) throw Error(ErrorKind::InvalidConfig, "no adapters attached");
  return loss_and_grads<float>(w_, cfg_, ids, first_target, &adapters_, dropout_rng, nullptr, &grads_, scale);
}

std::string TinyCausalLm::base_fingerprint() const {
  std::string bytes;
  w_.visit([&](const std::string& name, const Matrix<float>& m) {
    bytes += name;
    if (auto it = quantized_.find(name); it != quantized_.end()) {
      bytes += quant::encode_quantized(it->second);
    } else {
      bytes.append(reinterpret_cast<const char*>(m.data()), sizeof(float) * static_cast<std::size_t>(m.size()));
    }
  });
  return sha256_hex(bytes);
}

namespace {

constexpr char kModelMagic[8] = {'E', 'S', 'G', 'T', 'L', 'M', '\0', '\0'};
constexpr std::uint32_t kModelFormatVersion = 1;

}  // namespace

/// Model file, little-endian: magic "ESGTLM\0\0", u32 version, six u32 config
/// fields (vocab, d_model, n_heads, n_layers, d_ff, max_positions), tokenizer
/// text (u64 length + bytes), u32 tensor count, then per tensor its name
/// (u64 length + bytes), a u8 kind and either u64 rows, u64 cols and f32
/// values row by row (kind 0) or an embedded quantized tensor (kind 1, u64
/// length + bytes).
void TinyCausalLm::save(const std::filesystem::path& path) const {
  std::string out(kModelMagic, sizeof(kModelMagic));
  binio::put<std::uint32_t>(out, kModelFormatVersion);
  for (int v : {cfg_.vocab, cfg_.d_model, cfg_.n_heads, cfg_.n_layers, cfg_.d_ff, cfg_.max_positions}) {
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  binio::put_string(out, tok_.serialize());
  std::uint32_t count = 0;
  w_.visit([&](const std::string&, const Matrix<float>&) { ++count; });
  binio::put<std::uint32_t>(out, count);
  w_.visit([&](const std::string& name, const Matrix<float>& m) {
    binio::put_string(out, name);
    if (auto it = quantized_.find(name); it != quantized_.end()) {
      binio::put<std::uint8_t>(out, 1);
      binio::put_string(out, quant::encode_quantized(it->second));
    } else {
      binio::put<std::uint8_t>(out, 0);
      binio::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      binio::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) binio::put<float>(out, m(r, c));
      }
    }
  });
  std::ofstream f(path, std::ios::binary);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::MissingInput, "cannot write " + path.string());
}

TinyCausalLm TinyCausalLm::load(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path.string());
  binio::Reader rd(bytes, "model file");
  if (rd.take(sizeof(kModelMagic)) != std::string_view(kModelMagic, sizeof(kModelMagic))) {
    throw Error(ErrorKind::BadFormat, "not a model file");
  }
  if (rd.get<std::uint32_t>() != kModelFormatVersion) throw Error(ErrorKind::BadFormat, "unsupported model version");
  TinyCausalLm m;
  int* fields[] = {&m.cfg_.vocab, &m.cfg_.d_model, &m.cfg_.n_heads, &m.cfg_.n_layers, &m.cfg_.d_ff,
                   &m.cfg_.max_positions};
  for (int* f : fields) *f = static_cast<int>(rd.get<std::uint32_t>());
  m.cfg_.validate();
  m.tok_ = Tokenizer::deserialize(rd.get_string());
  Rng unused(0);
  m.w_ = init_weights<float>(m.cfg_, unused);
  std::map<std::string, Matrix<float>*> slots;
  m.w_.visit([&](const std::string& name, Matrix<float>& t) { slots[name] = &t; });
  const auto count = rd.get<std::uint32_t>();
  if (count != slots.size()) throw Error(ErrorKind::BadFormat, "tensor count does not match the config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = rd.get_string();
    const auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorKind::BadFormat, "unexpected tensor '" + name + "'");
    Matrix<float>& t = *it->second;
    const auto kind = rd.get<std::uint8_t>();
    if (kind == 1) {
      auto q = quant::decode_quantized<float>(rd.get_string());
      if (q.rows != t.rows() || q.cols != t.cols()) throw Error(ErrorKind::BadFormat, "shape mismatch for " + name);
      t = quant::dequantize_matrix(q);
      m.quantized_.emplace(name, std::move(q));
    } else if (kind == 0) {
      const auto rows = static_cast<Eigen::Index>(rd.get<std::uint64_t>());
      const auto cols = static_cast<Eigen::Index>(rd.get<std::uint64_t>());
      if (rows != t.rows() || cols != t.cols()) throw Error(ErrorKind::BadFormat, "shape mismatch for " + name);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = rd.get<float>();
      }
    } else {
      throw Error(ErrorKind::BadFormat, "unknown tensor kind");
    }
  }
  if (!rd.done()) throw Error(ErrorKind::BadFormat, "trailing bytes in model file");
  return m;
}

template struct Weights<float>;
template struct Weights<double>;
template struct AdapterSet<float>;
template struct AdapterSet<double>;
template class AdamW<float>;
template class AdamW<double>;
template Weights<float> init_weights<float>(const TinyLmConfig&, Rng&);
template Weights<double> init_weights<double>(const TinyLmConfig&, Rng&);
template AdapterSet<float> init_adapters<float>(const TinyLmConfig&, int, double, double, Rng&);
template AdapterSet<double> init_adapters<double>(const TinyLmConfig&, int, double, double, Rng&);
template Matrix<float> forward_logits<float>(const Weights<float>&, const TinyLmConfig&, std::span<const int>,
                                             const AdapterSet<float>*);
template Matrix<double> forward_logits<double>(const Weights<double>&, const TinyLmConfig&, std::span<const int>,
                                               const AdapterSet<double>*);
template double loss_and_grads<float>(const Weights<float>&, const TinyLmConfig&, std::span<const int>, std::size_t,
                                      const AdapterSet<float>*, Rng*, Weights<float>*, AdapterSet<float>*, float);
template double loss_and_grads<double>(const Weights<double>&, const TinyLmConfig&, std::span<const int>,
                                       std::size_t, const AdapterSet<double>*, Rng*, Weights<double>*,
                                       AdapterSet<double>*, double);
template ClipResult clip_grad_norm<float>(std::span<Matrix<float>* const>, double);
template ClipResult clip_grad_norm<double>(std::span<Matrix<double>* const>, double);
template double global_norm<float>(std::span<const Matrix<float>* const>);
template double global_norm<double>(std::span<const Matrix<double>* const>);

}  // namespace esg::lm
