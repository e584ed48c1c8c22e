// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "esgbench/common.hpp"

namespace esg::quant {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr std::size_t kWeightBlockSize = 64;
inline constexpr std::size_t kAbsmaxBlockSize = 256;

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// refined with two Halley steps against std::erfc.
double normal_quantile(double p);

// ---------------------------------------------------------------------------
// NF4 codebook
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct Nf4Codebook {
  std::array<Scalar, 16> levels{};

  static constexpr std::size_t zero_index = 7;

  /// Widest distance between adjacent levels; bounds the rounding error.
  Scalar widest_gap() const {
    Scalar g = 0;
    for (std::size_t i = 1; i < levels.size(); ++i) g = std::max(g, levels[i] - levels[i - 1]);
    return g;
  }

  /// Nearest level to `x`; the lower index wins a tie.
  std::uint8_t nearest(Scalar x) const {
    std::uint8_t best = 0;
    Scalar best_d = std::abs(x - levels[0]);
    for (std::uint8_t i = 1; i < 16; ++i) {
      const Scalar d = std::abs(x - levels[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }
};

/// 16 normalized standard-normal quantiles with an exact zero.
///
/// With offset = 1 - (1/30 + 1/32)/2 = 0.96770833...:
///   positive: quantile(p) for 8 of the 9 points linspace(offset, 0.5, 9), dropping 0.5
///   negative: -quantile(p) for 7 of the 8 points linspace(offset, 0.5, 8), dropping 0.5
///   plus 0, sorted, then divided by quantile(offset) so the range is [-1, 1].
/// The asymmetry (8 positive, 7 negative) is what leaves room for the zero.
template <typename Scalar = double>
Nf4Codebook<Scalar> build_nf4_codebook() {
  const double offset = 1.0 - 0.5 * (1.0 / 30.0 + 1.0 / 32.0);
  std::array<double, 16> v{};
  std::size_t n = 0;
  for (int i = 0; i < 8; ++i) v[n++] = normal_quantile(offset + (0.5 - offset) * i / 8.0);
  for (int i = 0; i < 7; ++i) v[n++] = -normal_quantile(offset + (0.5 - offset) * i / 7.0);
  v[n++] = 0.0;
  std::sort(v.begin(), v.end());
  const double top = v.back();
  Nf4Codebook<Scalar> cb;
  for (std::size_t i = 0; i < 16; ++i) cb.levels[i] = static_cast<Scalar>(v[i] / top);
  cb.levels.front() = Scalar(-1);
  cb.levels.back() = Scalar(1);
  return cb;
}

// ---------------------------------------------------------------------------
// Block quantization
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct QuantizedBlock {
  std::vector<std::uint8_t> codes;
  Scalar absmax = 0;
  std::size_t block_size = kWeightBlockSize;
};

template <typename Scalar>
QuantizedBlock<Scalar> quantize_block(std::span<const Scalar> values, const Nf4Codebook<Scalar>& cb,
                                      std::size_t block_size = kWeightBlockSize) {
  if (values.empty()) throw Error(ErrorKind::EmptyBlock, "cannot quantize an empty block");
  if (values.size() > block_size) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(values.size()) + " values exceed block size " +
                                              std::to_string(block_size));
  }
  QuantizedBlock<Scalar> qb;
  qb.block_size = block_size;
  for (Scalar v : values) qb.absmax = std::max(qb.absmax, std::abs(v));
  qb.codes.reserve(values.size());
  for (Scalar v : values) {
    qb.codes.push_back(qb.absmax == Scalar(0) ? static_cast<std::uint8_t>(Nf4Codebook<Scalar>::zero_index)
                                              : cb.nearest(v / qb.absmax));
  }
  return qb;
}

template <typename Scalar>
std::vector<Scalar> dequantize_block(const QuantizedBlock<Scalar>& qb, const Nf4Codebook<Scalar>& cb) {
  std::vector<Scalar> out;
  out.reserve(qb.codes.size());
  for (auto c : qb.codes) out.push_back(cb.levels[c & 0xF] * qb.absmax);
  return out;
}

// ---------------------------------------------------------------------------
// Double quantization of the absmax constants
// ---------------------------------------------------------------------------

/// 8-bit affine codes per second-level block: value ~ offset + code * scale,
/// offset = block minimum and scale = block range / 255.
template <typename Scalar = double>
struct DoubleQuantState {
  std::vector<std::uint8_t> codes;
  std::vector<Scalar> scales;
  std::vector<Scalar> offsets;
  std::size_t block_size2 = kAbsmaxBlockSize;

  std::size_t size() const { return codes.size(); }

  Scalar reconstruct(std::size_t i) const {
    const std::size_t b = i / block_size2;
    return offsets[b] + static_cast<Scalar>(codes[i]) * scales[b];
  }

  std::vector<Scalar> reconstruct_all() const {
    std::vector<Scalar> out(codes.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = reconstruct(i);
    return out;
  }
};

template <typename Scalar>
DoubleQuantState<Scalar> double_quantize(std::span<const Scalar> absmaxes,
                                         std::size_t block_size2 = kAbsmaxBlockSize) {
  if (absmaxes.empty()) throw Error(ErrorKind::EmptyInput, "no absmax constants to quantize");
  if (block_size2 == 0) throw Error(ErrorKind::InvalidConfig, "block_size2 must be positive");
  DoubleQuantState<Scalar> st;
  st.block_size2 = block_size2;
  st.codes.resize(absmaxes.size());
  for (std::size_t start = 0; start < absmaxes.size(); start += block_size2) {
    const auto blk = absmaxes.subspan(start, std::min(block_size2, absmaxes.size() - start));
    const auto [lo, hi] = std::minmax_element(blk.begin(), blk.end());
    const Scalar scale = (*hi - *lo) / Scalar(255);
    st.offsets.push_back(*lo);
    st.scales.push_back(scale);
    for (std::size_t i = 0; i < blk.size(); ++i) {
      const Scalar q = scale == Scalar(0) ? Scalar(0) : std::round((blk[i] - *lo) / scale);
      st.codes[start + i] = static_cast<std::uint8_t>(std::clamp(q, Scalar(0), Scalar(255)));
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Whole-matrix storage: row-major NF4 blocks with (optionally) double-quantized
// absmax constants.
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct QuantizedMatrix {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t block_size = kWeightBlockSize;
  Nf4Codebook<Scalar> codebook;
  std::vector<std::uint8_t> codes;  // one per element, row-major
  std::vector<Scalar> absmax;       // populated when not double-quantized
  bool double_quant = true;
  DoubleQuantState<Scalar> dq;

  std::size_t num_blocks() const { return (codes.size() + block_size - 1) / block_size; }

  Scalar block_scale(std::size_t b) const { return double_quant ? dq.reconstruct(b) : absmax[b]; }
};

template <typename Scalar, typename Derived>
QuantizedMatrix<Scalar> quantize_matrix(const Eigen::MatrixBase<Derived>& w, const Nf4Codebook<Scalar>& cb,
                                        bool double_quant = true, std::size_t block_size = kWeightBlockSize,
                                        std::size_t block_size2 = kAbsmaxBlockSize) {
  QuantizedMatrix<Scalar> q;
  q.rows = w.rows();
  q.cols = w.cols();
  q.block_size = block_size;
  q.codebook = cb;
  q.double_quant = double_quant;

  std::vector<Scalar> flat;
  flat.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(static_cast<Scalar>(w(r, c)));
  }
  if (flat.empty()) throw Error(ErrorKind::EmptyBlock, "cannot quantize an empty matrix");

  std::vector<Scalar> absmax;
  q.codes.reserve(flat.size());
  for (std::size_t start = 0; start < flat.size(); start += block_size) {
    const auto n = std::min(block_size, flat.size() - start);
    auto qb = quantize_block<Scalar>(std::span<const Scalar>(flat).subspan(start, n), cb, block_size);
    absmax.push_back(qb.absmax);
    q.codes.insert(q.codes.end(), qb.codes.begin(), qb.codes.end());
  }
  if (double_quant) {
    q.dq = double_quantize<Scalar>(absmax, block_size2);
  } else {
    q.absmax = std::move(absmax);
  }
  return q;
}

template <typename Scalar>
Matrix<Scalar> dequantize_matrix(const QuantizedMatrix<Scalar>& q) {
  Matrix<Scalar> w(q.rows, q.cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < q.rows; ++r) {
    for (Eigen::Index c = 0; c < q.cols; ++c, ++i) {
      w(r, c) = q.codebook.levels[q.codes[i] & 0xF] * q.block_scale(i / q.block_size);
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Low-rank adapters
// ---------------------------------------------------------------------------

/// Trainable pair whose scaled product (alpha / r) * B * A is added to a
/// frozen d_out x d_in weight.
template <typename Scalar = double>
struct LoraAdapter {
  Matrix<Scalar> A;  // r x d_in
  Matrix<Scalar> B;  // d_out x r
  Scalar alpha = 16;
  Scalar dropout = 0;

  Eigen::Index rank() const { return A.rows(); }
  Eigen::Index in_features() const { return A.cols(); }
  Eigen::Index out_features() const { return B.rows(); }
  Scalar scaling() const { return alpha / static_cast<Scalar>(rank()); }

  Matrix<Scalar> delta() const { return scaling() * (B * A); }

  void validate() const {
    if (A.rows() < 1 || B.cols() != A.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "adapter A is " + std::to_string(A.rows()) + "x" +
                                                std::to_string(A.cols()) + ", B is " + std::to_string(B.rows()) +
                                                "x" + std::to_string(B.cols()));
    }
    if (!(alpha > 0)) throw Error(ErrorKind::InvalidConfig, "lora alpha must be positive");
    if (dropout < 0 || dropout >= 1) throw Error(ErrorKind::InvalidConfig, "lora dropout must be in [0, 1)");
  }
};

/// A ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), B = 0: a fresh adapter is an exact no-op.
template <typename Scalar, typename Gen>
LoraAdapter<Scalar> init_adapter(Eigen::Index d_in, Eigen::Index d_out, Eigen::Index rank, Scalar alpha,
                                 Scalar dropout, Gen& rng) {
  LoraAdapter<Scalar> ad;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  ad.A = Matrix<Scalar>::NullaryExpr(rank, d_in, [&] { return static_cast<Scalar>(rng.uniform(-bound, bound)); });
  ad.B = Matrix<Scalar>::Zero(d_out, rank);
  ad.alpha = alpha;
  ad.dropout = dropout;
  ad.validate();
  return ad;
}

/// Inverted-dropout keep mask (entries 0 or 1/(1-p)) for an input of `n` rows.
template <typename Scalar, typename Gen>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, Scalar p, Gen& rng) {
  const Scalar keep = Scalar(1) / (Scalar(1) - p);
  return Matrix<Scalar>::NullaryExpr(rows, cols, [&] { return rng.bernoulli(p) ? Scalar(0) : keep; });
}

template <typename Scalar>
void check_shapes(Eigen::Index x_len, const Matrix<Scalar>& base, const LoraAdapter<Scalar>& ad) {
  ad.validate();
  if (base.cols() != x_len || ad.in_features() != x_len || ad.out_features() != base.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "input length " + std::to_string(x_len) + ", base " +
                                              std::to_string(base.rows()) + "x" + std::to_string(base.cols()) +
                                              ", adapter " + std::to_string(ad.out_features()) + "x" +
                                              std::to_string(ad.in_features()));
  }
}

/// y = base x + (alpha/r) B (A drop(x)); `mask` (same length as x) is the
/// dropout mask, nullptr meaning evaluation mode.
template <typename Scalar>
Vector<Scalar> lora_apply(const Vector<Scalar>& x, const Matrix<Scalar>& base, const LoraAdapter<Scalar>& ad,
                          const Vector<Scalar>* mask = nullptr) {
  check_shapes(x.size(), base, ad);
  const Vector<Scalar> xin = mask ? Vector<Scalar>(x.cwiseProduct(*mask)) : x;
  return base * x + ad.scaling() * (ad.B * (ad.A * xin));
}

/// Training-mode convenience: draws the dropout mask from `rng`.
template <typename Scalar, typename Gen>
Vector<Scalar> lora_apply(const Vector<Scalar>& x, const Matrix<Scalar>& base, const LoraAdapter<Scalar>& ad,
                          bool training, Gen& rng) {
  if (!training || ad.dropout == Scalar(0)) return lora_apply<Scalar>(x, base, ad);
  const Vector<Scalar> mask = dropout_mask<Scalar>(x.size(), 1, ad.dropout, rng);
  return lora_apply<Scalar>(x, base, ad, &mask);
}

template <typename Scalar>
Matrix<Scalar> merge_adapter(const Matrix<Scalar>& base, const LoraAdapter<Scalar>& ad) {
  check_shapes(base.cols(), base, ad);
  return base + ad.delta();
}

template <typename Scalar>
struct LoraGrads {
  Matrix<Scalar> dA;
  Matrix<Scalar> dB;
};

/// Gradients of loss(y) with respect to A and B, y = lora_apply(x, ...).
/// `loss` maps y to {value, dloss/dy}. The base weight receives no gradient.
template <typename Scalar, typename LossFn>
LoraGrads<Scalar> lora_grads(LossFn&& loss, const Vector<Scalar>& x, const Matrix<Scalar>& base,
                             const LoraAdapter<Scalar>& ad, const Vector<Scalar>* mask = nullptr) {
  const Vector<Scalar> y = lora_apply<Scalar>(x, base, ad, mask);
  const auto [value, dy] = loss(y);
  (void)value;
  const Vector<Scalar> xin = mask ? Vector<Scalar>(x.cwiseProduct(*mask)) : x;
  const Vector<Scalar> u = ad.A * xin;
  const Scalar s = ad.scaling();
  LoraGrads<Scalar> g;
  g.dB = s * dy * u.transpose();
  g.dA = (s * (ad.B.transpose() * dy)) * xin.transpose();
  return g;
}

}  // namespace esg::quant
