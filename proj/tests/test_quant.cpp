// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "doctest.h"
#include "esgbench/hash.hpp"
#include "esgbench/quant.hpp"
#include "esgbench/quant_io.hpp"
#include "esgbench/rng.hpp"
#include "oracles.hpp"

using namespace esg;
using namespace esg::quant;

namespace {

std::string bytes_of(const Matrix<double>& m) {
  return std::string(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  return Matrix<double>::NullaryExpr(r, c, [&] { return rng.normal(); });
}

}  // namespace

TEST_CASE("normal quantile agrees with bisection on erfc") {
  for (double p : {1e-9, 0.001, 0.02, 0.1, 0.3, 0.5, 0.7, 0.9677083, 0.999, 1 - 1e-9}) {
    CHECK(normal_quantile(p) == doctest::Approx(oracle::normal_quantile(p)).epsilon(1e-12));
  }
}

TEST_CASE("NF4 codebook invariants") {
  const auto cb = build_nf4_codebook();
  CHECK(cb.levels.size() == 16);
  CHECK(cb.levels.front() == -1.0);
  CHECK(cb.levels.back() == 1.0);
  CHECK(cb.levels[Nf4Codebook<double>::zero_index] == 0.0);
  for (std::size_t i = 1; i < 16; ++i) CHECK(cb.levels[i] > cb.levels[i - 1]);
}

TEST_CASE("NF4 codebook matches the quantile construction evaluated independently") {
  const double offset = 1.0 - 0.5 * (1.0 / 30.0 + 1.0 / 32.0);
  std::vector<double> v;
  for (int i = 0; i < 8; ++i) v.push_back(oracle::normal_quantile(offset + (0.5 - offset) * i / 8.0));
  for (int i = 0; i < 7; ++i) v.push_back(-oracle::normal_quantile(offset + (0.5 - offset) * i / 7.0));
  v.push_back(0.0);
  std::sort(v.begin(), v.end());
  const auto cb = build_nf4_codebook();
  for (std::size_t i = 0; i < 16; ++i) CHECK(cb.levels[i] == doctest::Approx(v[i] / v.back()).epsilon(1e-12));

  // The float32 table shipped by the reference 4-bit kernels.
  const double published[16] = {-1.0, -0.6961928009986877, -0.5250730514526367, -0.39491748809814453,
                                -0.28444138169288635, -0.18477343022823334, -0.09105003625154495, 0.0,
                                0.07958029955625534, 0.16093020141124725, 0.24611230194568634,
                                0.33791524171829224, 0.44070982933044434, 0.5626170039176941,
                                0.7229568362236023, 1.0};
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(cb.levels[i] - published[i]) < 1e-6);
}

TEST_CASE("quantize_block worked examples") {
  const auto cb = build_nf4_codebook();
  const std::vector<double> zeros(64, 0.0);
  const auto qz = quantize_block<double>(zeros, cb);
  CHECK(qz.absmax == 0.0);
  for (double v : dequantize_block(qz, cb)) CHECK(v == 0.0);

  const std::vector<double> one{3.7};
  const auto q1 = quantize_block<double>(one, cb);
  CHECK(q1.absmax == 3.7);
  CHECK(q1.codes[0] == 15);
  CHECK(dequantize_block(q1, cb)[0] == 3.7);

  QuantizedBlock<double> manual{{15, 7, 7}, 2.0, 64};
  CHECK(dequantize_block(manual, cb) == std::vector<double>{2.0, 0.0, 0.0});

  CHECK_THROWS_AS(quantize_block<double>(std::vector<double>{}, cb), Error);
  CHECK_THROWS_AS(quantize_block<double>(std::vector<double>(65, 1.0), cb), Error);
}

TEST_CASE("nearest-level ties go to the lower index") {
  const auto cb = build_nf4_codebook();
  const double mid = 0.5 * (cb.levels[7] + cb.levels[8]);
  CHECK(cb.nearest(mid) == 7);
}

TEST_CASE("round-trip bound and re-quantization idempotence on random blocks") {
  const auto cb = build_nf4_codebook();
  const double half_gap = cb.widest_gap() / 2;
  Rng rng(99);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> x(64);
    for (auto& v : x) v = rng.normal() * (0.1 + rng.uniform());
    const auto q = quantize_block<double>(x, cb);
    const auto y = dequantize_block(q, cb);
    double err = 0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
    CHECK(err <= q.absmax * half_gap);
    CHECK(quantize_block<double>(y, cb).codes == q.codes);
  }
}

TEST_CASE("double quantization") {
  const std::vector<double> constant(300, 0.42);
  const auto s = double_quantize<double>(constant);
  for (double v : s.reconstruct_all()) CHECK(v == 0.42);

  const double step = 0.013;
  std::vector<double> ladder;
  for (int i = 0; i <= 255; ++i) ladder.push_back(i * step);
  const auto l = double_quantize<double>(ladder);
  for (std::size_t i = 0; i < ladder.size(); ++i) CHECK(std::abs(l.reconstruct(i) - ladder[i]) <= step / 2);

  Rng rng(5);
  std::vector<double> am(1000);
  for (auto& a : am) a = std::abs(rng.normal()) * 3;
  const auto d = double_quantize<double>(am, 256);
  CHECK(d.scales.size() == 4);
  for (std::size_t i = 0; i < am.size(); ++i) {
    const std::size_t b = i / 256;
    const auto lo = am.begin() + static_cast<std::ptrdiff_t>(b * 256);
    const auto hi = am.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>((b + 1) * 256, am.size()));
    const double range = *std::max_element(lo, hi) - *std::min_element(lo, hi);
    CHECK(std::abs(d.reconstruct(i) - am[i]) <= range / 510);
    CHECK(d.reconstruct(i) >= 0.0);
  }
  CHECK_THROWS_AS(double_quantize<double>(std::vector<double>{}), Error);
}

TEST_CASE("quantized matrix file round-trip and nibble order") {
  Rng rng(11);
  const auto cb = build_nf4_codebook();
  const Matrix<double> w = random_matrix(9, 15, rng);  // 135 elements: partial last block, odd count
  for (bool dq : {true, false}) {
    const auto q = quantize_matrix(w, cb, dq);
    const auto bytes = encode_quantized(q);
    CHECK(bytes.substr(0, 8) == std::string("ESGNF4Q\0", 8));
    const auto back = decode_quantized<double>(bytes);
    CHECK(back.codes == q.codes);
    CHECK(dequantize_matrix(back) == dequantize_matrix(q));
    CHECK(encode_quantized(back) == bytes);
    // Header is 24 + 16 (shape) + 128 (codebook) + 8 (count) bytes; first
    // packed byte holds element 0 in its low nibble.
    const auto first = static_cast<std::uint8_t>(bytes[24 + 16 + 128 + 8]);
    CHECK((first & 0xF) == q.codes[0]);
    CHECK((first >> 4) == q.codes[1]);
  }
  const auto q = quantize_matrix(w, cb, true);
  auto bytes = encode_quantized(q);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_quantized<double>(bytes), Error);
}

TEST_CASE("dequantized matrix stays within the per-block bound") {
  Rng rng(12);
  const auto cb = build_nf4_codebook();
  const Matrix<double> w = random_matrix(16, 64, rng);
  const auto q = quantize_matrix(w, cb, false);
  const Matrix<double> back = dequantize_matrix(q);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    CHECK((w.row(r) - back.row(r)).cwiseAbs().maxCoeff() <= q.absmax[static_cast<std::size_t>(r)] * cb.widest_gap() / 2);
  }
}

TEST_CASE("lora_apply: zero-initialized adapter is bitwise identity") {
  Rng rng(1);
  const Matrix<double> base = random_matrix(6, 5, rng);
  const auto ad = init_adapter<double>(5, 6, 3, 16.0, 0.1, rng);
  for (int t = 0; t < 20; ++t) {
    const Vector<double> x = Vector<double>::NullaryExpr(5, [&] { return rng.normal(); });
    const Vector<double> y = lora_apply<double>(x, base, ad, false, rng);
    const Vector<double> ref = base * x;
    CHECK(std::memcmp(y.data(), ref.data(), sizeof(double) * 6) == 0);
  }
}

TEST_CASE("lora_apply: linear in alpha, reproduces a constructed delta") {
  Rng rng(2);
  const Matrix<double> base = random_matrix(4, 4, rng);
  auto ad = init_adapter<double>(4, 4, 2, 8.0, 0.0, rng);
  ad.B = random_matrix(4, 2, rng);
  const Vector<double> x = Vector<double>::NullaryExpr(4, [&] { return rng.normal(); });
  const Vector<double> d1 = lora_apply<double>(x, base, ad) - base * x;
  ad.alpha *= 2;
  const Vector<double> d2 = lora_apply<double>(x, base, ad) - base * x;
  CHECK((d2 - 2 * d1).norm() <= 1e-12 * d2.norm());

  // 2x2 target: alpha = r = 2 so the scale is 1 and delta = B A exactly.
  Matrix<double> target(2, 2);
  target << 0.5, -1.0, 2.0, 0.25;
  LoraAdapter<double> exact;
  exact.A = Matrix<double>::Identity(2, 2);
  exact.B = target;
  exact.alpha = 2.0;
  Matrix<double> w(2, 2);
  w << 1, 2, 3, 4;
  Vector<double> v(2);
  v << 0.3, -0.7;
  const Vector<double> expect = (w + target) * v;
  CHECK((lora_apply<double>(v, w, exact) - expect).norm() <= 1e-15);
}

TEST_CASE("merge_adapter") {
  Rng rng(3);
  const Matrix<double> base = random_matrix(8, 8, rng);
  auto ad = init_adapter<double>(8, 8, 4, 16.0, 0.1, rng);
  CHECK(merge_adapter(base, ad) == base);
  ad.B = random_matrix(8, 4, rng);
  const Matrix<double> merged = merge_adapter(base, ad);
  for (int t = 0; t < 100; ++t) {
    const Vector<double> x = Vector<double>::NullaryExpr(8, [&] { return rng.normal(); });
    const Vector<double> y = lora_apply<double>(x, base, ad);
    CHECK((merged * x - y).norm() / y.norm() <= 1e-6);
  }
  const Matrix<double> twice = merge_adapter(merged, ad);
  CHECK((twice - (base + 2 * ad.delta())).norm() <= 1e-12);

  const Matrix<double> wrong = random_matrix(7, 8, rng);
  CHECK_THROWS_AS(merge_adapter(wrong, ad), Error);
  const Vector<double> short_x = Vector<double>::Zero(3);
  CHECK_THROWS_AS(lora_apply<double>(short_x, base, ad), Error);
}

TEST_CASE("lora_grads: finite differences, B = 0, frozen base") {
  Rng rng(4);
  const Matrix<double> base = random_matrix(4, 4, rng);
  auto ad = init_adapter<double>(4, 4, 4, 16.0, 0.0, rng);
  ad.B = random_matrix(4, 4, rng) * 0.3;
  const Vector<double> x = Vector<double>::NullaryExpr(4, [&] { return rng.normal(); });
  const Vector<double> target = Vector<double>::NullaryExpr(4, [&] { return rng.normal(); });
  auto sq = [&](const Vector<double>& y) { return std::pair{0.5 * (y - target).squaredNorm(), Vector<double>(y - target)}; };

  const std::string base_before = sha256_hex(bytes_of(base));
  const auto g = lora_grads<double>(sq, x, base, ad);

  auto pack = [](const LoraAdapter<double>& a) {
    std::vector<double> p(a.A.data(), a.A.data() + a.A.size());
    p.insert(p.end(), a.B.data(), a.B.data() + a.B.size());
    return p;
  };
  auto loss_at = [&](const std::vector<double>& p) {
    LoraAdapter<double> a = ad;
    std::copy(p.begin(), p.begin() + a.A.size(), a.A.data());
    std::copy(p.begin() + a.A.size(), p.end(), a.B.data());
    return sq(lora_apply<double>(x, base, a)).first;
  };
  const auto fd = oracle::central_difference(loss_at, pack(ad), 1e-4);
  std::vector<double> an(g.dA.data(), g.dA.data() + g.dA.size());
  an.insert(an.end(), g.dB.data(), g.dB.data() + g.dB.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < an.size(); ++i) {
    num += (an[i] - fd[i]) * (an[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  CHECK(std::sqrt(num / den) <= 1e-4);

  // One SGD step on the adapter leaves the base untouched.
  ad.A -= 0.1 * g.dA;
  ad.B -= 0.1 * g.dB;
  CHECK(sha256_hex(bytes_of(base)) == base_before);

  auto zero = init_adapter<double>(4, 4, 4, 16.0, 0.0, rng);
  const auto gz = lora_grads<double>(sq, x, base, zero);
  CHECK(gz.dA.isZero(0.0));
}

TEST_CASE("lora dropout masks the adapter input only") {
  Rng rng(5);
  const Matrix<double> base = random_matrix(3, 3, rng);
  auto ad = init_adapter<double>(3, 3, 2, 4.0, 0.5, rng);
  ad.B = random_matrix(3, 2, rng);
  const Vector<double> x = Vector<double>::Ones(3);
  const Vector<double> mask = Vector<double>::Zero(3);
  CHECK((lora_apply<double>(x, base, ad, &mask) - base * x).norm() == 0.0);
  Rng a(77), b(77);
  CHECK(lora_apply<double>(x, base, ad, true, a) == lora_apply<double>(x, base, ad, true, b));
}
