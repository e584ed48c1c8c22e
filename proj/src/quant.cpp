// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "esgbench/quant.hpp"
#include "esgbench/quant_io.hpp"
#include "binio.hpp"

namespace esg::quant {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::InvalidConfig, "normal_quantile needs p in [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  if (p > 0.5) return -normal_quantile(1.0 - p);
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
  }
  return x;
}

using binio::put;

namespace {

class Reader : public binio::Reader {
 public:
  explicit Reader(std::string_view data) : binio::Reader(data, "quantized tensor file") {}
};

}  // namespace

template <typename Scalar>
std::string encode_quantized(const QuantizedMatrix<Scalar>& q) {
  std::string out(kTensorMagic, sizeof(kTensorMagic));
  put<std::uint32_t>(out, kTensorFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(q.block_size));
  put<std::uint32_t>(out, q.double_quant ? static_cast<std::uint32_t>(q.dq.block_size2) : 0U);
  put<std::uint32_t>(out, 2U);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(q.rows));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(q.cols));
  for (Scalar l : q.codebook.levels) put<double>(out, static_cast<double>(l));
  put<std::uint64_t>(out, q.codes.size());
  for (std::size_t i = 0; i < q.codes.size(); i += 2) {
    const std::uint8_t lo = q.codes[i] & 0xF;
    const std::uint8_t hi = i + 1 < q.codes.size() ? (q.codes[i + 1] & 0xF) : 0;
    out.push_back(static_cast<char>(lo | (hi << 4)));
  }
  put<std::uint64_t>(out, q.num_blocks());
  if (q.double_quant) {
    put<std::uint64_t>(out, q.dq.scales.size());
    for (std::size_t b = 0; b < q.dq.scales.size(); ++b) {
      put<double>(out, static_cast<double>(q.dq.scales[b]));
      put<double>(out, static_cast<double>(q.dq.offsets[b]));
    }
    out.append(reinterpret_cast<const char*>(q.dq.codes.data()), q.dq.codes.size());
  } else {
    for (Scalar a : q.absmax) put<double>(out, static_cast<double>(a));
  }
  return out;
}

template <typename Scalar>
QuantizedMatrix<Scalar> decode_quantized(std::string_view bytes) {
  Reader rd(bytes);
  if (rd.take(sizeof(kTensorMagic)) != std::string_view(kTensorMagic, sizeof(kTensorMagic))) {
    throw Error(ErrorKind::BadFormat, "not a quantized tensor file");
  }
  if (rd.get<std::uint32_t>() != kTensorFormatVersion) throw Error(ErrorKind::BadFormat, "unsupported version");
  QuantizedMatrix<Scalar> q;
  q.block_size = rd.get<std::uint32_t>();
  const auto bs2 = rd.get<std::uint32_t>();
  if (rd.get<std::uint32_t>() != 2U) throw Error(ErrorKind::BadFormat, "only 2-D tensors are supported");
  q.rows = static_cast<Eigen::Index>(rd.get<std::uint64_t>());
  q.cols = static_cast<Eigen::Index>(rd.get<std::uint64_t>());
  for (auto& l : q.codebook.levels) l = static_cast<Scalar>(rd.get<double>());
  const auto n = rd.get<std::uint64_t>();
  if (q.block_size == 0 || n != static_cast<std::uint64_t>(q.rows * q.cols)) {
    throw Error(ErrorKind::BadFormat, "element count does not match shape");
  }
  const auto packed = rd.take((n + 1) / 2);
  q.codes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto byte = static_cast<std::uint8_t>(packed[i / 2]);
    q.codes[i] = (i % 2 == 0) ? (byte & 0xF) : (byte >> 4);
  }
  const auto nb = rd.get<std::uint64_t>();
  if (nb != q.num_blocks()) throw Error(ErrorKind::BadFormat, "block count does not match shape");
  q.double_quant = bs2 > 0;
  if (q.double_quant) {
    q.dq.block_size2 = bs2;
    const auto nb2 = rd.get<std::uint64_t>();
    if (nb2 != (nb + bs2 - 1) / bs2) throw Error(ErrorKind::BadFormat, "second-level block count mismatch");
    for (std::uint64_t b = 0; b < nb2; ++b) {
      q.dq.scales.push_back(static_cast<Scalar>(rd.get<double>()));
      q.dq.offsets.push_back(static_cast<Scalar>(rd.get<double>()));
    }
    const auto codes = rd.take(nb);
    q.dq.codes.assign(codes.begin(), codes.end());
  } else {
    for (std::uint64_t b = 0; b < nb; ++b) q.absmax.push_back(static_cast<Scalar>(rd.get<double>()));
  }
  if (!rd.done()) throw Error(ErrorKind::BadFormat, "trailing bytes after quantized tensor");
  return q;
}

template <typename Scalar>
void save_quantized(const std::filesystem::path& path, const QuantizedMatrix<Scalar>& q) {
  std::ofstream out(path, std::ios::binary);
  const auto bytes = encode_quantized(q);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + path.string());
}

template <typename Scalar>
QuantizedMatrix<Scalar> load_quantized(const std::filesystem::path& path) {
  return decode_quantized<Scalar>(binio::read_file(path.string()));
}

}  // namespace esg::quant

namespace esg::binio {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace esg::binio

namespace esg::quant {

template std::string encode_quantized<float>(const QuantizedMatrix<float>&);
template std::string encode_quantized<double>(const QuantizedMatrix<double>&);
template QuantizedMatrix<float> decode_quantized<float>(std::string_view);
template QuantizedMatrix<double> decode_quantized<double>(std::string_view);
template void save_quantized<float>(const std::filesystem::path&, const QuantizedMatrix<float>&);
template void save_quantized<double>(const std::filesystem::path&, const QuantizedMatrix<double>&);
template QuantizedMatrix<float> load_quantized<float>(const std::filesystem::path&);
template QuantizedMatrix<double> load_quantized<double>(const std::filesystem::path&);

}  // namespace esg::quant
