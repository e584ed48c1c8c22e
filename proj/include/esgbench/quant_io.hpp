// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "esgbench/quant.hpp"

namespace esg::quant {

/// Quantized tensor file, all integers and reals little-endian:
///
///   offset  size          field
///   0       8             magic "ESGNF4Q\0"
///   8       4   u32       format version (1)
///   12      4   u32       block_size
///   16      4   u32       block_size2 (0 = absmax stored unquantized)
///   20      4   u32       ndim (always 2)
///   24      8*ndim u64    shape, outermost first
///   ..      16*8  f64     codebook levels, ascending
///   ..      8   u64       element count n
///   ..      ceil(n/2)     packed codes, element 2i in the low nibble of byte i
///   ..      8   u64       number of weight blocks nb
///   if block_size2 > 0:
///   ..      8   u64       number of second-level blocks nb2
///   ..      16*nb2        (f64 scale, f64 offset) per second-level block
///   ..      nb  u8        absmax codes
///   else:
///   ..      8*nb f64      absmax values
inline constexpr char kTensorMagic[8] = {'E', 'S', 'G', 'N', 'F', '4', 'Q', '\0'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

template <typename Scalar>
std::string encode_quantized(const QuantizedMatrix<Scalar>& q);

template <typename Scalar>
QuantizedMatrix<Scalar> decode_quantized(std::string_view bytes);

template <typename Scalar>
void save_quantized(const std::filesystem::path& path, const QuantizedMatrix<Scalar>& q);

template <typename Scalar>
QuantizedMatrix<Scalar> load_quantized(const std::filesystem::path& path);

}  // namespace esg::quant
