// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace esg {

/// Lowercase hex SHA-256 of the bytes in `data`.
std::string sha256_hex(std::string_view data);

/// First `chars` hex digits of the SHA-256; used for run ids and fingerprints.
std::string short_hash(std::string_view data, std::size_t chars = 16);

}  // namespace esg
