// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/common.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <openssl/evp.h>

#include "esgbench/hash.hpp"

namespace esg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonBinaryLabel: return "NonBinaryLabel";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorKind::SingleClassPool: return "SingleClassPool";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptySpace: return "EmptySpace";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyBlock: return "EmptyBlock";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::BadFormat: return "BadFormat";
    case ErrorKind::TokenizationOverflow: return "TokenizationOverflow";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnknownGoldLabel: return "UnknownGoldLabel";
    case ErrorKind::ZeroBaseline: return "ZeroBaseline";
    case ErrorKind::UnknownSplit: return "UnknownSplit";
    case ErrorKind::UnknownModel: return "UnknownModel";
    case ErrorKind::UnknownKind: return "UnknownKind";
    case ErrorKind::LeakageRefused: return "LeakageRefused";
    case ErrorKind::NoRuns: return "NoRuns";
    case ErrorKind::Unavailable: return "Unavailable";
  }
  return "Unknown";
}

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::Environmental: return "Environmental";
    case Domain::Social: return "Social";
    case Domain::Governance: return "Governance";
  }
  return "";
}

std::string_view short_name(Domain d) {
  switch (d) {
    case Domain::Environmental: return "env";
    case Domain::Social: return "soc";
    case Domain::Governance: return "gov";
  }
  return "";
}

std::string_view topic_phrase(Domain d) {
  switch (d) {
    case Domain::Environmental: return "environmental topics";
    case Domain::Social: return "social topics";
    case Domain::Governance: return "governance topics";
  }
  return "";
}

Domain parse_domain(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "env" || lower == "environmental") return Domain::Environmental;
  if (lower == "soc" || lower == "social") return Domain::Social;
  if (lower == "gov" || lower == "governance") return Domain::Governance;
  throw Error(ErrorKind::InvalidConfig, "unknown domain '" + std::string(s) + "'");
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string short_hash(std::string_view data, std::size_t chars) {
  return sha256_hex(data).substr(0, chars);
}

}  // namespace esg
