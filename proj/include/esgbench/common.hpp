// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace esg {

/// Every failure raised by the library carries one of these tags so callers
/// (and the CLI's exit-code mapping) can branch without parsing messages.
enum class ErrorKind {
  MissingColumn,
  NonBinaryLabel,
  EmptyText,
  MissingInput,
  CorpusTooSmall,
  SingleClassPool,
  EmptyCorpus,
  DegenerateLabels,
  ShapeMismatch,
  EmptySpace,
  InvalidConfig,
  EmptyBlock,
  EmptyInput,
  BadFormat,
  TokenizationOverflow,
  NonFiniteLoss,
  EmptyTestSet,
  LengthMismatch,
  UnknownGoldLabel,
  ZeroBaseline,
  UnknownSplit,
  UnknownModel,
  UnknownKind,
  LeakageRefused,
  NoRuns,
  Unavailable,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class Domain { Environmental, Social, Governance };

std::string_view to_string(Domain d);
/// Short CLI spelling: env / soc / gov.
std::string_view short_name(Domain d);
/// Accepts the short spelling or the full name, case-insensitive.
Domain parse_domain(std::string_view s);

/// Phrase used inside prompts ("environmental topics").
std::string_view topic_phrase(Domain d);

}  // namespace esg
