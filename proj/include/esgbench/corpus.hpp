// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esgbench/common.hpp"

namespace esg::corpus {

struct LabeledExample {
  std::string text;
  int label = 0;  // 0 or 1
  Domain domain = Domain::Environmental;
  std::size_t row = 0;  // 0-based data-row index in the source file

  bool operator==(const LabeledExample&) const = default;
};

struct SplitConfig {
  std::size_t train_size = 250;
  std::size_t test_size = 250;
  std::uint64_t seed = 10;
  bool stratified = true;
};

struct SplitBundle {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::vector<LabeledExample> eval_pool;

  bool operator==(const SplitBundle&) const = default;
};

/// RFC-4180 record reader: quoted fields, doubled quotes, embedded newlines,
/// CRLF line ends. A leading UTF-8 BOM is skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

std::string csv_escape(std::string_view field);

/// Header row first; text is column 0 and label column 1 whatever the
/// header says. Every data row must have the header's arity.
std::vector<LabeledExample> load_csv(const std::filesystem::path& path, Domain domain);
std::vector<LabeledExample> parse_examples(std::string_view content, Domain domain);

/// Writes `text,label` with a header, quoting as needed.
void write_csv(std::ostream& os, std::span<const LabeledExample> examples);

/// Per-label proportional allocation (largest remainder) of train and test
/// from per-label shuffled pools; the train list is then shuffled again.
/// Test and eval_pool keep source order.
SplitBundle stratified_split(std::span<const LabeledExample> examples, const SplitConfig& cfg);

/// Appends seeded with-replacement repeats of minority-class examples until
/// both labels have equal counts.
std::vector<LabeledExample> balance_by_repetition(std::span<const LabeledExample> pool,
                                                  std::uint64_t seed);

/// 1 -> "Environmental", 0 -> "Not Environmental" (likewise Social, Governance).
std::string relabel_to_text(int label, Domain domain);
/// Inverse of relabel_to_text; throws NonBinaryLabel for unknown strings.
int label_from_text(std::string_view text, Domain domain);

}  // namespace esg::corpus
