// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace esg::lm {

/// Word-level, case-preserving tokenizer. Words are runs of letters, digits,
/// apostrophes and inner hyphens; every other printable character is its own
/// token and a newline maps to <nl>.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNewline = 4;
  static constexpr int kSpecials = 5;

  Tokenizer() = default;

  /// `required` tokens are placed right after the specials, then the most
  /// frequent remaining pieces (ties broken lexicographically) up to `cap`.
  static Tokenizer train(std::span<const std::string> texts, std::size_t cap = 512,
                         std::span<const std::string> required = {});

  static std::vector<std::string> split(std::string_view text);

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  int id(std::string_view piece) const;
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  std::string serialize() const;
  static Tokenizer deserialize(std::string_view text);

  bool operator==(const Tokenizer& o) const { return pieces_ == o.pieces_; }

 private:
  explicit Tokenizer(std::vector<std::string> pieces);

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace esg::lm
