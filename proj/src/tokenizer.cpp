// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "esgbench/common.hpp"

namespace esg::lm {

namespace {

const char* const kSpecialPieces[] = {"<pad>", "<unk>", "<bos>", "<eos>", "<nl>"};

bool word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

bool no_space_before(const std::string& p) {
  return p.size() == 1 && std::string_view(".,;:!?%)]}").find(p[0]) != std::string_view::npos;
}

bool no_space_after(const std::string& p) { return p == "(" || p == "[" || p == "{" || p == "$"; }

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!index_.emplace(pieces_[i], static_cast<int>(i)).second) {
      throw Error(ErrorKind::BadFormat, "duplicate token '" + pieces_[i] + "'");
    }
  }
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\n') {
      out.emplace_back("<nl>");
      ++i;
    } else if (std::isspace(c)) {
      ++i;
    } else if (word_char(c)) {
      std::size_t j = i;
      while (j < text.size()) {
        const auto d = static_cast<unsigned char>(text[j]);
        if (word_char(d)) {
          ++j;
        } else if (d == '-' && j + 1 < text.size() && word_char(static_cast<unsigned char>(text[j + 1])) && j > i) {
          ++j;
        } else {
          break;
        }
      }
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  return out;
}

Tokenizer Tokenizer::train(std::span<const std::string> texts, std::size_t cap, std::span<const std::string> required) {
  std::vector<std::string> pieces(std::begin(kSpecialPieces), std::end(kSpecialPieces));
  if (cap < pieces.size() + required.size()) {
    throw Error(ErrorKind::InvalidConfig, "vocabulary cap is smaller than the required tokens");
  }
  for (const auto& r : required) {
    if (std::find(pieces.begin(), pieces.end(), r) == pieces.end()) pieces.push_back(r);
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : split(t)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [w, n] : ranked) {
    if (pieces.size() >= cap) break;
    if (std::find(pieces.begin(), pieces.end(), w) == pieces.end()) pieces.push_back(w);
  }
  return Tokenizer(std::move(pieces));
}

int Tokenizer::id(std::string_view piece) const {
  const auto it = index_.find(std::string(piece));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split(text)) ids.push_back(id(w));
  return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  bool glue = true;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    if (i == kNewline) {
      out += '\n';
      glue = true;
      continue;
    }
    const auto& p = piece(i);
    if (!glue && !no_space_before(p)) out += ' ';
    out += p;
    glue = no_space_after(p);
  }
  return out;
}

std::string Tokenizer::serialize() const {
  std::string out;
  for (const auto& p : pieces_) out += p + "\n";
  return out;
}

Tokenizer Tokenizer::deserialize(std::string_view text) {
  std::vector<std::string> pieces;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) pieces.push_back(line);
  if (pieces.size() < kSpecials) throw Error(ErrorKind::BadFormat, "tokenizer file lacks special tokens");
  for (int i = 0; i < kSpecials; ++i) {
    if (pieces[static_cast<std::size_t>(i)] != kSpecialPieces[i]) {
      throw Error(ErrorKind::BadFormat, "tokenizer special tokens out of order");
    }
  }
  return Tokenizer(std::move(pieces));
}

}  // namespace esg::lm
