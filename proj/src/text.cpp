// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "esgbench/common.hpp"
#include "esgbench/hash.hpp"
#include "resources.hpp"

namespace esg::text {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const auto set = [] {
    std::unordered_set<std::string> s;
    std::istringstream in{std::string(resources::kStopwords)};
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) s.insert(line);
    }
    return s;
  }();
  return set;
}

const std::unordered_map<std::string, std::string>& lemma_table() {
  static const auto map = [] {
    std::unordered_map<std::string, std::string> m;
    std::istringstream in{std::string(resources::kLemmas)};
    for (std::string line; std::getline(in, line);) {
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab != std::string::npos) m.emplace(line.substr(0, tab), line.substr(tab + 1));
    }
    return m;
  }();
  return map;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool is_stopword(std::string_view word) { return stopwords().contains(std::string(word)); }

std::string lemmatize(std::string_view word) {
  const auto& t = lemma_table();
  auto it = t.find(std::string(word));
  return it == t.end() ? std::string(word) : it->second;
}

std::string_view stopword_resource() { return resources::kStopwords; }
std::string_view stopword_resource_checksum() { return resources::kStopwordsSha256; }

Tokens normalize_tokens(std::string_view text, const PreprocessConfig& cfg) {
  std::string s(text);
  if (cfg.lowercase) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }

  Tokens raw;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) raw.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : s) {
    const bool keep = cfg.keep_alnum_only ? is_alnum(c) : !std::isspace(static_cast<unsigned char>(c));
    if (keep) {
      cur.push_back(c);
    } else {
      flush();
    }
  }
  flush();

  Tokens out;
  out.reserve(raw.size());
  for (auto& tok : raw) {
    if (cfg.remove_stopwords && is_stopword(tok)) continue;
    if (cfg.lemmatize) tok = lemmatize(tok);
    if (cfg.stem) tok = porter_stem(tok);
    if (!tok.empty()) out.push_back(std::move(tok));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> sorted_tokens) : tokens_(std::move(sorted_tokens)) {
  std::string joined;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], i);
    joined += tokens_[i];
    joined.push_back('\n');
  }
  fingerprint_ = short_hash(joined);
}

Vocabulary Vocabulary::build(std::span<const Tokens> train_texts) {
  if (train_texts.empty()) throw Error(ErrorKind::EmptyCorpus, "no training documents");
  std::set<std::string> distinct;
  for (const auto& doc : train_texts) distinct.insert(doc.begin(), doc.end());
  return Vocabulary(std::vector<std::string>(distinct.begin(), distinct.end()));
}

std::ptrdiff_t Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out.push_back('\t');
    out += std::to_string(i);
    out.push_back('\n');
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view content) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(content)};
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::BadFormat, "vocabulary line without tab");
    const std::size_t idx = std::stoul(line.substr(tab + 1));
    if (idx != tokens.size()) throw Error(ErrorKind::BadFormat, "vocabulary indices are not contiguous");
    tokens.push_back(line.substr(0, tab));
  }
  if (!std::is_sorted(tokens.begin(), tokens.end()) ||
      std::adjacent_find(tokens.begin(), tokens.end()) != tokens.end()) {
    throw Error(ErrorKind::BadFormat, "vocabulary tokens must be unique and sorted");
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << serialize();
  if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

double FeatureVector::operator[](std::size_t i) const {
  return std::binary_search(active.begin(), active.end(), i) ? 1.0 : 0.0;
}

Eigen::VectorXd FeatureVector::dense() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
  for (auto i : active) v[static_cast<Eigen::Index>(i)] = 1.0;
  return v;
}

FeatureVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab) {
  FeatureVector fv;
  fv.dimension = vocab.size();
  for (const auto& t : tokens) {
    const auto idx = vocab.find(t);
    if (idx >= 0) fv.active.push_back(static_cast<std::size_t>(idx));
  }
  std::sort(fv.active.begin(), fv.active.end());
  fv.active.erase(std::unique(fv.active.begin(), fv.active.end()), fv.active.end());
  return fv;
}

Eigen::MatrixXd feature_matrix(std::span<const Tokens> docs, const Vocabulary& vocab) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()),
                                            static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t r = 0; r < docs.size(); ++r) {
    for (auto i : vectorize(docs[r], vocab).active) {
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = 1.0;
    }
  }
  return X;
}

}  // namespace esg::text
