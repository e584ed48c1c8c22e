// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace esg::text {

struct PreprocessConfig {
  bool stem = true;
  bool lemmatize = true;
  bool remove_stopwords = true;
  bool keep_alnum_only = true;
  bool lowercase = true;
};

using Tokens = std::vector<std::string>;

/// lowercase -> split on non-alphanumerics -> stopwords -> lemma -> stem.
/// With keep_alnum_only off, splitting happens on whitespace only.
Tokens normalize_tokens(std::string_view text, const PreprocessConfig& cfg = {});

/// Porter (1980) suffix stripper, reference-implementation semantics:
/// words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

/// Dictionary lookup in the shipped irregular-form table; identity if absent.
std::string lemmatize(std::string_view word);

bool is_stopword(std::string_view word);

/// The shipped stopword list verbatim, and its recorded SHA-256.
std::string_view stopword_resource();
std::string_view stopword_resource_checksum();

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Distinct tokens of the corpus, sorted; throws EmptyCorpus on no documents.
  static Vocabulary build(std::span<const Tokens> train_texts);

  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }
  /// Index of `token`, or -1 when out of vocabulary.
  std::ptrdiff_t find(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Hash of the ordered token list; identifies the feature space.
  const std::string& fingerprint() const { return fingerprint_; }

  /// "token<TAB>index" per line.
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view content);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> sorted_tokens);

  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::string fingerprint_;
};

/// Binary presence vector stored sparsely as sorted active indices.
struct FeatureVector {
  std::vector<std::size_t> active;
  std::size_t dimension = 0;

  double operator[](std::size_t i) const;
  Eigen::VectorXd dense() const;
};

FeatureVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab);

/// Row-stacked dense matrix (one row per document).
Eigen::MatrixXd feature_matrix(std::span<const Tokens> docs, const Vocabulary& vocab);

}  // namespace esg::text
