// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "esgbench/rng.hpp"

namespace esg::corpus {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Largest-remainder apportionment of `total` over `counts` (ties -> lower label).
std::array<std::size_t, 2> apportion(std::size_t total, const std::array<std::size_t, 2>& counts) {
  const std::size_t n = counts[0] + counts[1];
  std::array<std::size_t, 2> quota{};
  std::array<std::size_t, 2> rem{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    quota[c] = total * counts[c] / n;
    rem[c] = total * counts[c] % n;
    assigned += quota[c];
  }
  while (assigned < total) {
    const int c = rem[1] > rem[0] ? 1 : 0;
    quota[c] += 1;
    rem[c] = 0;
    assigned += 1;
  }
  return quota;
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A physically blank line is not a record.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char ch = content[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started || field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorKind::MissingColumn, "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<LabeledExample> parse_examples(std::string_view content, Domain domain) {
  const auto records = parse_csv(content);
  if (records.empty()) throw Error(ErrorKind::MissingColumn, "no header row");
  const std::size_t arity = records.front().size();
  if (arity < 2) throw Error(ErrorKind::MissingColumn, "header has fewer than two columns");

  std::vector<LabeledExample> out;
  out.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "data row " + std::to_string(r);
    if (rec.size() != arity) {
      throw Error(ErrorKind::MissingColumn, where + " has " + std::to_string(rec.size()) +
                                                " fields, header has " + std::to_string(arity));
    }
    const auto text = trim(rec[0]);
    if (text.empty()) throw Error(ErrorKind::EmptyText, where + " has a blank text cell");
    const auto label = trim(rec[1]);
    if (label != "0" && label != "1") {
      throw Error(ErrorKind::NonBinaryLabel, where + " has label '" + std::string(label) + "'");
    }
    out.push_back({std::string(rec[0]), label == "1" ? 1 : 0, domain, r - 1});
  }
  return out;
}

std::vector<LabeledExample> load_csv(const std::filesystem::path& path, Domain domain) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_examples(ss.str(), domain);
}

void write_csv(std::ostream& os, std::span<const LabeledExample> examples) {
  os << "text,label\n";
  for (const auto& e : examples) os << csv_escape(e.text) << ',' << e.label << '\n';
}

SplitBundle stratified_split(std::span<const LabeledExample> examples, const SplitConfig& cfg) {
  if (cfg.train_size == 0 || cfg.test_size == 0) {
    throw Error(ErrorKind::InvalidConfig, "train_size and test_size must be positive");
  }
  if (cfg.train_size + cfg.test_size > examples.size()) {
    throw Error(ErrorKind::CorpusTooSmall,
                "requested " + std::to_string(cfg.train_size) + "+" + std::to_string(cfg.test_size) +
                    " examples from a corpus of " + std::to_string(examples.size()));
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;

  if (cfg.stratified) {
    std::array<std::vector<std::size_t>, 2> by_label;
    for (std::size_t i = 0; i < examples.size(); ++i) by_label[examples[i].label].push_back(i);
    for (auto& group : by_label) rng.shuffle(std::span(group));

    const std::array<std::size_t, 2> counts{by_label[0].size(), by_label[1].size()};
    const auto train_q = apportion(cfg.train_size, counts);
    const auto test_q = apportion(cfg.test_size, counts);
    for (int c = 0; c < 2; ++c) {
      if (train_q[c] + test_q[c] > counts[c]) {
        throw Error(ErrorKind::CorpusTooSmall,
                    "label " + std::to_string(c) + " has too few examples for a stratified split");
      }
      const auto& g = by_label[c];
      train_idx.insert(train_idx.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(train_q[c]));
      test_idx.insert(test_idx.end(), g.begin() + static_cast<std::ptrdiff_t>(train_q[c]),
                      g.begin() + static_cast<std::ptrdiff_t>(train_q[c] + test_q[c]));
    }
  } else {
    std::vector<std::size_t> all(examples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rng.shuffle(std::span(all));
    train_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.train_size));
    test_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(cfg.train_size),
                    all.begin() + static_cast<std::ptrdiff_t>(cfg.train_size + cfg.test_size));
  }

  std::vector<bool> used(examples.size(), false);
  for (auto i : train_idx) used[i] = true;
  for (auto i : test_idx) used[i] = true;

  std::sort(train_idx.begin(), train_idx.end());
  rng.shuffle(std::span(train_idx));
  std::sort(test_idx.begin(), test_idx.end());

  SplitBundle out;
  for (auto i : train_idx) out.train.push_back(examples[i]);
  for (auto i : test_idx) out.test.push_back(examples[i]);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!used[i]) out.eval_pool.push_back(examples[i]);
  }
  return out;
}

std::vector<LabeledExample> balance_by_repetition(std::span<const LabeledExample> pool,
                                                  std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < pool.size(); ++i) by_label[pool[i].label].push_back(i);
  if (by_label[0].empty() || by_label[1].empty()) {
    throw Error(ErrorKind::SingleClassPool, "pool lacks label " + std::to_string(by_label[0].empty() ? 0 : 1));
  }

  std::vector<LabeledExample> out(pool.begin(), pool.end());
  const int minority = by_label[0].size() < by_label[1].size() ? 0 : 1;
  const auto& src = by_label[minority];
  const std::size_t deficit = by_label[1 - minority].size() - src.size();
  Rng rng(seed);
  for (std::size_t k = 0; k < deficit; ++k) out.push_back(pool[src[rng.below(src.size())]]);
  return out;
}

std::string relabel_to_text(int label, Domain domain) {
  std::string name(to_string(domain));
  return label == 1 ? name : "Not " + name;
}

int label_from_text(std::string_view text, Domain domain) {
  for (int l : {0, 1}) {
    if (text == relabel_to_text(l, domain)) return l;
  }
  throw Error(ErrorKind::NonBinaryLabel, "'" + std::string(text) + "' is not a " +
                                             std::string(to_string(domain)) + " label");
}

}  // namespace esg::corpus
