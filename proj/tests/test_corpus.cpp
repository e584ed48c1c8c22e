// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "esgbench/corpus.hpp"
#include "esgbench/rng.hpp"

using namespace esg;
using namespace esg::corpus;

namespace {

std::vector<LabeledExample> balanced_corpus(std::size_t per_label) {
  std::vector<LabeledExample> v;
  for (std::size_t i = 0; i < 2 * per_label; ++i) {
    v.push_back({"text number " + std::to_string(i), static_cast<int>(i % 2), Domain::Environmental, i});
  }
  return v;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Unavailable;
}

}  // namespace

TEST_CASE("load: rows map to examples in file order") {
  const auto ex = parse_examples("sentence,label\nPlant reduced emissions,1\n\"Board, audit\",0\n",
                                 Domain::Environmental);
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].text == "Plant reduced emissions");
  CHECK(ex[0].label == 1);
  CHECK(ex[0].domain == Domain::Environmental);
  CHECK(ex[1].text == "Board, audit");
  CHECK(ex[1].row == 1);
}

TEST_CASE("load: RFC-4180 quoting, CRLF and BOM") {
  const auto ex = parse_examples("\xEF\xBB\xBFtext,label\r\n\"He said \"\"go\"\"\nnow\",1\r\n", Domain::Social);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].text == "He said \"go\"\nnow");
}

TEST_CASE("load: error paths") {
  CHECK(kind_of([] { parse_examples("text,label\nabc,2\n", Domain::Social); }) == ErrorKind::NonBinaryLabel);
  CHECK(kind_of([] { parse_examples("text,label\n   ,1\n", Domain::Social); }) == ErrorKind::EmptyText);
  CHECK(kind_of([] { parse_examples("text\nabc\n", Domain::Social); }) == ErrorKind::MissingColumn);
  CHECK(kind_of([] { parse_examples("text,label\nabc,1,extra\n", Domain::Social); }) ==
        ErrorKind::MissingColumn);
  CHECK(kind_of([] { load_csv("/nonexistent/file.csv", Domain::Social); }) == ErrorKind::MissingInput);
}

TEST_CASE("load: a 2000-row file yields 2000 examples") {
  const auto path = std::filesystem::temp_directory_path() / "esgbench_env_2k.csv";
  {
    std::ofstream out(path);
    write_csv(out, balanced_corpus(1000));
  }
  const auto ex = load_csv(path, Domain::Environmental);
  CHECK(ex.size() == 2000);
  std::filesystem::remove(path);
}

TEST_CASE("split: 250/250 stratified on 1000/1000") {
  const auto corpus = balanced_corpus(1000);
  const auto b = stratified_split(corpus, SplitConfig{});
  REQUIRE(b.train.size() == 250);
  REQUIRE(b.test.size() == 250);
  REQUIRE(b.eval_pool.size() == 1500);
  auto ones = [](const auto& v) { return std::count_if(v.begin(), v.end(), [](auto& e) { return e.label == 1; }); };
  CHECK(ones(b.train) == 125);
  CHECK(ones(b.test) == 125);

  std::set<std::size_t> rows;
  for (const auto* part : {&b.train, &b.test, &b.eval_pool}) {
    for (const auto& e : *part) CHECK(rows.insert(e.row).second);
  }
  CHECK(rows.size() == corpus.size());

  CHECK(stratified_split(corpus, SplitConfig{}) == b);
  CHECK_FALSE(stratified_split(corpus, SplitConfig{250, 250, 11, true}) == b);
}

TEST_CASE("split: corpus too small") {
  const auto corpus = balanced_corpus(1000);
  CHECK(kind_of([&] { stratified_split(corpus, SplitConfig{1500, 1000, 10, true}); }) ==
        ErrorKind::CorpusTooSmall);
}

TEST_CASE("split: stratification invariant under skewed sources") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 520 + rng.below(300);
    const std::size_t pos = 30 + rng.below(n - 60);
    std::vector<LabeledExample> corpus;
    for (std::size_t i = 0; i < n; ++i) corpus.push_back({"t" + std::to_string(i), i < pos ? 1 : 0, Domain::Governance, i});
    const auto b = stratified_split(corpus, SplitConfig{250, 250, rng.next(), true});
    const double src = static_cast<double>(pos) / static_cast<double>(n);
    for (const auto* part : {&b.train, &b.test}) {
      const auto k = std::count_if(part->begin(), part->end(), [](auto& e) { return e.label == 1; });
      CHECK(std::abs(static_cast<double>(k) / 250.0 - src) <= 1.0 / 250.0 + 1e-12);
    }
    CHECK(b.train.size() + b.test.size() + b.eval_pool.size() == n);
  }
}

TEST_CASE("balance by repetition") {
  std::vector<LabeledExample> pool;
  for (std::size_t i = 0; i < 14; ++i) pool.push_back({"p" + std::to_string(i), i < 10 ? 1 : 0, Domain::Social, i});
  const auto out = balance_by_repetition(pool, 10);
  REQUIRE(out.size() == 20);
  CHECK(std::count_if(out.begin(), out.end(), [](auto& e) { return e.label == 0; }) == 10);
  CHECK(std::equal(pool.begin(), pool.end(), out.begin()));
  for (std::size_t i = pool.size(); i < out.size(); ++i) {
    CHECK(out[i].label == 0);
    CHECK(std::find(pool.begin(), pool.end(), out[i]) != pool.end());
  }
  CHECK(balance_by_repetition(pool, 10) == out);

  std::vector<LabeledExample> even(pool.begin() + 6, pool.end());  // 4 and 4
  CHECK(balance_by_repetition(even, 1) == even);

  std::vector<LabeledExample> single(pool.begin(), pool.begin() + 5);
  CHECK(kind_of([&] { balance_by_repetition(single, 1); }) == ErrorKind::SingleClassPool);
}

TEST_CASE("relabel to text and back") {
  CHECK(relabel_to_text(1, Domain::Environmental) == "Environmental");
  CHECK(relabel_to_text(0, Domain::Environmental) == "Not Environmental");
  CHECK(relabel_to_text(1, Domain::Social) == "Social");
  for (auto d : {Domain::Environmental, Domain::Social, Domain::Governance}) {
    for (int l : {0, 1}) CHECK(label_from_text(relabel_to_text(l, d), d) == l);
  }
  CHECK(kind_of([] { label_from_text("Social", Domain::Governance); }) == ErrorKind::NonBinaryLabel);
}

TEST_CASE("csv writer round-trips awkward text") {
  std::vector<LabeledExample> ex{{"a, \"quoted\"\nline", 1, Domain::Social, 0}, {"plain", 0, Domain::Social, 1}};
  std::ostringstream os;
  write_csv(os, ex);
  CHECK(parse_examples(os.str(), Domain::Social) == ex);
}
