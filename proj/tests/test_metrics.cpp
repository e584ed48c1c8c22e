// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <vector>

#include "doctest.h"
#include "esgbench/common.hpp"
#include "esgbench/metrics.hpp"
#include "esgbench/rng.hpp"
#include "oracles.hpp"

using namespace esg;
using namespace esg::metrics;

TEST_CASE("confusion: perfect predictions give a diagonal matrix") {
  const std::vector<int> gold{1, 0, 1};
  const std::vector<int> classes{1, 0};
  const auto c = confusion(gold, gold, classes);
  CHECK(c.matrix(0, 0) == 2);
  CHECK(c.matrix(1, 1) == 1);
  CHECK(c.matrix(0, 1) == 0);
  CHECK(c.matrix(1, 0) == 0);
}

TEST_CASE("confusion: one-vs-rest counts for class 1") {
  const std::vector<int> gold{1, 1, 0}, pred{0, 1, 0}, classes{1, 0};
  const auto c = confusion(gold, pred, classes);
  const auto& k1 = c.per_class[0];
  CHECK(k1.label == 1);
  CHECK(k1.tp == 1);
  CHECK(k1.fn == 1);
  CHECK(k1.tn == 1);
  CHECK(k1.fp == 0);
  for (const auto& k : c.per_class) CHECK(k.total() == 3);
}

TEST_CASE("confusion: error paths") {
  const std::vector<int> classes{1, 0};
  CHECK_THROWS_AS(confusion(std::vector<int>{1, 0}, std::vector<int>{1}, classes), Error);
  try {
    confusion(std::vector<int>{1, 0}, std::vector<int>{1}, classes);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LengthMismatch);
  }
  try {
    confusion(std::vector<int>{2}, std::vector<int>{1}, classes);
    FAIL("expected UnknownGoldLabel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownGoldLabel);
  }
}

TEST_CASE("prediction-only labels get a trailing column") {
  const std::vector<int> gold{1, 0}, pred{-1, 0}, classes{1, 0};
  const auto c = confusion(gold, pred, classes);
  REQUIRE(c.classes == std::vector<int>{1, 0, -1});
  CHECK(c.matrix(0, 2) == 1);
  CHECK(c.matrix.row(2).sum() == 0);
}

TEST_CASE("accuracy, precision, recall and F1 on hand counts") {
  ClassCounts c{1, 8, 2, 7, 3};
  CHECK(accuracy(c) == doctest::Approx(0.75).epsilon(1e-15));
  const double p = precision(c), r = recall(c);
  CHECK(p == doctest::Approx(0.8));
  CHECK(r == doctest::Approx(8.0 / 11.0));
  CHECK(f1(p, r) == doctest::Approx(0.761904761904762).epsilon(1e-12));
  CHECK(precision(ClassCounts{1, 0, 0, 5, 5}) == 0.0);
  CHECK(f1(1.0, 1.0) == 1.0);
  CHECK(f1(0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(accuracy(ClassCounts{}), Error);
}

TEST_CASE("weighted report: perfect predictions under imbalance") {
  const std::vector<int> gold{1, 1, 1, 0}, classes{1, 0};
  const auto r = weighted_report(gold, gold, classes);
  CHECK(r.accuracy == 1.0);
  CHECK(r.weighted.precision == doctest::Approx(1.0));
  CHECK(r.weighted.recall == doctest::Approx(1.0));
  CHECK(r.weighted.f1 == doctest::Approx(1.0));
}

TEST_CASE("weighted report: all abstain") {
  const std::vector<int> gold{1, 0, 1, 0}, pred(4, -1), classes{1, 0};
  const auto r = weighted_report(gold, pred, classes);
  CHECK(r.accuracy == 0.0);
  CHECK(r.weighted.recall == 0.0);
  CHECK(r.weighted.precision == 0.0);
  REQUIRE(r.classes.size() == 3);
  CHECK(r.classes[2].support == 0);
  CHECK_FALSE(r.notes.empty());
}

TEST_CASE("weighted report: fixed 20-sample fixture equals brute force") {
  const std::vector<int> gold{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<int> pred{1, 1, 1, 1, 1, 1, 0, 0, -1, 1, 0, 0, 0, 0, 0, 1, 1, -1, 0, 0};
  const std::vector<int> classes{1, 0};
  const auto r = weighted_report(gold, pred, classes);
  const auto o = oracle::brute_force_report(gold, pred);
  CHECK(r.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
  CHECK(std::abs(r.weighted.precision - o.w_precision) <= 1e-12);
  CHECK(std::abs(r.weighted.recall - o.w_recall) <= 1e-12);
  CHECK(std::abs(r.weighted.f1 - o.w_f1) <= 1e-12);
  // Hand count: 14 of 20 correct.
  CHECK(r.accuracy == doctest::Approx(0.7));
}

TEST_CASE("properties: permutation invariance, range, weighted identity") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(40));
    std::vector<int> gold(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      gold[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
      pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3)) - 1;
    }
    const std::vector<int> classes{1, 0};
    const auto a = weighted_report(gold, pred, classes);
    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(std::span(perm));
    std::vector<int> g2, p2;
    for (auto i : perm) {
      g2.push_back(gold[i]);
      p2.push_back(pred[i]);
    }
    const auto b = weighted_report(g2, p2, classes);
    CHECK(a == b);
    for (double v : {a.accuracy, a.weighted.precision, a.weighted.recall, a.weighted.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-15);
    }
  }
  // Every class has recall 0.5 -> weighted recall 0.5.
  const std::vector<int> gold{1, 1, 0, 0, 0, 0}, pred{1, 0, 0, 0, 1, 1}, classes{1, 0};
  CHECK(weighted_report(gold, pred, classes).weighted.recall == doctest::Approx(0.5));
}

TEST_CASE("improvement delta reproduces the published averages") {
  const std::vector<double> qlora{0.91, 0.89, 0.79};
  const std::vector<double> classical{0.83, 0.82, 0.76};
  const std::vector<double> finbert{0.83, 0.73, 0.75};
  CHECK(std::abs(improvement_delta(qlora, classical) - 7.37) <= 0.01);
  CHECK(std::abs(improvement_delta(qlora, finbert) - 12.30) <= 0.01);
  CHECK(improvement_delta(classical, classical) == 0.0);
  CHECK(improvement_delta(std::vector<double>{0.5}, std::vector<double>{0.6}) < 0.0);
  try {
    improvement_delta(std::vector<double>{0.5}, std::vector<double>{0.0});
    FAIL("expected ZeroBaseline");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroBaseline);
  }
}

TEST_CASE("report JSON round-trips and keeps field order") {
  const std::vector<int> gold{1, 0, 1, 0, 1}, pred{1, 0, 0, -1, 1}, classes{1, 0};
  const auto r = weighted_report(gold, pred, classes);
  const auto j = to_json(r);
  const std::string text = j.dump();
  CHECK(text.find("\"schema\"") < text.find("\"accuracy\""));
  CHECK(text.find("\"accuracy\"") < text.find("\"weighted\""));
  CHECK(text.find("\"weighted\"") < text.find("\"classes\""));
  CHECK(text.find("\"classes\"") < text.find("\"confusion\""));
  CHECK(text.find("\"confusion\"") < text.find("\"notes\""));
  const auto back = report_from_json(nlohmann::ordered_json::parse(text));
  CHECK(back == r);
  CHECK(to_json(back).dump() == text);
}
