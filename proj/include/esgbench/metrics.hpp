// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

namespace esg::metrics {

using Label = int;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// One-vs-rest counts for a single class.
struct ClassCounts {
  Label label = 0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

/// Confusion matrix over `classes` (rows = gold, columns = predicted) plus the
/// per-class one-vs-rest counts derived from it. Labels that occur only among
/// the predictions are appended after the caller's classes, ascending.
struct ConfusionCounts {
  std::vector<Label> classes;
  CountMatrix matrix;
  std::vector<ClassCounts> per_class;

  std::int64_t total() const { return matrix.sum(); }
  std::int64_t correct() const { return matrix.trace(); }
};

ConfusionCounts confusion(std::span<const Label> gold, std::span<const Label> pred,
                          std::span<const Label> classes);

double accuracy(const ClassCounts& c);
/// Global accuracy: trace / total.
double accuracy(const ConfusionCounts& c);

// Zero denominators yield 0.
double precision(const ClassCounts& c);
double recall(const ClassCounts& c);
double f1(double precision, double recall);

struct ClassReport {
  Label label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;

  bool operator==(const ClassReport&) const = default;
};

struct WeightedScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const WeightedScores&) const = default;
};

/// Support-weighted report. `accuracy` is the global fraction of correct predictions.
struct WeightedReport {
  double accuracy = 0.0;
  WeightedScores weighted;
  std::vector<ClassReport> classes;
  CountMatrix confusion;
  std::vector<std::string> notes;

  bool operator==(const WeightedReport& o) const {
    return accuracy == o.accuracy && weighted == o.weighted && classes == o.classes &&
           confusion.rows() == o.confusion.rows() && confusion.cols() == o.confusion.cols() &&
           confusion == o.confusion && notes == o.notes;
  }
};

WeightedReport weighted_report(std::span<const Label> gold, std::span<const Label> pred,
                               std::span<const Label> classes);

/// Mean relative F1 change in percent: mean_i 100 (new_i - base_i) / base_i.
double improvement_delta(std::span<const double> f1_new, std::span<const double> f1_baseline);

inline constexpr const char* kReportSchema = "esgbench.report/1";

nlohmann::ordered_json to_json(const WeightedReport& r);
WeightedReport report_from_json(const nlohmann::ordered_json& j);

/// Fixed-width text rendering of the confusion matrix with gold/pred headers.
std::string render_confusion(const WeightedReport& r);

}  // namespace esg::metrics
