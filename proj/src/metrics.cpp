// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "esgbench/common.hpp"

namespace esg::metrics {

namespace {

std::ptrdiff_t index_of(const std::vector<Label>& classes, Label l) {
  auto it = std::find(classes.begin(), classes.end(), l);
  return it == classes.end() ? -1 : std::distance(classes.begin(), it);
}

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(std::span<const Label> gold, std::span<const Label> pred,
                          std::span<const Label> classes) {
  if (gold.size() != pred.size()) {
    throw Error(ErrorKind::LengthMismatch, "gold has " + std::to_string(gold.size()) +
                                               " labels, pred has " + std::to_string(pred.size()));
  }
  if (gold.empty()) throw Error(ErrorKind::EmptyInput, "no samples");

  ConfusionCounts out;
  out.classes.assign(classes.begin(), classes.end());
  for (Label g : gold) {
    if (index_of(out.classes, g) < 0) {
      throw Error(ErrorKind::UnknownGoldLabel, "gold label " + std::to_string(g) +
                                                   " not among the declared classes");
    }
  }
  std::vector<Label> extra;
  for (Label p : pred) {
    if (index_of(out.classes, p) < 0 && std::find(extra.begin(), extra.end(), p) == extra.end()) {
      extra.push_back(p);
    }
  }
  std::sort(extra.begin(), extra.end());
  out.classes.insert(out.classes.end(), extra.begin(), extra.end());

  const auto k = static_cast<Eigen::Index>(out.classes.size());
  out.matrix = CountMatrix::Zero(k, k);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    out.matrix(index_of(out.classes, gold[i]), index_of(out.classes, pred[i])) += 1;
  }

  const std::int64_t n = out.matrix.sum();
  for (Eigen::Index c = 0; c < k; ++c) {
    ClassCounts cc;
    cc.label = out.classes[static_cast<std::size_t>(c)];
    cc.tp = out.matrix(c, c);
    cc.fn = out.matrix.row(c).sum() - cc.tp;
    cc.fp = out.matrix.col(c).sum() - cc.tp;
    cc.tn = n - cc.tp - cc.fn - cc.fp;
    out.per_class.push_back(cc);
  }
  return out;
}

double accuracy(const ClassCounts& c) {
  if (c.total() == 0) throw Error(ErrorKind::EmptyInput, "accuracy of zero samples");
  return ratio(c.tp + c.tn, c.total());
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorKind::EmptyInput, "accuracy of zero samples");
  return ratio(c.correct(), c.total());
}

double precision(const ClassCounts& c) { return ratio(c.tp, c.tp + c.fp); }

double recall(const ClassCounts& c) { return ratio(c.tp, c.tp + c.fn); }

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

WeightedReport weighted_report(std::span<const Label> gold, std::span<const Label> pred,
                               std::span<const Label> classes) {
  const ConfusionCounts cc = confusion(gold, pred, classes);
  WeightedReport rep;
  rep.accuracy = accuracy(cc);
  rep.confusion = cc.matrix;

  const auto n = static_cast<double>(cc.total());
  for (const ClassCounts& c : cc.per_class) {
    ClassReport row;
    row.label = c.label;
    row.precision = precision(c);
    row.recall = recall(c);
    row.f1 = f1(row.precision, row.recall);
    row.support = c.tp + c.fn;

    const std::string tag = "class " + std::to_string(c.label);
    if (c.tp + c.fp == 0) rep.notes.push_back(tag + ": precision undefined (no predictions), reported as 0");
    if (row.support == 0) rep.notes.push_back(tag + ": prediction-only class, zero support");

    const double w = static_cast<double>(row.support) / n;
    rep.weighted.precision += w * row.precision;
    rep.weighted.recall += w * row.recall;
    rep.weighted.f1 += w * row.f1;
    rep.classes.push_back(row);
  }
  return rep;
}

double improvement_delta(std::span<const double> f1_new, std::span<const double> f1_baseline) {
  if (f1_new.size() != f1_baseline.size()) {
    throw Error(ErrorKind::LengthMismatch, "improvement_delta needs equal-length inputs");
  }
  if (f1_new.empty()) throw Error(ErrorKind::EmptyInput, "improvement_delta of nothing");
  double sum = 0.0;
  for (std::size_t i = 0; i < f1_new.size(); ++i) {
    if (!(f1_baseline[i] > 0.0)) {
      throw Error(ErrorKind::ZeroBaseline, "baseline F1 at index " + std::to_string(i) + " is not positive");
    }
    sum += 100.0 * (f1_new[i] - f1_baseline[i]) / f1_baseline[i];
  }
  return sum / static_cast<double>(f1_new.size());
}

nlohmann::ordered_json to_json(const WeightedReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["accuracy"] = r.accuracy;
  j["weighted"] = {{"precision", r.weighted.precision},
                   {"recall", r.weighted.recall},
                   {"f1", r.weighted.f1}};
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : r.classes) {
    j["classes"].push_back({{"label", c.label},
                            {"precision", c.precision},
                            {"recall", c.recall},
                            {"f1", c.f1},
                            {"support", c.support}});
  }
  j["confusion"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < r.confusion.cols(); ++k) row.push_back(r.confusion(i, k));
    j["confusion"].push_back(row);
  }
  j["notes"] = r.notes;
  return j;
}

WeightedReport report_from_json(const nlohmann::ordered_json& j) {
  if (j.value("schema", std::string{}) != kReportSchema) {
    throw Error(ErrorKind::BadFormat, "report schema is not " + std::string(kReportSchema));
  }
  WeightedReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.weighted.precision = j.at("weighted").at("precision").get<double>();
  r.weighted.recall = j.at("weighted").at("recall").get<double>();
  r.weighted.f1 = j.at("weighted").at("f1").get<double>();
  for (const auto& c : j.at("classes")) {
    r.classes.push_back({c.at("label").get<Label>(), c.at("precision").get<double>(),
                         c.at("recall").get<double>(), c.at("f1").get<double>(),
                         c.at("support").get<std::int64_t>()});
  }
  const auto& m = j.at("confusion");
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(m[0].size());
  r.confusion = CountMatrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(m[static_cast<std::size_t>(i)].size()) != cols) {
      throw Error(ErrorKind::BadFormat, "ragged confusion matrix");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      r.confusion(i, k) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<std::int64_t>();
    }
  }
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

std::string render_confusion(const WeightedReport& r) {
  std::ostringstream os;
  os << "gold\\pred";
  for (const auto& c : r.classes) os << std::setw(8) << c.label;
  os << '\n';
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    os << std::setw(9) << r.classes[static_cast<std::size_t>(i)].label;
    for (Eigen::Index k = 0; k < r.confusion.cols(); ++k) os << std::setw(8) << r.confusion(i, k);
    os << '\n';
  }
  return os.str();
}

}  // namespace esg::metrics
