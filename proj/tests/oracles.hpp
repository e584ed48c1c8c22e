// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations used only by tests. Nothing here may call into the
// library code it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

namespace esg::oracle {

struct ClassMetrics {
  int label;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  long support = 0;
};

struct BruteReport {
  double accuracy = 0;
  double w_precision = 0, w_recall = 0, w_f1 = 0;
  std::vector<ClassMetrics> classes;
};

/// Per-sample counting, one pass per class, no shared matrix.
inline BruteReport brute_force_report(const std::vector<int>& gold, const std::vector<int>& pred) {
  std::set<int> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  BruteReport r;
  long correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i] ? 1 : 0;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  for (int c : labels) {
    ClassMetrics m{c};
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == c;
      const bool p = pred[i] == c;
      if (g && p) ++m.tp;
      else if (!g && p) ++m.fp;
      else if (g && !p) ++m.fn;
      else ++m.tn;
    }
    m.support = m.tp + m.fn;
    m.precision = m.tp + m.fp == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    m.recall = m.tp + m.fn == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
    const double w = static_cast<double>(m.support) / static_cast<double>(gold.size());
    r.w_precision += w * m.precision;
    r.w_recall += w * m.recall;
    r.w_f1 += w * m.f1;
    r.classes.push_back(m);
  }
  return r;
}

/// Central finite difference of a scalar function of a flat parameter
/// vector, one coordinate at a time.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// Standard normal quantile by bisection on the CDF written with erfc.
inline double normal_quantile(double p) {
  if (p > 0.5) return -normal_quantile(1.0 - p);
  double lo = -40, hi = 40;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace esg::oracle
