// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "esgbench/bench.hpp"

namespace fixture {

struct PublishedRow {
  esg::Domain domain;
  std::string_view category;
  std::string_view label;
  double accuracy, precision, recall, f1;
};

// Published weighted-average classification results, in table order.
inline constexpr std::array<PublishedRow, 15> kPublished{{
    {esg::Domain::Environmental, "qlora", "EnvLlama 2-Qlora", 0.91, 0.91, 0.91, 0.91},
    {esg::Domain::Environmental, "llama2-7b", "Llama 2", 0.12, 0.6, 0.12, 0.19},
    {esg::Domain::Environmental, "finbert-esg", "FinBERT-ESG", 0.83, 0.86, 0.83, 0.83},
    {esg::Domain::Environmental, "svm", "SVM", 0.83, 0.83, 0.83, 0.83},
    {esg::Domain::Environmental, "xgboost", "XGBoost", 0.83, 0.83, 0.83, 0.83},
    {esg::Domain::Social, "qlora", "SocLlama 2-Qlora", 0.89, 0.89, 0.89, 0.89},
    {esg::Domain::Social, "llama2-7b", "Llama 2", 0.1, 0.59, 0.1, 0.11},
    {esg::Domain::Social, "finbert-esg", "FinBERT-ESG", 0.73, 0.74, 0.73, 0.73},
    {esg::Domain::Social, "svm", "SVM", 0.82, 0.82, 0.82, 0.82},
    {esg::Domain::Social, "xgboost", "XGBoost", 0.82, 0.82, 0.82, 0.82},
    {esg::Domain::Governance, "qlora", "GovLlama 2-Qlora", 0.79, 0.79, 0.79, 0.79},
    {esg::Domain::Governance, "llama2-7b", "Llama 2", 0.12, 0.57, 0.12, 0.19},
    {esg::Domain::Governance, "finbert-esg", "FinBERT-ESG", 0.76, 0.77, 0.76, 0.75},
    {esg::Domain::Governance, "svm", "SVM", 0.77, 0.75, 0.77, 0.76},
    {esg::Domain::Governance, "xgboost", "XGBoost", 0.77, 0.75, 0.77, 0.76},
}};

// The same table as text cells, one row per line.
inline constexpr std::array<std::array<std::string_view, 6>, 15> kPublishedCells{{
    {"Env", "EnvLlama 2-Qlora", "0.91", "0.91", "0.91", "0.91"},
    {"", "Llama 2", "0.12", "0.6", "0.12", "0.19"},
    {"", "FinBERT-ESG", "0.83", "0.86", "0.83", "0.83"},
    {"", "SVM", "0.83", "0.83", "0.83", "0.83"},
    {"", "XGBoost", "0.83", "0.83", "0.83", "0.83"},
    {"Soc", "SocLlama 2-Qlora", "0.89", "0.89", "0.89", "0.89"},
    {"", "Llama 2", "0.1", "0.59", "0.1", "0.11"},
    {"", "FinBERT-ESG", "0.73", "0.74", "0.73", "0.73"},
    {"", "SVM", "0.82", "0.82", "0.82", "0.82"},
    {"", "XGBoost", "0.82", "0.82", "0.82", "0.82"},
    {"Gov", "GovLlama 2-Qlora", "0.79", "0.79", "0.79", "0.79"},
    {"", "Llama 2", "0.12", "0.57", "0.12", "0.19"},
    {"", "FinBERT-ESG", "0.76", "0.77", "0.76", "0.75"},
    {"", "SVM", "0.77", "0.75", "0.77", "0.76"},
    {"", "XGBoost", "0.77", "0.75", "0.77", "0.76"},
}};

/// An eval run record carrying one published row as its report.
inline esg::bench::RunRecord published_run(const PublishedRow& p) {
  esg::metrics::WeightedReport w;
  w.accuracy = p.accuracy;
  w.weighted = {p.precision, p.recall, p.f1};
  w.confusion = esg::metrics::CountMatrix::Zero(0, 0);
  esg::bench::RunRecord r;
  r.command = "eval";
  r.config = {{"model", std::string(p.category)},
              {"category", std::string(p.category)},
              {"label", std::string(p.label)},
              {"domain", std::string(esg::short_name(p.domain))}};
  r.inputs = {{"fixture", "published"}};
  r.report = esg::metrics::to_json(w);
  return r;
}

/// Commits every published row into `reg` (in reverse order, so the report
/// has to restore the table order itself) and returns the run ids.
inline std::vector<std::string> commit_published(const esg::bench::Registry& reg) {
  std::vector<std::string> ids;
  for (auto it = kPublished.rbegin(); it != kPublished.rend(); ++it) ids.push_back(reg.commit(published_run(*it), {}).id);
  return ids;
}

}  // namespace fixture
