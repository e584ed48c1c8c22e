// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esgbench/corpus.hpp"
#include "esgbench/finetune.hpp"
#include "esgbench/metrics.hpp"
#include "json.hpp"

namespace esg::bench {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Flat "key = value" configuration. '#' starts a comment; blank lines are
// ignored; later keys override earlier ones.

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);

/// Short revision of the source tree the binary was built from, or "unknown".
std::string_view source_revision();

// ---------------------------------------------------------------------------
// Run registry: <root>/<id>/ holding manifest.json plus artifacts.

struct RunRecord {
  std::string id;
  std::string command;  // prep, train or eval
  Json config;          // resolved configuration (hashed)
  Json inputs;          // content fingerprints of what the run consumed (hashed)
  Json meta;            // descriptive extras, not hashed
  Json report;          // eval runs only
  std::vector<std::string> artifacts;
  std::string source_revision;
  std::string created_at;

  Json to_json() const;
  static RunRecord from_json(const Json& j);
};

/// Content hash of (command, config, inputs).
std::string run_id(std::string_view command, const Json& config, const Json& inputs);

class Registry {
 public:
  explicit Registry(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dir(const std::string& id) const { return root_ / id; }
  bool contains(const std::string& id) const;
  std::optional<RunRecord> find(const std::string& id) const;
  std::vector<RunRecord> list() const;
  std::string read_artifact(const std::string& id, const std::string& name) const;

  /// Assigns the id, writes `files` and the manifest into a scratch directory
  /// and renames it into place. An existing run with the same id is returned
  /// untouched.
  RunRecord commit(RunRecord rec, const std::map<std::string, std::string>& files) const;

 private:
  std::filesystem::path root_;
};

/// Writes `content` next to `path` and renames it over `path`.
void write_atomically(const std::filesystem::path& path, std::string_view content);

// ---------------------------------------------------------------------------
// Baselines.

struct BaselineInfo {
  std::string name;
  std::string label;
  bool available = true;
  std::string notes;
};

std::vector<BaselineInfo> list_baselines();

// ---------------------------------------------------------------------------
// Commands.

struct PrepOptions {
  std::optional<std::filesystem::path> dataset;
  std::size_t synthetic = 0;  // generate a keyword corpus of this size instead of reading a file
  std::uint64_t synthetic_seed = 1;
  Domain domain = Domain::Environmental;
  corpus::SplitConfig split;
};

RunRecord cmd_prep(const Registry& reg, const PrepOptions& opts);

enum class ModelKind { Svm, Gbt, Qlora };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct TrainOptions {
  ModelKind kind = ModelKind::Svm;
  std::string split;
  KeyValues overrides;
  std::ostream* progress = nullptr;
};

RunRecord cmd_train(const Registry& reg, const TrainOptions& opts);

struct EvalOptions {
  std::string model;  // train run id or baseline name
  std::string split;
  std::string partition = "test";
  KeyValues overrides;  // generation keys for language models
};

RunRecord cmd_eval(const Registry& reg, const EvalOptions& opts);

// ---------------------------------------------------------------------------
// Comparison report.

struct ReportRow {
  Domain domain = Domain::Environmental;
  std::string category;  // qlora, base-llm, finbert-esg, svm, xgboost, ...
  std::string model;     // display label
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::string run_id;

  bool operator==(const ReportRow&) const = default;
};

struct DeltaRow {
  std::string model;     // category of the improved model
  std::string baseline;  // baseline category or "classical"
  std::vector<Domain> domains;
  std::vector<double> f1_model;
  std::vector<double> f1_baseline;
  double delta_percent = 0;

  bool operator==(const DeltaRow&) const = default;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  std::vector<DeltaRow> deltas;
  std::vector<std::string> notes;

  /// One row per table line: domain (first row of a group only), model,
  /// accuracy, precision, recall, F1.
  std::vector<std::array<std::string, 6>> cells() const;
  std::string render_text() const;
  std::string render_markdown() const;
  Json to_json() const;
  static ComparisonReport from_json(const Json& j);

  bool operator==(const ComparisonReport&) const = default;
};

/// Two decimals with trailing zeros dropped (0.60 -> 0.6, 1.00 -> 1.0).
std::string format_cell(double v);

/// Rows sorted by domain then category; with `baseline`, one delta row of
/// qlora F1 against the baseline's F1 over the domains both cover.
/// "classical" uses the per-domain mean of svm and xgboost.
ComparisonReport build_report(std::span<const RunRecord> eval_runs, const std::optional<std::string>& baseline);

struct ReportOptions {
  std::vector<std::string> runs;  // empty: every eval run in the registry
  std::optional<std::string> baseline;
};

/// Builds the report and writes report.json, report.md and report.txt under
/// <root>/reports/<hash>/.
ComparisonReport cmd_report(const Registry& reg, const ReportOptions& opts);

}  // namespace esg::bench
