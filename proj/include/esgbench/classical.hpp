// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "esgbench/common.hpp"
#include "esgbench/rng.hpp"
#include "json.hpp"

namespace esg::classical {

using Labels = std::vector<int>;

enum class Kernel { Linear, Polynomial, Rbf };

std::string to_string(Kernel k);
Kernel parse_kernel(std::string_view s);

struct SvmConfig {
  Kernel kernel = Kernel::Rbf;
  double C = 1.0;
  int degree = 3;
  /// Unset means "scale": 1 / (n_features * var(X)).
  std::optional<double> gamma;
  double coef0 = 0.0;
  double tolerance = 1e-3;

  void validate() const;
  bool operator==(const SvmConfig&) const = default;
};

struct GbtConfig {
  int n_trees = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double reg_lambda = 1.0;
  double reg_alpha = 0.0;
  /// Lets a single-class training set through; the ensemble then predicts
  /// that class everywhere. Off for normal use.
  bool allow_single_class = false;

  void validate() const;
  bool operator==(const GbtConfig&) const = default;
};

struct SvmModel {
  SvmConfig config;
  double gamma = 0.0;
  Eigen::MatrixXd support_vectors;
  Eigen::VectorXd coef;  // alpha_i * y_i, y in {-1, +1}
  double rho = 0.0;
  int iterations = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

using Tree = std::vector<TreeNode>;

struct GbtModel {
  GbtConfig config;
  double base_margin = 0.0;
  std::vector<Tree> trees;
};

struct TrainedClassifier {
  std::variant<SvmModel, GbtModel> model;
  Eigen::Index n_features = 0;
  std::string vocabulary_fingerprint;

  std::string kind() const;
};

TrainedClassifier train_svm(const Eigen::MatrixXd& X, std::span<const int> y, const SvmConfig& cfg);
TrainedClassifier train_gbt(const Eigen::MatrixXd& X, std::span<const int> y, const GbtConfig& cfg);

/// Signed margin per row; positive means label 1.
Eigen::VectorXd decision_function(const TrainedClassifier& clf, const Eigen::MatrixXd& X);
Labels predict(const TrainedClassifier& clf, const Eigen::MatrixXd& X);

inline constexpr const char* kClassifierSchema = "esgbench.classifier/1";

nlohmann::ordered_json to_json(const TrainedClassifier& clf);
TrainedClassifier classifier_from_json(const nlohmann::ordered_json& j);
void save_classifier(const std::filesystem::path& path, const TrainedClassifier& clf);
TrainedClassifier load_classifier(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Hyperparameter search

struct Param {
  enum class Kind { Choice, Uniform, LogUniform, IntUniform };
  std::string name;
  Kind kind = Kind::Choice;
  std::vector<double> choices;
  double lo = 0.0;
  double hi = 0.0;

  static Param choice(std::string name, std::vector<double> values);
  static Param uniform(std::string name, double lo, double hi);
  static Param log_uniform(std::string name, double lo, double hi);
  static Param int_uniform(std::string name, int lo, int hi);
};

using ParamSet = std::map<std::string, double>;

struct SearchSpace {
  std::vector<Param> params;

  /// Throws EmptySpace if some parameter has an empty domain.
  void validate() const;
  ParamSet sample(Rng& rng) const;
};

SearchSpace default_svm_space();
SearchSpace default_gbt_space();
SvmConfig svm_config_from(const ParamSet& p, SvmConfig base = {});
GbtConfig gbt_config_from(const ParamSet& p, GbtConfig base = {});

struct TrialBudget {
  int n_trials = 30;
  double validation_fraction = 0.2;
  std::uint64_t seed = 10;

  void validate() const;
};

using TrainFn = std::function<TrainedClassifier(const Eigen::MatrixXd&, std::span<const int>, const ParamSet&)>;

struct Trial {
  ParamSet params;
  double validation_f1 = 0.0;
  bool cached = false;
};

struct TuneResult {
  ParamSet best;
  double best_f1 = 0.0;
  int best_trial = 0;
  int evaluations = 0;
  std::vector<Trial> trials;
};

/// Stratified hold-out of `fraction` of each class, seeded.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::span<const int> y,
                                                                           double fraction, std::uint64_t seed);

/// Random search maximizing validation weighted F1; ties keep the earliest
/// trial and repeated configurations are scored once.
TuneResult tune(const TrainFn& train_fn, const SearchSpace& space, const TrialBudget& budget,
                const Eigen::MatrixXd& X, std::span<const int> y);

TrainFn svm_trainer(SvmConfig base = {});
TrainFn gbt_trainer(GbtConfig base = {});

}  // namespace esg::classical
