// Copyright 2026 The esgbench Authors
// SPDX-License-Identifier: Apache-2.0

#include "esgbench/classical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "esgbench/metrics.hpp"

namespace esg::classical {

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::Linear: return "linear";
    case Kernel::Polynomial: return "polynomial";
    case Kernel::Rbf: return "rbf";
  }
  return "?";
}

Kernel parse_kernel(std::string_view s) {
  if (s == "linear") return Kernel::Linear;
  if (s == "polynomial" || s == "poly") return Kernel::Polynomial;
  if (s == "rbf") return Kernel::Rbf;
  throw Error(ErrorKind::InvalidConfig, "unknown kernel '" + std::string(s) + "'");
}

void SvmConfig::validate() const {
  if (!(C > 0)) throw Error(ErrorKind::InvalidConfig, "C must be positive");
  if (degree < 1) throw Error(ErrorKind::InvalidConfig, "degree must be at least 1");
  if (gamma && !(*gamma > 0)) throw Error(ErrorKind::InvalidConfig, "gamma must be positive");
  if (!(tolerance > 0)) throw Error(ErrorKind::InvalidConfig, "tolerance must be positive");
}

void GbtConfig::validate() const {
  if (n_trees < 1) throw Error(ErrorKind::InvalidConfig, "n_trees must be positive");
  if (max_depth < 1) throw Error(ErrorKind::InvalidConfig, "max_depth must be positive");
  if (!(learning_rate > 0 && learning_rate <= 1)) {
    throw Error(ErrorKind::InvalidConfig, "learning_rate must lie in (0, 1]");
  }
  if (!(reg_lambda >= 0)) throw Error(ErrorKind::InvalidConfig, "reg_lambda must be non-negative");
  if (!(reg_alpha >= 0)) throw Error(ErrorKind::InvalidConfig, "reg_alpha must be non-negative");
}

std::string TrainedClassifier::kind() const { return model.index() == 0 ? "svm" : "xgboost"; }

namespace {

void check_training_set(const Eigen::MatrixXd& X, std::span<const int> y, bool allow_single_class) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()) + " labels");
  }
  bool seen[2] = {false, false};
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorKind::NonBinaryLabel, "label " + std::to_string(v) + " is not 0/1");
    seen[v] = true;
  }
  if (y.empty()) throw Error(ErrorKind::DegenerateLabels, "training set is empty");
  if (!(seen[0] && seen[1]) && !allow_single_class) {
    throw Error(ErrorKind::DegenerateLabels, "training labels contain a single class");
  }
}

// ---------------------------------------------------------------------------
// SVM: SMO on the C-SVC dual with second-order working set selection.

double resolve_gamma(const SvmConfig& cfg, const Eigen::MatrixXd& X) {
  if (cfg.gamma) return *cfg.gamma;
  if (X.size() == 0) return 1.0;
  const double mean = X.mean();
  const double var = X.array().square().mean() - mean * mean;
  return var > 0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, Kernel k, double gamma,
                              int degree, double coef0) {
  Eigen::MatrixXd K = A * B.transpose();
  switch (k) {
    case Kernel::Linear: break;
    case Kernel::Polynomial:
      K = (gamma * K.array() + coef0).pow(static_cast<double>(degree)).matrix();
      break;
    case Kernel::Rbf: {
      const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
      const Eigen::VectorXd b2 = B.rowwise().squaredNorm();
      for (Eigen::Index j = 0; j < K.cols(); ++j) {
        for (Eigen::Index i = 0; i < K.rows(); ++i) {
          K(i, j) = std::exp(-gamma * std::max(0.0, a2(i) + b2(j) - 2 * K(i, j)));
        }
      }
      break;
    }
  }
  return K;
}

struct SmoResult {
  Eigen::VectorXd alpha;
  double rho = 0.0;
  int iterations = 0;
};

SmoResult smo(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double eps) {
  constexpr double kTau = 1e-12;
  const Eigen::Index n = K.rows();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
  auto Q = [&](Eigen::Index i, Eigen::Index j) { return y(i) * y(j) * K(i, j); };
  auto upper = [&](Eigen::Index t) { return alpha(t) >= C; };
  auto lower = [&](Eigen::Index t) { return alpha(t) <= 0; };
  const long max_iter = std::max<long>(10'000'000, 100 * static_cast<long>(n));

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -G(t) >= gmax) gmax = -G(t), i = t;
      } else {
        if (!lower(t) && G(t) >= gmax) gmax = G(t), i = t;
      }
    }
    if (i < 0) break;
    Eigen::Index j = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      double grad_diff;
      if (y(t) > 0) {
        if (lower(t)) continue;
        grad_diff = gmax + G(t);
        gmax2 = std::max(gmax2, G(t));
        if (grad_diff <= 0) continue;
        double quad = K(i, i) + K(t, t) - 2.0 * y(i) * Q(i, t);
        const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
        if (obj <= obj_min) j = t, obj_min = obj;
      } else {
        if (upper(t)) continue;
        grad_diff = gmax - G(t);
        gmax2 = std::max(gmax2, -G(t));
        if (grad_diff <= 0) continue;
        double quad = K(i, i) + K(t, t) + 2.0 * y(i) * Q(i, t);
        const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
        if (obj <= obj_min) j = t, obj_min = obj;
      }
    }
    if (gmax + gmax2 < eps || j < 0) break;

    const double ai = alpha(i), aj = alpha(j);
    if (y(i) != y(j)) {
      double quad = K(i, i) + K(j, j) + 2 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) alpha(j) = 0, alpha(i) = diff;
      } else {
        if (alpha(i) < 0) alpha(i) = 0, alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > C) alpha(i) = C, alpha(j) = C - diff;
      } else {
        if (alpha(j) > C) alpha(j) = C, alpha(i) = C + diff;
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G(i) - G(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) alpha(i) = C, alpha(j) = sum - C;
      } else {
        if (alpha(j) < 0) alpha(j) = 0, alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) alpha(j) = C, alpha(i) = sum - C;
      } else {
        if (alpha(i) < 0) alpha(i) = 0, alpha(j) = sum;
      }
    }
    const double di = alpha(i) - ai, dj = alpha(j) - aj;
    for (Eigen::Index t = 0; t < n; ++t) G(t) += Q(i, t) * di + Q(j, t) * dj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * G(t);
    if (upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  return {alpha, n_free > 0 ? sum_free / n_free : (ub + lb) / 2, iter};
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees: second-order logistic boosting, exact greedy splits
// over the distinct values of each feature. Zero is the implicit value, so a
// node only visits features that some member has non-zero.

struct BinnedData {
  std::vector<std::vector<double>> bins;     // sorted distinct values per feature, always containing 0
  std::vector<std::size_t> offset;           // global bin index of bins[f][0]
  std::vector<std::size_t> zero_bin;         // global bin index of value 0
  std::vector<std::vector<std::pair<int, std::size_t>>> entries;  // per row: (feature, global bin) for x != 0
  std::size_t total_bins = 0;
};

BinnedData bin_features(const Eigen::MatrixXd& X) {
  BinnedData b;
  const auto d = static_cast<std::size_t>(X.cols());
  b.bins.resize(d);
  b.offset.resize(d);
  b.zero_bin.resize(d);
  b.entries.resize(static_cast<std::size_t>(X.rows()));
  for (std::size_t f = 0; f < d; ++f) {
    auto& v = b.bins[f];
    v.push_back(0.0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) v.push_back(X(i, static_cast<Eigen::Index>(f)));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    b.offset[f] = b.total_bins;
    b.zero_bin[f] = b.total_bins + static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), 0.0) - v.begin());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double x = X(i, static_cast<Eigen::Index>(f));
      if (x == 0.0) continue;
      const auto k = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
      b.entries[static_cast<std::size_t>(i)].emplace_back(static_cast<int>(f), b.total_bins + k);
    }
    b.total_bins += v.size();
  }
  return b;
}

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const BinnedData& data, const GbtConfig& cfg)
      : X_(X), data_(data), cfg_(cfg), sum_g_(data.total_bins, 0.0), sum_h_(data.total_bins, 0.0),
        count_(data.total_bins, 0), stamp_(data.bins.size(), 0) {}

  Tree build(const std::vector<double>& g, const std::vector<double>& h) {
    g_ = &g;
    h_ = &h;
    Tree tree;
    std::vector<std::size_t> all(g.size());
    std::iota(all.begin(), all.end(), 0);
    grow(tree, all, 0);
    return tree;
  }

 private:
  double score(double g, double h) const {
    const double den = h + cfg_.reg_lambda;
    if (den <= 1e-12) return 0.0;
    const double t = soft_threshold(g, cfg_.reg_alpha);
    return t * t / den;
  }

  double leaf_weight(double g, double h) const {
    const double den = h + cfg_.reg_lambda;
    if (den <= 1e-12) return 0.0;
    return -soft_threshold(g, cfg_.reg_alpha) / den;
  }

  int grow(Tree& tree, const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    double G = 0, H = 0;
    for (auto i : rows) G += (*g_)[i], H += (*h_)[i];
    tree[static_cast<std::size_t>(id)].value = cfg_.learning_rate * leaf_weight(G, H);
    if (depth >= cfg_.max_depth || rows.size() < 2) return id;

    ++epoch_;
    std::vector<int> touched;
    for (auto i : rows) {
      for (auto [f, gb] : data_.entries[i]) {
        if (stamp_[static_cast<std::size_t>(f)] != epoch_) {
          stamp_[static_cast<std::size_t>(f)] = epoch_;
          touched.push_back(f);
        }
        sum_g_[gb] += (*g_)[i];
        sum_h_[gb] += (*h_)[i];
        ++count_[gb];
      }
    }
    std::sort(touched.begin(), touched.end());

    const double parent = score(G, H);
    double best_gain = -1e-12;
    int best_f = -1;
    double best_thr = 0;
    for (int f : touched) {
      const auto fs = static_cast<std::size_t>(f);
      const std::size_t lo = data_.offset[fs], hi = lo + data_.bins[fs].size();
      const std::size_t zb = data_.zero_bin[fs];
      double nz_g = 0, nz_h = 0;
      std::size_t nz_c = 0;
      for (std::size_t b = lo; b < hi; ++b) nz_g += sum_g_[b], nz_h += sum_h_[b], nz_c += count_[b];
      sum_g_[zb] = G - nz_g;
      sum_h_[zb] = H - nz_h;
      count_[zb] = rows.size() - nz_c;

      double gl = 0, hl = 0;
      bool have_prev = false;
      double prev = 0;
      for (std::size_t b = lo; b < hi; ++b) {
        if (count_[b] == 0) continue;
        const double v = data_.bins[fs][b - lo];
        if (have_prev) {
          const double gain = 0.5 * (score(gl, hl) + score(G - gl, H - hl) - parent);
          if (gain > best_gain) best_gain = gain, best_f = f, best_thr = 0.5 * (prev + v);
        }
        gl += sum_g_[b];
        hl += sum_h_[b];
        prev = v;
        have_prev = true;
      }
      for (std::size_t b = lo; b < hi; ++b) sum_g_[b] = 0, sum_h_[b] = 0, count_[b] = 0;
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : rows) {
      (X_(static_cast<Eigen::Index>(i), best_f) < best_thr ? left : right).push_back(i);
    }
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    auto& node = tree[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& X_;
  const BinnedData& data_;
  const GbtConfig& cfg_;
  const std::vector<double>* g_ = nullptr;
  const std::vector<double>* h_ = nullptr;
  std::vector<double> sum_g_, sum_h_;
  std::vector<std::size_t> count_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t epoch_ = 0;
};

template <typename Row>
double tree_value(const Tree& tree, const Row& x) {
  std::size_t k = 0;
  while (tree[k].feature >= 0) {
    k = static_cast<std::size_t>(x(tree[k].feature) < tree[k].threshold ? tree[k].left : tree[k].right);
  }
  return tree[k].value;
}

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

}  // namespace

TrainedClassifier train_svm(const Eigen::MatrixXd& X, std::span<const int> y, const SvmConfig& cfg) {
  cfg.validate();
  check_training_set(X, y, false);
  SvmModel m;
  m.config = cfg;
  m.gamma = resolve_gamma(cfg, X);
  const Eigen::MatrixXd K = kernel_matrix(X, X, cfg.kernel, m.gamma, cfg.degree, cfg.coef0);
  Eigen::VectorXd ys(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) ys(i) = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  const auto res = smo(K, ys, cfg.C, cfg.tolerance);
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (res.alpha(i) > 0) sv.push_back(i);
  }
  m.support_vectors = X(sv, Eigen::all);
  m.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) m.coef(static_cast<Eigen::Index>(k)) = res.alpha(sv[k]) * ys(sv[k]);
  m.rho = res.rho;
  m.iterations = res.iterations;
  return {std::move(m), X.cols(), {}};
}

TrainedClassifier train_gbt(const Eigen::MatrixXd& X, std::span<const int> y, const GbtConfig& cfg) {
  cfg.validate();
  check_training_set(X, y, cfg.allow_single_class);
  GbtModel m;
  m.config = cfg;
  const auto n = y.size();
  const auto data = bin_features(X);
  TreeBuilder builder(X, data, cfg);
  std::vector<double> margin(n, m.base_margin), g(n), h(n);
  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      g[i] = p - y[i];
      h[i] = p * (1 - p);
    }
    m.trees.push_back(builder.build(g, h));
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree_value(m.trees.back(), X.row(static_cast<Eigen::Index>(i)));
  }
  return {std::move(m), X.cols(), {}};
}

Eigen::VectorXd decision_function(const TrainedClassifier& clf, const Eigen::MatrixXd& X) {
  if (X.rows() > 0 && X.cols() != clf.n_features) {
    throw Error(ErrorKind::ShapeMismatch, "classifier expects " + std::to_string(clf.n_features) +
                                              " features, got " + std::to_string(X.cols()));
  }
  if (X.rows() == 0) return Eigen::VectorXd(0);
  if (const auto* s = std::get_if<SvmModel>(&clf.model)) {
    if (s->coef.size() == 0) return Eigen::VectorXd::Constant(X.rows(), -s->rho);
    const Eigen::MatrixXd K =
        kernel_matrix(X, s->support_vectors, s->config.kernel, s->gamma, s->config.degree, s->config.coef0);
    return (K * s->coef).array() - s->rho;
  }
  const auto& g = std::get<GbtModel>(clf.model);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), g.base_margin);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (const auto& tree : g.trees) out(i) += tree_value(tree, X.row(i));
  }
  return out;
}

Labels predict(const TrainedClassifier& clf, const Eigen::MatrixXd& X) {
  const Eigen::VectorXd d = decision_function(clf, X);
  Labels out(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i)] = d(i) > 0 ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json to_json(const TrainedClassifier& clf) {
  nlohmann::ordered_json j;
  j["schema"] = kClassifierSchema;
  j["kind"] = clf.kind();
  j["n_features"] = clf.n_features;
  j["vocabulary_fingerprint"] = clf.vocabulary_fingerprint;
  if (const auto* s = std::get_if<SvmModel>(&clf.model)) {
    const auto& c = s->config;
    j["config"] = {{"kernel", to_string(c.kernel)}, {"C", c.C}, {"degree", c.degree}};
    if (c.gamma) j["config"]["gamma"] = *c.gamma; else j["config"]["gamma"] = "scale";
    j["config"]["coef0"] = c.coef0;
    j["config"]["tolerance"] = c.tolerance;
    nlohmann::ordered_json svs = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < s->support_vectors.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index c2 = 0; c2 < s->support_vectors.cols(); ++c2) {
        if (s->support_vectors(r, c2) != 0.0) row.push_back({c2, s->support_vectors(r, c2)});
      }
      svs.push_back(std::move(row));
    }
    j["params"] = {{"gamma", s->gamma},
                   {"rho", s->rho},
                   {"coef", std::vector<double>(s->coef.data(), s->coef.data() + s->coef.size())},
                   {"support_vectors", std::move(svs)}};
  } else {
    const auto& g = std::get<GbtModel>(clf.model);
    const auto& c = g.config;
    j["config"] = {{"n_trees", c.n_trees},
                   {"max_depth", c.max_depth},
                   {"learning_rate", c.learning_rate},
                   {"reg_lambda", c.reg_lambda},
                   {"reg_alpha", c.reg_alpha},
                   {"allow_single_class", c.allow_single_class}};
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& t : g.trees) {
      nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
      for (const auto& n : t) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      trees.push_back(std::move(nodes));
    }
    j["params"] = {{"base_margin", g.base_margin}, {"trees", std::move(trees)}};
  }
  return j;
}

TrainedClassifier classifier_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("schema").get<std::string>() != kClassifierSchema) {
      throw Error(ErrorKind::BadFormat, "unsupported classifier schema");
    }
    TrainedClassifier clf;
    clf.n_features = j.at("n_features").get<Eigen::Index>();
    clf.vocabulary_fingerprint = j.at("vocabulary_fingerprint").get<std::string>();
    const auto& c = j.at("config");
    const auto& p = j.at("params");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "svm") {
      SvmModel s;
      s.config.kernel = parse_kernel(c.at("kernel").get<std::string>());
      s.config.C = c.at("C").get<double>();
      s.config.degree = c.at("degree").get<int>();
      if (!c.at("gamma").is_string()) s.config.gamma = c.at("gamma").get<double>();
      s.config.coef0 = c.at("coef0").get<double>();
      s.config.tolerance = c.at("tolerance").get<double>();
      s.config.validate();
      s.gamma = p.at("gamma").get<double>();
      s.rho = p.at("rho").get<double>();
      const auto coef = p.at("coef").get<std::vector<double>>();
      s.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
      const auto& svs = p.at("support_vectors");
      if (svs.size() != coef.size()) throw Error(ErrorKind::BadFormat, "support vector count mismatch");
      s.support_vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(svs.size()), clf.n_features);
      for (std::size_t r = 0; r < svs.size(); ++r) {
        for (const auto& e : svs[r]) {
          const auto col = e.at(0).get<Eigen::Index>();
          if (col < 0 || col >= clf.n_features) throw Error(ErrorKind::BadFormat, "support vector index out of range");
          s.support_vectors(static_cast<Eigen::Index>(r), col) = e.at(1).get<double>();
        }
      }
      clf.model = std::move(s);
    } else if (kind == "xgboost") {
      GbtModel g;
      g.config.n_trees = c.at("n_trees").get<int>();
      g.config.max_depth = c.at("max_depth").get<int>();
      g.config.learning_rate = c.at("learning_rate").get<double>();
      g.config.reg_lambda = c.at("reg_lambda").get<double>();
      g.config.reg_alpha = c.at("reg_alpha").get<double>();
      g.config.allow_single_class = c.at("allow_single_class").get<bool>();
      g.config.validate();
      g.base_margin = p.at("base_margin").get<double>();
      for (const auto& t : p.at("trees")) {
        Tree tree;
        for (const auto& n : t) {
          tree.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                          n.at(4).get<double>()});
        }
        const auto size = static_cast<int>(tree.size());
        for (const auto& n : tree) {
          if (n.feature >= clf.n_features || (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 ||
                                                                 n.right >= size))) {
            throw Error(ErrorKind::BadFormat, "malformed tree node");
          }
        }
        if (tree.empty()) throw Error(ErrorKind::BadFormat, "empty tree");
        g.trees.push_back(std::move(tree));
      }
      clf.model = std::move(g);
    } else {
      throw Error(ErrorKind::UnknownKind, "unknown classifier kind '" + kind + "'");
    }
    return clf;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("malformed classifier file: ") + e.what());
  }
}

void save_classifier(const std::filesystem::path& path, const TrainedClassifier& clf) {
  std::ofstream out(path);
  out << to_json(clf).dump() << '\n';
  if (!out) throw Error(ErrorKind::MissingInput, "cannot write " + path.string());
}

TrainedClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("malformed classifier file: ") + e.what());
  }
  return classifier_from_json(j);
}

// ---------------------------------------------------------------------------
// Search

Param Param::choice(std::string name, std::vector<double> values) {
  Param p;
  p.name = std::move(name);
  p.kind = Kind::Choice;
  p.choices = std::move(values);
  return p;
}

Param Param::uniform(std::string name, double lo, double hi) {
  Param p;
  p.name = std::move(name);
  p.kind = Kind::Uniform;
  p.lo = lo;
  p.hi = hi;
  return p;
}

Param Param::log_uniform(std::string name, double lo, double hi) {
  Param p = uniform(std::move(name), lo, hi);
  p.kind = Kind::LogUniform;
  return p;
}

Param Param::int_uniform(std::string name, int lo, int hi) {
  Param p = uniform(std::move(name), lo, hi);
  p.kind = Kind::IntUniform;
  return p;
}

void SearchSpace::validate() const {
  for (const auto& p : params) {
    const bool empty = p.kind == Param::Kind::Choice ? p.choices.empty() : !(p.lo <= p.hi);
    if (empty) throw Error(ErrorKind::EmptySpace, "parameter '" + p.name + "' has an empty domain");
    if (p.kind == Param::Kind::LogUniform && !(p.lo > 0)) {
      throw Error(ErrorKind::InvalidConfig, "log-uniform parameter '" + p.name + "' needs a positive range");
    }
  }
}

ParamSet SearchSpace::sample(Rng& rng) const {
  ParamSet out;
  for (const auto& p : params) {
    double v = 0;
    switch (p.kind) {
      case Param::Kind::Choice: v = p.choices[rng.below(p.choices.size())]; break;
      case Param::Kind::Uniform: v = rng.uniform(p.lo, p.hi); break;
      case Param::Kind::LogUniform: v = std::exp(rng.uniform(std::log(p.lo), std::log(p.hi))); break;
      case Param::Kind::IntUniform:
        v = p.lo + static_cast<double>(rng.below(static_cast<std::uint64_t>(p.hi - p.lo) + 1));
        break;
    }
    out[p.name] = v;
  }
  return out;
}

SearchSpace default_svm_space() {
  return {{Param::choice("kernel", {0, 1, 2}), Param::log_uniform("C", 1e-3, 1e3), Param::choice("degree", {2, 3, 4}),
           Param::log_uniform("gamma", 1e-4, 10)}};
}

SearchSpace default_gbt_space() {
  return {{Param::int_uniform("n_trees", 50, 500), Param::int_uniform("max_depth", 2, 10),
           Param::log_uniform("learning_rate", 1e-3, 0.5), Param::uniform("reg_lambda", 0, 10),
           Param::uniform("reg_alpha", 0, 10)}};
}

SvmConfig svm_config_from(const ParamSet& p, SvmConfig base) {
  if (auto it = p.find("kernel"); it != p.end()) {
    const int k = static_cast<int>(it->second);
    if (k < 0 || k > 2) throw Error(ErrorKind::InvalidConfig, "kernel index out of range");
    base.kernel = static_cast<Kernel>(k);
  }
  if (auto it = p.find("C"); it != p.end()) base.C = it->second;
  if (auto it = p.find("degree"); it != p.end()) base.degree = static_cast<int>(it->second);
  if (auto it = p.find("gamma"); it != p.end()) base.gamma = it->second;
  base.validate();
  return base;
}

GbtConfig gbt_config_from(const ParamSet& p, GbtConfig base) {
  if (auto it = p.find("n_trees"); it != p.end()) base.n_trees = static_cast<int>(it->second);
  if (auto it = p.find("max_depth"); it != p.end()) base.max_depth = static_cast<int>(it->second);
  if (auto it = p.find("learning_rate"); it != p.end()) base.learning_rate = it->second;
  if (auto it = p.find("reg_lambda"); it != p.end()) base.reg_lambda = it->second;
  if (auto it = p.find("reg_alpha"); it != p.end()) base.reg_alpha = it->second;
  base.validate();
  return base;
}

void TrialBudget::validate() const {
  if (n_trials < 1) throw Error(ErrorKind::InvalidConfig, "n_trials must be at least 1");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    throw Error(ErrorKind::InvalidConfig, "validation_fraction must lie in (0, 1)");
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::span<const int> y,
                                                                           double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> train, val;
  std::vector<int> labels(y.begin(), y.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  for (int label : labels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == label) idx.push_back(i);
    }
    rng.shuffle(std::span(idx));
    auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) k = std::clamp<std::size_t>(k, 1, idx.size() - 1); else k = 0;
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

namespace {

std::string param_key(const ParamSet& p) {
  std::string key;
  char buf[64];
  for (const auto& [k, v] : p) {
    std::snprintf(buf, sizeof buf, "=%.17g;", v);
    key += k + buf;
  }
  return key;
}

}  // namespace

TuneResult tune(const TrainFn& train_fn, const SearchSpace& space, const TrialBudget& budget,
                const Eigen::MatrixXd& X, std::span<const int> y) {
  budget.validate();
  space.validate();
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error(ErrorKind::ShapeMismatch, "X and y differ in length");
  const auto [tr, va] = holdout_split(y, budget.validation_fraction, budget.seed);
  const std::vector<Eigen::Index> tri(tr.begin(), tr.end()), vai(va.begin(), va.end());
  const Eigen::MatrixXd Xtr = X(tri, Eigen::all), Xva = X(vai, Eigen::all);
  std::vector<int> ytr, yva;
  for (auto i : tr) ytr.push_back(y[i]);
  for (auto i : va) yva.push_back(y[i]);
  const int classes[] = {0, 1};

  TuneResult result;
  std::map<std::string, double> memo;
  Rng rng(budget.seed ^ 0x7475'6e65ULL);
  for (int t = 0; t < budget.n_trials; ++t) {
    Trial trial{space.sample(rng), 0.0, false};
    const auto key = param_key(trial.params);
    if (auto it = memo.find(key); it != memo.end()) {
      trial.validation_f1 = it->second;
      trial.cached = true;
    } else {
      const auto clf = train_fn(Xtr, ytr, trial.params);
      const auto pred = predict(clf, Xva);
      trial.validation_f1 = metrics::weighted_report(yva, pred, classes).weighted.f1;
      memo.emplace(key, trial.validation_f1);
      ++result.evaluations;
    }
    if (t == 0 || trial.validation_f1 > result.best_f1) {
      result.best = trial.params;
      result.best_f1 = trial.validation_f1;
      result.best_trial = t;
    }
    result.trials.push_back(std::move(trial));
  }
  return result;
}

TrainFn svm_trainer(SvmConfig base) {
  return [base](const Eigen::MatrixXd& X, std::span<const int> y, const ParamSet& p) {
    return train_svm(X, y, svm_config_from(p, base));
  };
}

TrainFn gbt_trainer(GbtConfig base) {
  return [base](const Eigen::MatrixXd& X, std::span<const int> y, const ParamSet& p) {
    return train_gbt(X, y, gbt_config_from(p, base));
  };
}

}  // namespace esg::classical
