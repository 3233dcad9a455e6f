#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "l0qsvm/pd_driver.hpp"

namespace l0qsvm {

/// Per-feature z-score transform fitted on training rows.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Population standard deviation; zero-variance columns get scale 1 and a
  /// warning.
  static Standardizer fit(const Eigen::MatrixXd& x);
  static Standardizer identity(int n);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply_one(const Eigen::VectorXd& x) const;
};

/// f(x) = 1/2 s(x)'W s(x) + b's(x) + c on standardized inputs s(x).
struct QuadraticSurfaceModel {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  double c = 0.0;
  int k = 0;
  Loss loss = Loss::kHinge;
  Standardizer standardizer;

  int features() const noexcept { return static_cast<int>(b.size()); }
  /// ||[hvec(W); b]||_0.
  int nonzeros() const;
  /// Raw-feature indices touched by a nonzero W or b entry, ascending.
  std::vector<int> active_features() const;

  double decision_value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd decision_values(const Eigen::MatrixXd& x) const;
  /// Sign of the decision value, with 0 mapped to +1.
  int predict(const Eigen::VectorXd& x) const;
};

enum class VoteRule {
  /// Class with the largest decision value.
  kArgmax,
  /// Model c votes for c when f_c >= 0, otherwise once for every other class;
  /// ties go to the larger decision value.
  kSignPlurality,
};

struct OvRModel {
  std::vector<std::string> classes;
  std::vector<QuadraticSurfaceModel> models;
  VoteRule vote = VoteRule::kArgmax;
  /// Raw column names, for labelling exports; may be empty.
  std::vector<std::string> feature_names;

  std::size_t predict_index(const Eigen::VectorXd& x) const;
  const std::string& predict(const Eigen::VectorXd& x) const;
  std::vector<std::string> predict_all(const Eigen::MatrixXd& x) const;
};

/// Standardizes x, runs penalty decomposition and wraps the result. `result`
/// receives the full trace and stationarity report when non-null.
QuadraticSurfaceModel train_binary(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const PDConfig& config, PDResult* result = nullptr);

/// Same as train_binary on already-standardized features with a given
/// standardizer; lets one-vs-rest share a single transform.
QuadraticSurfaceModel train_binary_standardized(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y,
                                                const Standardizer& standardizer,
                                                const PDConfig& config, PDResult* result = nullptr);

/// One binary model per class (class vs rest). Classes are sorted. With two
/// classes a single model is fitted (first class positive) and the second is
/// its negation, so argmax agrees with the binary sign rule.
OvRModel train_ovr(const Eigen::MatrixXd& x, const std::vector<std::string>& labels,
                   const PDConfig& config, std::vector<PDResult>* results = nullptr);

double accuracy(const std::vector<std::string>& predicted, const std::vector<std::string>& truth);

// Versioned JSON documents. Binary model fields:
//   {version, n, k, loss, mean[], scale[], W[] (row-major lower triangle), b[], c}
// One-vs-rest wraps binary documents:
//   {version, type: "ovr", vote, classes[], models[], feature_names[]?}
inline constexpr int kModelSchemaVersion = 1;

std::string serialize(const QuadraticSurfaceModel& model);
QuadraticSurfaceModel deserialize_model(const std::string& document);
std::string serialize(const OvRModel& model);
OvRModel deserialize_ovr(const std::string& document);

}  // namespace l0qsvm
