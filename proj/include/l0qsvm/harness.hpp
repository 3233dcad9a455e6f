#pragma once

// Experiment harness: CSV ingestion, standardization, stratified k-fold
// cross-validation with random hyperparameter search, k sweeps and the
// bundled synthetic dataset.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "l0qsvm/classifier.hpp"
#include "l0qsvm/pd_driver.hpp"

namespace l0qsvm {

struct RawDataset {
  Eigen::MatrixXd features;
  std::vector<std::string> labels;
  std::vector<std::string> feature_names;
  std::string label_column;

  int samples() const noexcept { return static_cast<int>(features.rows()); }
  int features_count() const noexcept { return static_cast<int>(features.cols()); }
  RawDataset subset(const std::vector<int>& rows) const;
};

/// Reads a headered CSV. Every column except `label_column` must be numeric.
RawDataset load_csv(const std::string& path, const std::string& label_column);
RawDataset parse_csv(std::istream& in, const std::string& label_column);
void write_csv(const RawDataset& data, std::ostream& out);

struct StandardizedFeatures {
  Eigen::MatrixXd features;
  Standardizer params;
};

StandardizedFeatures standardize(const Eigen::MatrixXd& train);

/// Labels mapped to +1 for `positive`, -1 otherwise.
Eigen::VectorXd binary_labels(const std::vector<std::string>& labels, const std::string& positive);

/// Points uniform in [-box, box]^2 labelled "1" outside the unit circle and
/// "-1" inside, rejecting samples with | ||x|| - 1 | < margin. Points come
/// in pairs (x, -x), so the sample mean is zero for even m.
RawDataset make_ellipse(int m, double margin, std::uint64_t seed, double box = 1.3);

struct ExperimentConfig {
  std::string dataset_path;
  std::string label_column = "label";
  int folds = 5;
  int trials = 100;
  double c_min = 1e-2;
  double c_max = 1e2;
  int k_min = 1;
  /// 0 selects min(2n, d).
  int k_max = 0;
  std::uint64_t seed = 0;
  std::string output_dir;
  /// Folds run concurrently on up to this many threads.
  int threads = 1;
  /// Solver settings; C and k are overwritten per trial.
  PDConfig solver;

  void validate(int n_features) const;
  int effective_k_max(int n_features) const;
};

struct Trial {
  int index = 0;
  double C = 0.0;
  int k = 0;
  double val_accuracy = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  double C = 0.0;
  int k = 0;
  double val_accuracy = 0.0;
  std::vector<Trial> trials;
};

/// Deterministic (C, k) draws: C log-uniform on [c_min, c_max], k uniform on
/// [k_min, k_max].
std::vector<std::pair<double, int>> draw_hyperparameters(const ExperimentConfig& config,
                                                         int n_features, std::uint64_t stream);

/// Evaluates `trials` draws on the validation split; best by accuracy, then
/// smaller k, then smaller C. Failed trials are logged and skipped.
SearchResult random_search(const RawDataset& train, const RawDataset& val,
                           const ExperimentConfig& config, std::uint64_t stream);

/// Picks the winner among evaluated trials using the same ordering.
const Trial& best_trial(const std::vector<Trial>& trials);

/// Class-stratified fold assignment; every class needs >= folds members.
std::vector<std::vector<int>> stratified_folds(const std::vector<std::string>& labels, int folds,
                                               std::uint64_t seed);

struct FoldResult {
  int fold = 0;
  double test_accuracy = 0.0;
  double C = 0.0;
  int k = 0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
  std::vector<int> train_rows;
  std::vector<int> val_rows;
  std::vector<int> test_rows;
  std::vector<Trial> trials;
  /// Standardization fitted for the final retrain (train + validation rows).
  Standardizer final_standardizer;
  /// The retrain hit the outer-iteration cap and its last iterate was used.
  bool retrain_unconverged = false;
};

struct CVReport {
  std::vector<FoldResult> folds;
  double mean = 0.0;
  /// Population standard deviation of the per-fold accuracies.
  double std_dev = 0.0;

  /// Canonical, timing-free report; byte-identical for a fixed seed.
  std::string to_text() const;
  std::string trials_text() const;
  std::string timing_text() const;
  std::string summary_json(const ExperimentConfig& config) const;
};

double mean_of(const std::vector<double>& values);
double population_std(const std::vector<double>& values);

CVReport cross_validate(const RawDataset& data, const ExperimentConfig& config);

struct SweepRow {
  int k = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int failed_folds = 0;
};

/// Cross-validated test accuracy at a fixed C for each k in `ks`, reusing the
/// stratified folds of `config`.
std::vector<SweepRow> sweep_k(const RawDataset& data, const ExperimentConfig& config, double C,
                              const std::vector<int>& ks);

/// Process exit status for a failure of this kind: 2 configuration,
/// 3 data, 4 convergence.
int exit_code_for(ErrorKind kind) noexcept;

// Plot-data export. Every writer emits a header line.

/// f over a regular grid spanning mean +/- 3 scale of `dims` (2 or 3) raw
/// features: the active features, padded with the lowest inactive indices.
/// Throws dimension-error when more than `dims` features are active.
void write_boundary_grid(const QuadraticSurfaceModel& model, std::ostream& out, int resolution = 100,
                         int dims = 2, const std::vector<std::string>& feature_names = {});

/// |W_ij| (lower triangle) and |b_i|, one row each.
void write_magnitudes(const QuadraticSurfaceModel& model, std::ostream& out,
                      const std::vector<std::string>& feature_names = {});

void write_sweep(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace l0qsvm
