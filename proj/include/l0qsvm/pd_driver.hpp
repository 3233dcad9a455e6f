#pragma once

// Penalty decomposition for the cardinality-constrained quadratic-surface SVM
//
//   min_{z,c} 1/2 z'Gz + C sum H(1 - y_i(z'r_i + c))  s.t.  ||z||_0 <= k
//
// with H the hinge or squared loss. The outer loop escalates rho
// geometrically; the inner loop alternates an exact (z, c)-step with the
// hard-thresholding u-step on q_rho(z, c, u) = objective + rho/2 ||z - u||^2.

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "l0qsvm/error.hpp"
#include "l0qsvm/quadfeat.hpp"
#include "l0qsvm/solvers.hpp"

namespace l0qsvm {

enum class Loss { kHinge, kQuadratic };

std::string_view to_string(Loss loss);
/// Accepts "hinge" and "ls"/"quadratic".
Loss parse_loss(std::string_view text);

struct PDConfig {
  double rho0 = 1.0;
  double beta = 10.0;
  double eps_inner = 1e-4;
  double eps_outer = 1e-4;
  double C = 1.0;
  int k = 1;
  Loss loss = Loss::kHinge;
  int max_outer = 30;
  int max_inner = 50;
  double dual_tol = 1e-6;
  /// Tolerance used when verifying stationarity of the final model.
  double stationarity_tol = 1e-4;
  /// Return the last iterate with a warning instead of throwing when the
  /// outer loop hits max_outer.
  bool accept_unconverged = false;

  /// Throws invalid-argument on any violated range.
  void validate() const;
};

struct OuterRecord {
  int outer = 0;
  double rho = 0.0;
  int inner_iterations = 0;
  /// q_rho after each half step: z-step, u-step, z-step, u-step, ...
  std::vector<double> q_values;
  /// ||z_l - u_l||_inf after each inner iteration.
  std::vector<double> inner_gaps;
  double z_minus_u_inf = 0.0;
  /// The safeguard reset u to the feasible point before this inner loop.
  bool safeguard = false;
};

struct PDTrace {
  double upsilon = 0.0;
  std::vector<OuterRecord> outer;

  /// One line per inner iteration, "outer,inner,rho,q,z_minus_u_inf,safeguard",
  /// preceded by a header line.
  void write_lines(std::ostream& out) const;
};

/// Objective value 1/2 z'Gz + C sum H(1 - y_i(z'r_i + c)).
double loss_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c, double C,
                      Loss loss);

/// q_rho(z, c, u).
double penalty_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                         const Eigen::VectorXd& u, double rho, double C, Loss loss);

struct ZStep {
  Eigen::VectorXd z;
  double c = 0.0;
  Eigen::VectorXd xi;
  /// Dual multipliers (hinge only, empty otherwise).
  Eigen::VectorXd alpha;
  /// q_rho(z, c, u) at the returned point.
  double q = 0.0;
};

/// Exact minimizer of q_rho(., ., u).
ZStep solve_z_step(const FeatureCache& cache, const Eigen::VectorXd& u, double rho, double C,
                   Loss loss, double dual_tol);

struct FeasiblePoint {
  Eigen::VectorXd z;
  double c = 0.0;
  double objective = 0.0;
};

/// (z, c) = (0, 0), k-sparse for every k; objective C * m for both losses.
FeasiblePoint feasible_point(const FeatureCache& cache, Loss loss, double C);

struct InnerResult {
  Eigen::VectorXd z;
  double c = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd alpha;
  int iterations = 0;
  std::vector<double> q_values;
  std::vector<double> gaps;
};

/// Block coordinate descent on q_rho for fixed rho, starting from u0.
/// `first_step`, when given, must be solve_z_step(cache, u0, rho, ...) and is
/// used as the first (z, c)-iterate. `z_prev`/`c_prev` seed the change test.
InnerResult inner_bcd(const FeatureCache& cache, const Eigen::VectorXd& u0, double rho,
                      const PDConfig& config, const ZStep* first_step = nullptr,
                      const Eigen::VectorXd* z_prev = nullptr, double c_prev = 0.0);

/// A k-sparse point of the constrained problem with its multipliers.
struct SparseSolution {
  Eigen::VectorXd z;
  double c = 0.0;
  Eigen::VectorXd xi;
  /// lambda for the hinge loss; empty for the quadratic loss, where mu
  /// follows from xi.
  Eigen::VectorXd multipliers;
  /// Index set L, |L| = k, with z_j = 0 off L.
  std::vector<int> support;
  double C = 1.0;
  Loss loss = Loss::kHinge;
};

struct StationarityReport {
  std::vector<int> support;
  /// lambda (hinge) or mu (quadratic), one per sample.
  Eigen::VectorXd multipliers;
  /// lambda-bar = C - lambda (hinge only).
  Eigen::VectorXd multipliers_bar;
  /// Lagrangian gradient; zero on the support at a stationary point.
  Eigen::VectorXd omega;

  double stationarity = 0.0;      // max_{j in L} |omega_j|
  double sparsity = 0.0;          // max_{j not in L} |z_j|
  double equality = 0.0;          // |sum multiplier_i y_i|
  double multiplier_sign = 0.0;   // hinge: lambda, lambda-bar >= 0; ls: |2 C xi + mu|
  double complementarity = 0.0;   // hinge only
  double feasibility = 0.0;       // constraint violation
  double tol = 0.0;
  bool is_lu_zhang = false;

  double max_residual() const;
};

/// Verifies the cardinality-constrained stationarity system. Never throws on
/// violation; reports residuals instead.
StationarityReport check_lu_zhang(const SparseSolution& solution, const FeatureCache& cache,
                                  double tol);

struct PDResult {
  /// Final k-sparse model parameters after the support refit.
  SparseSolution solution;
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  /// Last penalty iterates before extraction.
  Eigen::VectorXd z_penalty;
  Eigen::VectorXd u_penalty;
  double c_penalty = 0.0;
  double objective = 0.0;
  PDTrace trace;
  StationarityReport report;
  bool converged = false;
  int k_used = 0;
};

class PDConvergenceError : public ConvergenceError {
 public:
  PDConvergenceError(const std::string& what, PDResult best)
      : ConvergenceError(what, best.trace.outer.empty() ? 0.0 : best.trace.outer.back().z_minus_u_inf),
        best_(std::move(best)) {}

  const PDResult& best() const noexcept { return best_; }

 private:
  PDResult best_;
};

/// Solves the restricted problem over `support` (other coordinates held at
/// zero) and returns the resulting k-sparse point with its multipliers.
SparseSolution refit_on_support(const FeatureCache& cache, const std::vector<int>& support,
                                double C, Loss loss, double dual_tol);

/// Full outer/inner loop. Throws PDConvergenceError (carrying the last
/// iterate) when max_outer is exhausted.
PDResult penalty_decompose(const FeatureCache& cache, PDConfig config);

}  // namespace l0qsvm
