#pragma once

// Block solvers used inside the penalty decomposition loop:
//   * the l0 projection (u-step),
//   * the hinge-loss (z, c, xi)-step through its dual QP,
//   * the quadratic-loss (z, c)-step through a closed-form linear system.

#include <Eigen/Dense>

#include <vector>

#include "l0qsvm/error.hpp"
#include "l0qsvm/quadfeat.hpp"

namespace l0qsvm {

/// Indices of the k largest |z_j|, ascending. Ties keep the lower index.
std::vector<int> top_k_support(const Eigen::VectorXd& z, int k);

/// Euclidean projection onto {u : ||u||_0 <= k}.
Eigen::VectorXd hard_threshold(const Eigen::VectorXd& z, int k);

struct DualState {
  Eigen::VectorXd alpha;
  /// Dual objective -sum(alpha) + 1/2 v'(G + rho I)^{-1} v, v = sum alpha_i y_i r_i + rho u.
  double objective = 0.0;
  /// Maximal violating-pair gap at exit.
  double kkt_residual = 0.0;
  int iterations = 0;
};

class DualConvergenceError : public ConvergenceError {
 public:
  DualConvergenceError(const std::string& what, DualState best)
      : ConvergenceError(what, best.kkt_residual), best_(std::move(best)) {}

  const DualState& best() const noexcept { return best_; }

 private:
  DualState best_;
};

inline constexpr int kDualMaxIterations = 100000;

/// SMO with second-order maximal-violating-pair selection on
///   min 1/2 a'Qa + q'a  s.t.  y'a = 0, 0 <= a <= C,
/// Q_ij = y_i y_j r_i'K^{-1}r_j, q_i = -1 + y_i r_i'K^{-1}(rho u), K = G + rho I.
DualState solve_dual_qp(const FeatureCache& cache, const Eigen::VectorXd& u, double rho, double C,
                        double tol, int max_iterations = kDualMaxIterations);

enum class CRecovery {
  /// Average of y_i - z'r_i over free support vectors, with a KKT-interval
  /// midpoint fallback.
  kKktAverage,
  /// max over {y_i = 1, alpha_i > 0} of -z'r_i. Kept for comparison only.
  kPositiveMax,
};

struct HingeSolution {
  Eigen::VectorXd z;
  double c = 0.0;
  Eigen::VectorXd xi;
  DualState alpha;
};

HingeSolution recover_primal_hinge(const DualState& alpha, const FeatureCache& cache,
                                   const Eigen::VectorXd& u, double rho, double C,
                                   CRecovery rule = CRecovery::kKktAverage);

/// Primal of the hinge z-step: 1/2 z'(G + rho I)z - rho u'z + C sum xi,
/// with xi_i = max(0, 1 - y_i(z'r_i + c)).
double hinge_step_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                            const Eigen::VectorXd& u, double rho, double C);

/// Max absolute violation over the optimality system of the hinge z-step:
/// stationarity in z, both complementarity families, primal feasibility,
/// the equality constraint and the multiplier box.
struct HingeKkt {
  double stationarity = 0.0;
  double complementarity_margin = 0.0;
  double complementarity_slack = 0.0;
  double primal_feasibility = 0.0;
  double equality = 0.0;
  double box = 0.0;
  double max() const;
};

HingeKkt hinge_kkt_residual(const HingeSolution& sol, const FeatureCache& cache,
                            const Eigen::VectorXd& u, double rho, double C);

struct LSSolution {
  Eigen::VectorXd z;
  double c = 0.0;
  /// xi_i = 1 - y_i(z'r_i + c).
  Eigen::VectorXd xi;
};

LSSolution solve_ls_subproblem(const FeatureCache& cache, const Eigen::VectorXd& u, double rho,
                               double C);

/// T(z, c) = 1/2 z'(G + rho I)z + C ||1 - D(Az + c1)||^2 - rho u'z + 1/2 rho ||u||^2.
double ls_step_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                         const Eigen::VectorXd& u, double rho, double C);

/// Gradient of T with respect to [z; c].
Eigen::VectorXd ls_step_gradient(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                                 const Eigen::VectorXd& u, double rho, double C);

/// The (d+1) x (d+1) normal system of the quadratic-loss z-step and its
/// right-hand side. `use_label_identity` assembles with D^2 = I; otherwise
/// D = diag(y) is multiplied out explicitly.
struct LinearSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

LinearSystem assemble_ls_system(const FeatureCache& cache, const Eigen::VectorXd& u, double rho,
                                double C, bool use_label_identity = true);

}  // namespace l0qsvm
