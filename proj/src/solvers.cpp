#include "l0qsvm/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace l0qsvm {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_rho_c(double rho, double C) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    raise(ErrorKind::kNumeric, "rho must be positive and finite, got " + std::to_string(rho));
  }
  if (!(C > 0.0) || !std::isfinite(C)) {
    raise(ErrorKind::kInvalidArgument, "C must be positive and finite, got " + std::to_string(C));
  }
}

void require_dim(const FeatureCache& cache, const Eigen::VectorXd& u) {
  if (u.size() != cache.dim()) {
    raise(ErrorKind::kInvalidArgument, "u has length " + std::to_string(u.size()) + ", expected " +
                                           std::to_string(cache.dim()));
  }
}

}  // namespace

std::vector<int> top_k_support(const Eigen::VectorXd& z, int k) {
  const auto d = static_cast<int>(z.size());
  if (k < 1 || k > d) {
    raise(ErrorKind::kInvalidArgument,
          "sparsity level k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
  }
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&z](int a, int b) { return std::abs(z(a)) > std::abs(z(b)); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

Eigen::VectorXd hard_threshold(const Eigen::VectorXd& z, int k) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(z.size());
  for (int j : top_k_support(z, k)) u(j) = z(j);
  return u;
}

DualState solve_dual_qp(const FeatureCache& cache, const Eigen::VectorXd& u, double rho, double C,
                        double tol, int max_iterations) {
  require_rho_c(rho, C);
  require_dim(cache, u);
  if (!(tol > 0.0)) raise(ErrorKind::kInvalidArgument, "dual tolerance must be positive");

  const auto factor = cache.factor(rho);
  const Eigen::MatrixXd& q_mat = factor->dual_hessian();
  const Eigen::VectorXd& y = cache.labels();
  const int m = cache.samples();

  const Eigen::VectorXd shift = factor->solve(rho * u);  // K^{-1} rho u
  const Eigen::VectorXd lin = (y.array() * (cache.r() * shift).array() - 1.0).matrix();
  const double constant = 0.5 * rho * u.dot(shift);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd grad = lin;
  const Eigen::VectorXd qd = q_mat.diagonal();

  auto finish = [&](int iterations, double violation) {
    DualState state;
    state.alpha = alpha;
    state.objective = 0.5 * alpha.dot(grad + lin) + constant;
    state.kkt_residual = std::max(0.0, violation);
    state.iterations = iterations;
    return state;
  };

  double violation = 0.0;
  for (int iter = 0; iter < max_iterations; ++iter) {
    // i maximizes -y_t grad_t over I_up.
    double gmax = -kInf;
    int i = -1;
    for (int t = 0; t < m; ++t) {
      if (y(t) > 0) {
        if (alpha(t) < C && -grad(t) >= gmax) { gmax = -grad(t); i = t; }
      } else {
        if (alpha(t) > 0 && grad(t) >= gmax) { gmax = grad(t); i = t; }
      }
    }

    // j from I_low by second-order gain.
    double gmax2 = -kInf;
    double obj_min = kInf;
    int j = -1;
    for (int t = 0; t < m; ++t) {
      if (y(t) > 0) {
        if (alpha(t) > 0) {
          gmax2 = std::max(gmax2, grad(t));
          const double grad_diff = gmax + grad(t);
          if (i >= 0 && grad_diff > 0) {
            double quad = qd(i) + qd(t) - 2.0 * y(i) * q_mat(i, t);
            if (quad <= 0) quad = kTau;
            const double obj_diff = -grad_diff * grad_diff / quad;
            if (obj_diff <= obj_min) { obj_min = obj_diff; j = t; }
          }
        }
      } else {
        if (alpha(t) < C) {
          gmax2 = std::max(gmax2, -grad(t));
          const double grad_diff = gmax - grad(t);
          if (i >= 0 && grad_diff > 0) {
            double quad = qd(i) + qd(t) + 2.0 * y(i) * q_mat(i, t);
            if (quad <= 0) quad = kTau;
            const double obj_diff = -grad_diff * grad_diff / quad;
            if (obj_diff <= obj_min) { obj_min = obj_diff; j = t; }
          }
        }
      }
    }

    violation = (i < 0 || gmax2 == -kInf) ? 0.0 : gmax + gmax2;
    if (i < 0 || j < 0 || violation < tol) return finish(iter, violation);

    const double old_i = alpha(i);
    const double old_j = alpha(j);
    double& ai = alpha(i);
    double& aj = alpha(j);
    if (y(i) != y(j)) {
      double quad = qd(i) + qd(j) + 2.0 * q_mat(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > C) { ai = C; aj = C - diff; }
      } else {
        if (aj > C) { aj = C; ai = C + diff; }
      }
    } else {
      double quad = qd(i) + qd(j) - 2.0 * q_mat(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) { ai = C; aj = sum - C; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > C) {
        if (aj > C) { aj = C; ai = sum - C; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }
    const double di = ai - old_i;
    const double dj = aj - old_j;
    grad.noalias() += q_mat.col(i) * di + q_mat.col(j) * dj;
  }

  throw DualConvergenceError("dual QP hit the iteration cap of " + std::to_string(max_iterations) +
                                 " with violation " + std::to_string(violation),
                             finish(max_iterations, violation));
}

HingeSolution recover_primal_hinge(const DualState& alpha, const FeatureCache& cache,
                                   const Eigen::VectorXd& u, double rho, double C,
                                   CRecovery rule) {
  require_rho_c(rho, C);
  require_dim(cache, u);
  const int m = cache.samples();
  if (alpha.alpha.size() != m) raise(ErrorKind::kInvalidArgument, "alpha length does not match samples");

  const Eigen::VectorXd& y = cache.labels();
  const auto factor = cache.factor(rho);
  const Eigen::VectorXd weighted = alpha.alpha.cwiseProduct(y);
  HingeSolution sol;
  sol.z = factor->solve(cache.r().transpose() * weighted + rho * u);
  sol.alpha = alpha;
  const Eigen::VectorXd score = cache.r() * sol.z;

  const double margin = 1e-8 * C;
  auto kkt_intercept = [&] {
    double sum = 0.0;
    int free_count = 0;
    double lower = -kInf;
    double upper = kInf;
    for (int i = 0; i < m; ++i) {
      const double a = alpha.alpha(i);
      const double target = y(i) - score(i);  // c placing sample i on its margin
      if (a > margin && a < C - margin) {
        sum += target;
        ++free_count;
      } else if (a <= margin) {
        // y_i f_i >= 1
        if (y(i) > 0) lower = std::max(lower, target); else upper = std::min(upper, target);
      } else {
        // y_i f_i <= 1
        if (y(i) > 0) upper = std::min(upper, target); else lower = std::max(lower, target);
      }
    }
    if (free_count > 0) return sum / free_count;
    if (std::isfinite(lower) && std::isfinite(upper)) return 0.5 * (lower + upper);
    if (std::isfinite(lower)) return lower;
    if (std::isfinite(upper)) return upper;
    return 0.0;
  };

  if (rule == CRecovery::kPositiveMax) {
    double best = -kInf;
    for (int i = 0; i < m; ++i) {
      if (y(i) > 0 && alpha.alpha(i) > 0) best = std::max(best, -score(i));
    }
    sol.c = std::isfinite(best) ? best : kkt_intercept();
  } else {
    sol.c = kkt_intercept();
  }

  sol.xi = (1.0 - y.array() * (score.array() + sol.c)).cwiseMax(0.0).matrix();
  return sol;
}

double hinge_step_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                            const Eigen::VectorXd& u, double rho, double C) {
  const Eigen::VectorXd& y = cache.labels();
  const double loss = (1.0 - y.array() * ((cache.r() * z).array() + c)).cwiseMax(0.0).sum();
  return 0.5 * z.dot(cache.gram() * z) + 0.5 * rho * z.squaredNorm() - rho * u.dot(z) + C * loss;
}

double HingeKkt::max() const {
  return std::max({stationarity, complementarity_margin, complementarity_slack, primal_feasibility,
                   equality, box});
}

HingeKkt hinge_kkt_residual(const HingeSolution& sol, const FeatureCache& cache,
                            const Eigen::VectorXd& u, double rho, double C) {
  const Eigen::VectorXd& y = cache.labels();
  const Eigen::VectorXd& a = sol.alpha.alpha;
  const Eigen::VectorXd margin = (y.array() * ((cache.r() * sol.z).array() + sol.c)).matrix();

  HingeKkt kkt;
  const Eigen::VectorXd k_z = cache.gram() * sol.z + rho * sol.z;
  kkt.stationarity =
      (k_z - cache.r().transpose() * a.cwiseProduct(y) - rho * u).lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    kkt.complementarity_margin =
        std::max(kkt.complementarity_margin, std::abs(a(i) * (1.0 - sol.xi(i) - margin(i))));
    kkt.complementarity_slack = std::max(kkt.complementarity_slack, std::abs((C - a(i)) * sol.xi(i)));
    kkt.primal_feasibility =
        std::max({kkt.primal_feasibility, 1.0 - sol.xi(i) - margin(i), -sol.xi(i)});
    kkt.box = std::max({kkt.box, -a(i), a(i) - C});
  }
  kkt.equality = std::abs(a.dot(y));
  return kkt;
}

LinearSystem assemble_ls_system(const FeatureCache& cache, const Eigen::VectorXd& u, double rho,
                                double C, bool use_label_identity) {
  require_rho_c(rho, C);
  require_dim(cache, u);
  const int d = cache.dim();
  const int m = cache.samples();
  const Eigen::MatrixXd& a = cache.r();
  const Eigen::VectorXd& y = cache.labels();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);

  LinearSystem sys;
  sys.matrix.resize(d + 1, d + 1);
  sys.rhs.resize(d + 1);
  Eigen::MatrixXd top_left = cache.gram();
  top_left.diagonal().array() += rho;
  if (use_label_identity) {
    top_left.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose(), 2.0 * C);
    top_left = top_left.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd col_sum = a.transpose() * ones;
    sys.matrix.topLeftCorner(d, d) = top_left;
    sys.matrix.topRightCorner(d, 1) = 2.0 * C * col_sum;
    sys.matrix.bottomLeftCorner(1, d) = 2.0 * C * col_sum.transpose();
    sys.matrix(d, d) = 2.0 * C * m;
    sys.rhs.head(d) = 2.0 * C * (a.transpose() * y) + rho * u;
    sys.rhs(d) = 2.0 * C * y.sum();
  } else {
    const Eigen::MatrixXd dmat = y.asDiagonal();
    const Eigen::MatrixXd d2 = dmat * dmat;
    Eigen::MatrixXd gram_part = a.transpose() * d2 * a;
    gram_part = 0.5 * (gram_part + gram_part.transpose()).eval();
    sys.matrix.topLeftCorner(d, d) = top_left + 2.0 * C * gram_part;
    sys.matrix.topRightCorner(d, 1) = 2.0 * C * a.transpose() * d2 * ones;
    sys.matrix.bottomLeftCorner(1, d) = 2.0 * C * ones.transpose() * d2 * a;
    sys.matrix(d, d) = 2.0 * C * ones.dot(d2 * ones);
    sys.rhs.head(d) = 2.0 * C * a.transpose() * dmat * ones + rho * u;
    sys.rhs(d) = 2.0 * C * ones.dot(dmat * ones);
  }
  return sys;
}

LSSolution solve_ls_subproblem(const FeatureCache& cache, const Eigen::VectorXd& u, double rho,
                               double C) {
  const LinearSystem sys = assemble_ls_system(cache, u, rho, C, true);
  Eigen::LLT<Eigen::MatrixXd> llt(sys.matrix);
  if (llt.info() != Eigen::Success) {
    raise(ErrorKind::kNumeric, "least-squares system is not positive definite (rho=" +
                                   std::to_string(rho) + ", C=" + std::to_string(C) + ")");
  }
  Eigen::VectorXd sol = llt.solve(sys.rhs);
  // One step of iterative refinement keeps the residual at rounding level
  // when C is large relative to rho.
  sol += llt.solve(sys.rhs - sys.matrix * sol);
  if (!sol.allFinite()) raise(ErrorKind::kNumeric, "least-squares solve produced non-finite values");

  const int d = cache.dim();
  LSSolution out;
  out.z = sol.head(d);
  out.c = sol(d);
  out.xi = (1.0 - cache.labels().array() * ((cache.r() * out.z).array() + out.c)).matrix();
  return out;
}

double ls_step_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                         const Eigen::VectorXd& u, double rho, double C) {
  const Eigen::VectorXd& y = cache.labels();
  const double loss = (1.0 - y.array() * ((cache.r() * z).array() + c)).square().sum();
  return 0.5 * z.dot(cache.gram() * z) + 0.5 * rho * z.squaredNorm() + C * loss - rho * u.dot(z) +
         0.5 * rho * u.squaredNorm();
}

Eigen::VectorXd ls_step_gradient(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                                 const Eigen::VectorXd& u, double rho, double C) {
  const Eigen::VectorXd& y = cache.labels();
  const Eigen::VectorXd resid = (1.0 - y.array() * ((cache.r() * z).array() + c)).matrix();
  const Eigen::VectorXd weighted = y.cwiseProduct(resid);
  const int d = cache.dim();
  Eigen::VectorXd g(d + 1);
  g.head(d) = cache.gram() * z + rho * z - 2.0 * C * cache.r().transpose() * weighted - rho * u;
  g(d) = -2.0 * C * weighted.sum();
  return g;
}

}  // namespace l0qsvm
