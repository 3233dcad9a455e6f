#include "l0qsvm/pd_driver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace l0qsvm {

namespace {

double relative_change(const Eigen::VectorXd& now, const Eigen::VectorXd& before) {
  const double scale = std::max(now.lpNorm<Eigen::Infinity>(), 1.0);
  return (now - before).lpNorm<Eigen::Infinity>() / scale;
}

double relative_change(double now, double before) {
  return std::abs(now - before) / std::max(std::abs(now), 1.0);
}

// Rethrows a solver failure with the loop position prepended.
[[noreturn]] void rethrow_annotated(const Error& e, const std::string& where) {
  if (const auto* conv = dynamic_cast<const ConvergenceError*>(&e)) {
    throw ConvergenceError(where + ": " + e.what(), conv->residual());
  }
  throw Error(e.kind(), where + ": " + e.what());
}

}  // namespace

std::string_view to_string(Loss loss) {
  return loss == Loss::kHinge ? "hinge" : "ls";
}

Loss parse_loss(std::string_view text) {
  if (text == "hinge") return Loss::kHinge;
  if (text == "ls" || text == "quadratic") return Loss::kQuadratic;
  raise(ErrorKind::kInvalidArgument, "unknown loss '" + std::string(text) + "' (expected hinge or ls)");
}

void PDConfig::validate() const {
  auto fail = [](const std::string& what) { raise(ErrorKind::kInvalidArgument, what); };
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) fail("rho0 must be positive");
  if (!(beta > 1.0) || !std::isfinite(beta)) fail("beta must be > 1");
  if (!(eps_inner > 0.0)) fail("eps_inner must be positive");
  if (!(eps_outer > 0.0)) fail("eps_outer must be positive");
  if (!(C > 0.0) || !std::isfinite(C)) fail("C must be positive");
  if (k < 1) fail("k must be >= 1");
  if (max_outer < 1) fail("max_outer must be >= 1");
  if (max_inner < 1) fail("max_inner must be >= 1");
  if (!(dual_tol > 0.0)) fail("dual_tol must be positive");
  if (!(stationarity_tol > 0.0)) fail("stationarity_tol must be positive");
}

void PDTrace::write_lines(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "outer,inner,rho,q,z_minus_u_inf,safeguard\n";
  for (const auto& rec : outer) {
    for (std::size_t l = 0; l < rec.inner_gaps.size(); ++l) {
      // q after the u-step of inner iteration l.
      const double q = rec.q_values[2 * l + 1];
      out << rec.outer << ',' << l + 1 << ',' << rec.rho << ',' << q << ',' << rec.inner_gaps[l]
          << ',' << (rec.safeguard ? 1 : 0) << '\n';
    }
  }
  out.precision(old_precision);
}

double loss_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c, double C,
                      Loss loss) {
  const Eigen::ArrayXd slack =
      1.0 - cache.labels().array() * ((cache.r() * z).array() + c);
  const double penalty =
      loss == Loss::kHinge ? slack.cwiseMax(0.0).sum() : slack.square().sum();
  return 0.5 * z.dot(cache.gram() * z) + C * penalty;
}

double penalty_objective(const FeatureCache& cache, const Eigen::VectorXd& z, double c,
                         const Eigen::VectorXd& u, double rho, double C, Loss loss) {
  return loss_objective(cache, z, c, C, loss) + 0.5 * rho * (z - u).squaredNorm();
}

ZStep solve_z_step(const FeatureCache& cache, const Eigen::VectorXd& u, double rho, double C,
                   Loss loss, double dual_tol) {
  ZStep step;
  if (loss == Loss::kHinge) {
    const DualState dual = solve_dual_qp(cache, u, rho, C, dual_tol);
    HingeSolution sol = recover_primal_hinge(dual, cache, u, rho, C);
    step.z = std::move(sol.z);
    step.c = sol.c;
    step.xi = std::move(sol.xi);
    step.alpha = dual.alpha;
  } else {
    LSSolution sol = solve_ls_subproblem(cache, u, rho, C);
    step.z = std::move(sol.z);
    step.c = sol.c;
    step.xi = std::move(sol.xi);
  }
  step.q = penalty_objective(cache, step.z, step.c, u, rho, C, loss);
  return step;
}

FeasiblePoint feasible_point(const FeatureCache& cache, Loss loss, double C) {
  FeasiblePoint p;
  p.z = Eigen::VectorXd::Zero(cache.dim());
  p.c = 0.0;
  p.objective = loss_objective(cache, p.z, p.c, C, loss);
  return p;
}

InnerResult inner_bcd(const FeatureCache& cache, const Eigen::VectorXd& u0, double rho,
                      const PDConfig& config, const ZStep* first_step,
                      const Eigen::VectorXd* z_prev, double c_prev) {
  const int k = std::min(config.k, cache.dim());
  InnerResult res;
  res.u = u0;
  res.z = z_prev != nullptr ? *z_prev : Eigen::VectorXd::Zero(cache.dim());
  res.c = c_prev;

  for (int l = 1; l <= config.max_inner; ++l) {
    ZStep step;
    try {
      step = (l == 1 && first_step != nullptr)
                 ? *first_step
                 : solve_z_step(cache, res.u, rho, config.C, config.loss, config.dual_tol);
    } catch (const Error& e) {
      rethrow_annotated(e, "inner iteration " + std::to_string(l));
    }

    // The hinge step is solved to dual_tol only. A step that fails to lower
    // q against the current iterate is discarded.
    if (l > 1) {
      const double q_current =
          penalty_objective(cache, res.z, res.c, res.u, rho, config.C, config.loss);
      if (step.q > q_current) {
        step.z = res.z;
        step.c = res.c;
        step.alpha = res.alpha;
        step.q = q_current;
      }
    }
    res.q_values.push_back(step.q);

    Eigen::VectorXd u_next = hard_threshold(step.z, k);
    res.q_values.push_back(
        penalty_objective(cache, step.z, step.c, u_next, rho, config.C, config.loss));

    const double change = std::max({relative_change(step.z, res.z), relative_change(step.c, res.c),
                                     relative_change(u_next, res.u)});
    res.z = std::move(step.z);
    res.c = step.c;
    res.alpha = std::move(step.alpha);
    res.u = std::move(u_next);
    res.iterations = l;
    res.gaps.push_back((res.z - res.u).lpNorm<Eigen::Infinity>());
    if (change <= config.eps_inner) break;
  }
  return res;
}

double StationarityReport::max_residual() const {
  return std::max({stationarity, sparsity, equality, multiplier_sign, complementarity, feasibility});
}

StationarityReport check_lu_zhang(const SparseSolution& solution, const FeatureCache& cache,
                                  double tol) {
  const Eigen::VectorXd& y = cache.labels();
  const int m = cache.samples();
  const int d = cache.dim();
  StationarityReport rep;
  rep.support = solution.support;
  rep.tol = tol;

  std::vector<bool> on_support(static_cast<std::size_t>(d), false);
  for (int j : solution.support) {
    if (j >= 0 && j < d) on_support[static_cast<std::size_t>(j)] = true;
  }

  const Eigen::VectorXd margin = (y.array() * ((cache.r() * solution.z).array() + solution.c)).matrix();
  const Eigen::VectorXd gz = cache.gram() * solution.z;

  if (solution.loss == Loss::kHinge) {
    const Eigen::VectorXd lambda =
        solution.multipliers.size() == m ? solution.multipliers : Eigen::VectorXd::Zero(m);
    rep.multipliers = lambda;
    rep.multipliers_bar = (solution.C - lambda.array()).matrix();
    rep.omega = gz - cache.r().transpose() * lambda.cwiseProduct(y);
    rep.equality = std::abs(lambda.dot(y));
    for (int i = 0; i < m; ++i) {
      const double xi = solution.xi(i);
      rep.multiplier_sign = std::max({rep.multiplier_sign, -lambda(i), -rep.multipliers_bar(i)});
      rep.complementarity =
          std::max({rep.complementarity, std::abs(lambda(i) * (margin(i) + xi - 1.0)),
                    std::abs(rep.multipliers_bar(i) * xi)});
      rep.feasibility = std::max({rep.feasibility, 1.0 - xi - margin(i), -xi});
    }
  } else {
    // Equality constraints written as 1 - xi_i - y_i f_i = 0, so mu = -2 C xi
    // and the z-gradient of the Lagrangian is Gz + sum mu_i y_i r_i.
    const Eigen::VectorXd mu = -2.0 * solution.C * solution.xi;
    rep.multipliers = mu;
    rep.omega = gz + cache.r().transpose() * mu.cwiseProduct(y);
    rep.equality = std::abs(mu.dot(y));
    for (int i = 0; i < m; ++i) {
      rep.multiplier_sign =
          std::max(rep.multiplier_sign, std::abs(2.0 * solution.C * solution.xi(i) + mu(i)));
      rep.feasibility = std::max(rep.feasibility, std::abs(margin(i) - 1.0 + solution.xi(i)));
    }
  }

  for (int j = 0; j < d; ++j) {
    if (on_support[static_cast<std::size_t>(j)]) {
      rep.stationarity = std::max(rep.stationarity, std::abs(rep.omega(j)));
    } else {
      rep.sparsity = std::max(rep.sparsity, std::abs(solution.z(j)));
    }
  }
  rep.feasibility = std::max(rep.feasibility, 0.0);
  rep.is_lu_zhang = rep.max_residual() <= tol;
  return rep;
}

SparseSolution refit_on_support(const FeatureCache& cache, const std::vector<int>& support,
                                double C, Loss loss, double dual_tol) {
  if (support.empty()) raise(ErrorKind::kInvalidArgument, "refit support is empty");
  const FeatureCache sub = cache.restrict_to(support);
  const auto k = static_cast<Eigen::Index>(support.size());

  // A vanishing ridge keeps (G_LL + rho I) factorizable when G_LL is
  // singular; it perturbs the stationarity residual by rho * |z|.
  const double scale = std::max(1.0, sub.gram().diagonal().maxCoeff());
  double rho = 1e-10 * scale;
  ZStep step;
  for (int attempt = 0;; ++attempt) {
    try {
      step = solve_z_step(sub, Eigen::VectorXd::Zero(k), rho, C, loss, dual_tol);
      if (step.z.allFinite()) break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric || attempt >= 6) throw;
    }
    if (attempt >= 6) raise(ErrorKind::kNumeric, "support refit did not produce a finite solution");
    rho *= 100.0;
  }

  SparseSolution out;
  out.loss = loss;
  out.C = C;
  out.support = support;
  out.z = Eigen::VectorXd::Zero(cache.dim());
  for (Eigen::Index a = 0; a < k; ++a) out.z(support[static_cast<std::size_t>(a)]) = step.z(a);
  out.c = step.c;
  const Eigen::ArrayXd slack =
      1.0 - cache.labels().array() * ((cache.r() * out.z).array() + out.c);
  if (loss == Loss::kHinge) {
    out.xi = slack.cwiseMax(0.0).matrix();
  } else {
    out.xi = slack.matrix();
  }
  if (loss == Loss::kHinge) out.multipliers = step.alpha;
  return out;
}

PDResult penalty_decompose(const FeatureCache& cache, PDConfig config) {
  config.validate();
  const int d = cache.dim();
  if (cache.samples() < 1) raise(ErrorKind::kInvalidData, "dataset is empty");
  if (config.k > d) {
    warn("k=" + std::to_string(config.k) + " exceeds the parameter count " + std::to_string(d) +
         "; clamping to " + std::to_string(d));
    config.k = d;
  }

  PDResult result;
  result.k_used = config.k;
  const FeasiblePoint feasible = feasible_point(cache, config.loss, config.C);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  std::optional<ZStep> pending;
  try {
    pending = solve_z_step(cache, u, config.rho0, config.C, config.loss, config.dual_tol);
  } catch (const Error& e) {
    rethrow_annotated(e, "initial z-step");
  }
  result.trace.upsilon = std::max(feasible.objective, pending->q);

  Eigen::VectorXd z_prev = Eigen::VectorXd::Zero(d);
  double c_prev = 0.0;
  bool safeguard = false;
  Eigen::VectorXd alpha_last;

  for (int j = 0; j < config.max_outer; ++j) {
    const double rho = config.rho0 * std::pow(config.beta, j);
    InnerResult inner;
    try {
      inner = inner_bcd(cache, u, rho, config, pending ? &*pending : nullptr, &z_prev, c_prev);
    } catch (const Error& e) {
      rethrow_annotated(e, "outer iteration " + std::to_string(j));
    }

    OuterRecord rec;
    rec.outer = j;
    rec.rho = rho;
    rec.inner_iterations = inner.iterations;
    rec.q_values = std::move(inner.q_values);
    rec.inner_gaps = std::move(inner.gaps);
    rec.z_minus_u_inf = (inner.z - inner.u).lpNorm<Eigen::Infinity>();
    rec.safeguard = safeguard;
    result.trace.outer.push_back(std::move(rec));

    z_prev = inner.z;
    c_prev = inner.c;
    u = inner.u;
    alpha_last = inner.alpha;
    if (result.trace.outer.back().z_minus_u_inf <= config.eps_outer) {
      result.converged = true;
      break;
    }
    if (j + 1 == config.max_outer) break;

    const double rho_next = config.rho0 * std::pow(config.beta, j + 1);
    try {
      pending = solve_z_step(cache, u, rho_next, config.C, config.loss, config.dual_tol);
    } catch (const Error& e) {
      rethrow_annotated(e, "safeguard solve before outer iteration " + std::to_string(j + 1));
    }
    safeguard = pending->q > result.trace.upsilon;
    if (safeguard) {
      u = feasible.z;
      pending.reset();
    }
  }

  result.z_penalty = z_prev;
  result.u_penalty = u;
  result.c_penalty = c_prev;

  const std::vector<int> support = top_k_support(z_prev, config.k);
  result.solution =
      refit_on_support(cache, support, config.C, config.loss, std::min(config.dual_tol, 1e-9));
  std::tie(result.W, result.b) = unpack(result.solution.z, cache.features());
  result.objective = loss_objective(cache, result.solution.z, result.solution.c, config.C, config.loss);
  result.report = check_lu_zhang(result.solution, cache, config.stationarity_tol);

  if (!result.converged) {
    const double gap = result.trace.outer.back().z_minus_u_inf;
    if (config.accept_unconverged) {
      warn("penalty decomposition stopped at max_outer with ||z - u||_inf = " + std::to_string(gap) +
           "; keeping the last iterate");
      return result;
    }
    throw PDConvergenceError("penalty decomposition did not reach ||z - u||_inf <= " +
                                 std::to_string(config.eps_outer) + " within " +
                                 std::to_string(config.max_outer) + " outer iterations (last gap " +
                                 std::to_string(gap) + ")",
                             std::move(result));
  }
  return result;
}

}  // namespace l0qsvm
