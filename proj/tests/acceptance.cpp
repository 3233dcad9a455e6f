// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "l0qsvm/classifier.hpp"
#include "l0qsvm/error.hpp"
#include "l0qsvm/harness.hpp"
#include "l0qsvm/pd_driver.hpp"
#include "l0qsvm/quadfeat.hpp"
#include "l0qsvm/solvers.hpp"
#include "oracles.hpp"

using namespace l0qsvm;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail << "first failure: " << what << "; ";
    ok = ok && cond;
  }
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<void(Outcome&)> body;
};

double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

RawDataset iris() { return load_csv(L0QSVM_DATA_DIR "/iris.csv", "species"); }

void algebraic_identities(Outcome& out) {
  for (int n = 1; n <= 8; ++n) {
    const Eigen::MatrixXd ld = elimination_matrix(n) * duplication_matrix(n);
    out.require(ld == Eigen::MatrixXd::Identity(ld.rows(), ld.cols()), "L_n D_n = I, n=" + std::to_string(n));
  }
  oracle::Rng rng(101);
  const int ns[] = {1, 2, 3, 5};
  double worst_energy = 0.0, worst_value = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = ns[t % 4];
    const int m = rng.integer(1, 6);
    const Eigen::MatrixXd x = rng.matrix(m, n, -2, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(m);
    const FeatureCache cache = build_feature_cache(x, y);
    const Eigen::MatrixXd w = rng.symmetric(n);
    const Eigen::VectorXd b = rng.vector(n);
    const double c = rng.uniform();
    const Eigen::VectorXd z = pack(w, b).z;

    double energy = 0.0;
    for (int i = 0; i < m; ++i) energy += (w * x.row(i).transpose() + b).squaredNorm();
    const double lhs = 0.5 * z.dot(cache.gram() * z);
    worst_energy = std::max(worst_energy, rel(lhs, energy));

    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd xi = x.row(i).transpose();
      const double direct = 0.5 * xi.dot(w * xi) + b.dot(xi) + c;
      worst_value = std::max(worst_value, rel(z.dot(cache.r().row(i).transpose()) + c, direct));
      worst_value = std::max(worst_value, rel(z.dot(lift(xi)) + c, direct));
    }
  }
  out.detail << "max rel err energy " << worst_energy << ", value " << worst_value;
  out.require(worst_energy <= 1e-10, "energy identity");
  out.require(worst_value <= 1e-10, "value identity");
}

void projection_oracle(Outcome& out) {
  oracle::Rng rng(202);
  int cases = 0;
  double worst = 0.0;
  for (int d = 1; d <= 12; ++d) {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd z = rng.vector(d, -3, 3);
      // Ties and zeros exercise the ordering rule.
      if (rep == 1 && d > 2) z(1) = -z(0);
      if (rep == 2) z(0) = 0.0;
      if (rep == 3) z = Eigen::VectorXd::NullaryExpr(d, [&] { return static_cast<double>(rng.integer(-2, 2)); });
      for (int k = 1; k <= d; ++k) {
        const Eigen::VectorXd u = hard_threshold(z, k);
        const double got = (z - u).squaredNorm();
        const double best = oracle::best_k_sparse_distance(z, k);
        worst = std::max(worst, std::abs(got - best));
        out.require((u.array() != 0.0).count() <= k, "sparsity");
        ++cases;
      }
    }
  }
  out.detail << cases << " (d,k) cases, max objective gap " << worst;
  out.require(worst <= 1e-12, "projection objective");
}

void hinge_subproblem(Outcome& out) {
  oracle::Rng rng(303);
  const double rhos[] = {0.1, 1.0, 10.0};
  const double tol = PDConfig{}.dual_tol;
  double worst_gap = 0.0, worst_kkt = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int m = rng.integer(2, 20);
    const int n = rng.integer(1, 3);
    const oracle::Labeled data = oracle::random_labeled(rng, m, n, t % 2 ? 0.3 : 0.0);
    const FeatureCache cache = build_feature_cache(data.x, data.y);
    const double rho = rhos[t % 3];
    const double C = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
    const Eigen::VectorXd u = hard_threshold(rng.vector(cache.dim()), rng.integer(1, cache.dim()));
    const DualState dual = solve_dual_qp(cache, u, rho, C, tol);
    const HingeSolution sol = recover_primal_hinge(dual, cache, u, rho, C);
    const double primal = hinge_step_objective(cache, sol.z, sol.c, u, rho, C);
    // The dual objective is stored in minimization form.
    worst_gap = std::max(worst_gap, std::abs(primal + dual.objective) / (1.0 + std::abs(primal)));
    worst_kkt = std::max(worst_kkt, hinge_kkt_residual(sol, cache, u, rho, C).max());
  }
  out.detail << "max relative gap " << worst_gap << ", max KKT residual " << worst_kkt;
  out.require(worst_gap <= 1e-5, "duality gap");
  out.require(worst_kkt <= 1e-5, "KKT residual");
}

void ls_subproblem(Outcome& out) {
  oracle::Rng rng(404);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int m = rng.integer(2, 20);
    const int n = rng.integer(1, 3);
    const oracle::Labeled data = oracle::random_labeled(rng, m, n, 0.3);
    const FeatureCache cache = build_feature_cache(data.x, data.y);
    const int d = cache.dim();
    const double rho = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const double C = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
    const Eigen::VectorXd u = rng.vector(d);
    const LSSolution sol = solve_ls_subproblem(cache, u, rho, C);
    Eigen::VectorXd point(d + 1);
    point << sol.z, sol.c;
    auto objective = [&](const Eigen::VectorXd& p) { return ls_step_objective(cache, p.head(d), p(d), u, rho, C); };
    const Eigen::VectorXd fd = oracle::central_difference(objective, point, 1e-5);
    const Eigen::VectorXd g = ls_step_gradient(cache, sol.z, sol.c, u, rho, C);
    const double scale = 1.0 + std::abs(objective(point));
    worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / scale);
    worst = std::max(worst, fd.cwiseAbs().maxCoeff() / scale);
  }
  out.detail << "max relative deviation " << worst;
  out.require(worst <= 1e-5, "finite differences");
}

bool contract_holds(const PDResult& res, const PDConfig& config, std::string& why) {
  if (res.trace.outer.back().z_minus_u_inf > config.eps_outer) { why = "z-u gap"; return false; }
  const int nnz = static_cast<int>((res.solution.z.array() != 0.0).count());
  if (nnz > config.k) { why = "sparsity"; return false; }
  if ((hvec(res.W).array() != 0.0).count() + (res.b.array() != 0.0).count() > config.k) {
    why = "model sparsity";
    return false;
  }
  for (std::size_t j = 0; j < res.trace.outer.size(); ++j) {
    const auto& rec = res.trace.outer[j];
    if (rec.rho != config.rho0 * std::pow(config.beta, static_cast<double>(j))) { why = "rho"; return false; }
    for (std::size_t l = 1; l < rec.q_values.size(); ++l) {
      if (rec.q_values[l] > rec.q_values[l - 1] + 1e-10) { why = "q increase"; return false; }
    }
  }
  if (res.report.max_residual() > 1e-4) { why = "Lu-Zhang residual"; return false; }
  return true;
}

void pd_contract(Outcome& out) {
  std::vector<FeatureCache> caches;
  oracle::Rng rng(505);
  for (int t = 0; t < 12; ++t) {
    const oracle::Labeled data = oracle::random_labeled(rng, rng.integer(10, 40), rng.integer(1, 4), t % 3 ? 0.2 : 0.0);
    caches.push_back(build_feature_cache(data.x, data.y));
  }
  const RawDataset e = make_ellipse(200, 0.1, 7);
  caches.push_back(build_feature_cache(standardize(e.features).features, binary_labels(e.labels, "1")));
  const RawDataset flowers = iris();
  const Eigen::MatrixXd xs = standardize(flowers.features).features;
  for (const char* cls : {"setosa", "versicolor", "virginica"}) {
    caches.push_back(build_feature_cache(xs, binary_labels(flowers.labels, cls)));
  }

  int converged = 0, runs = 0, violations = 0;
  std::string first;
  for (std::size_t i = 0; i < caches.size(); ++i) {
    for (Loss loss : {Loss::kHinge, Loss::kQuadratic}) {
      for (double C : {0.1, 1.0, 10.0}) {
        PDConfig config;
        config.loss = loss;
        config.C = C;
        config.k = 1 + static_cast<int>((i * 7 + static_cast<std::size_t>(C * 3)) % static_cast<std::size_t>(caches[i].dim()));
        ++runs;
        try {
          const PDResult res = penalty_decompose(caches[i], config);
          ++converged;
          std::string why;
          if (!contract_holds(res, config, why)) {
            ++violations;
            if (first.empty()) first = "instance " + std::to_string(i) + ": " + why;
          }
        } catch (const PDConvergenceError&) {
        }
      }
    }
  }
  out.detail << converged << "/" << runs << " runs converged, " << violations << " contract violations";
  if (!first.empty()) out.detail << " (" << first << ")";
  out.require(violations == 0, "contract");
  out.require(converged > runs / 2, "too few converged runs to judge");
}

void dense_reduction(Outcome& out) {
  oracle::Rng rng(606);
  double worst = 0.0;
  int mismatched = 0;
  for (int t = 0; t < 8; ++t) {
    const oracle::Labeled data = oracle::random_labeled(rng, rng.integer(20, 40), 1 + t % 3, 0.2);
    const FeatureCache cache = build_feature_cache(data.x, data.y);
    const Eigen::MatrixXd r = oracle::lifted_rows(data.x);
    for (Loss loss : {Loss::kHinge, Loss::kQuadratic}) {
      PDConfig config;
      config.k = cache.dim();
      config.loss = loss;
      config.C = t % 2 ? 1.0 : 10.0;
      const PDResult res = penalty_decompose(cache, config);
      const oracle::DenseSolution dense = loss == Loss::kHinge ? oracle::dense_hinge(data.x, data.y, config.C)
                                                               : oracle::dense_ls(data.x, data.y, config.C);
      worst = std::max(worst, std::abs(res.objective - dense.objective) / std::abs(dense.objective));
      auto hits = [&](const Eigen::VectorXd& z, double c) {
        const Eigen::VectorXd f = (r * z).array() + c;
        int h = 0;
        for (Eigen::Index i = 0; i < f.size(); ++i) h += (f(i) >= 0.0 ? 1.0 : -1.0) == data.y(i);
        return h;
      };
      if (hits(res.solution.z, res.solution.c) != hits(dense.z, dense.c)) ++mismatched;
    }
  }
  out.detail << "max relative objective difference " << worst << ", accuracy mismatches " << mismatched;
  out.require(worst <= 1e-4, "objective");
  out.require(mismatched == 0, "training accuracy");
}

void ellipse(Outcome& out) {
  const RawDataset train = make_ellipse(200, 0.1, 7);
  const RawDataset test = make_ellipse(200, 0.1, 8);
  const Eigen::VectorXd y_train = binary_labels(train.labels, "1");
  const Eigen::VectorXd y_test = binary_labels(test.labels, "1");
  for (auto [loss, C] : {std::pair{Loss::kHinge, 100.0}, std::pair{Loss::kQuadratic, 10.0}}) {
    PDConfig config;
    config.k = 3;
    config.C = C;
    config.loss = loss;
    const QuadraticSurfaceModel model = train_binary(train.features, y_train, config);
    auto acc = [&](const RawDataset& d, const Eigen::VectorXd& y) {
      int hits = 0;
      for (int i = 0; i < d.samples(); ++i) hits += model.predict(d.features.row(i).transpose()) == y(i);
      return static_cast<double>(hits) / d.samples();
    };
    const double mass = model.W.diagonal().squaredNorm() / model.W.squaredNorm();
    const std::string tag(to_string(loss));
    out.detail << tag << ": train " << acc(train, y_train) << " test " << acc(test, y_test) << " diagonal mass "
               << mass << "; ";
    out.require(acc(train, y_train) == 1.0, tag + " training accuracy");
    out.require(acc(test, y_test) == 1.0, tag + " test accuracy");
    out.require(mass >= 0.95, tag + " diagonal mass");
    out.require(model.nonzeros() <= 3, tag + " sparsity");
  }
}

CVReport iris_hinge_report;
ExperimentConfig iris_hinge_config;

void iris_cv(Outcome& out) {
  const RawDataset data = iris();
  for (Loss loss : {Loss::kHinge, Loss::kQuadratic}) {
    ExperimentConfig config;
    config.seed = 0;
    config.trials = 100;
    config.solver.loss = loss;
    const CVReport report = cross_validate(data, config);
    if (loss == Loss::kHinge) {
      iris_hinge_report = report;
      iris_hinge_config = config;
    }
    const std::string tag(to_string(loss));
    out.detail << tag << " " << report.mean << " +/- " << report.std_dev << "; ";
    out.require(report.mean >= 0.90, tag + " mean accuracy");
  }
}

void k_sweep(Outcome& out) {
  const RawDataset data = iris();
  ExperimentConfig config;
  config.seed = 0;
  std::vector<int> ks;
  for (int k = 1; k <= 14; ++k) ks.push_back(k);
  const auto rows = sweep_k(data, config, 10.0, ks);
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.mean_accuracy);
  int smallest = 0;
  for (const auto& r : rows) {
    if (r.k <= 8 && r.mean_accuracy >= best - 0.02) {
      smallest = r.k;
      break;
    }
  }
  out.detail << "C=10, max accuracy " << best << " over k=1..14; smallest k within 0.02: " << smallest << "; curve";
  for (const auto& r : rows) out.detail << " " << r.mean_accuracy;
  out.require(smallest > 0, "no small k near the maximum");
}

void determinism(Outcome& out) {
  const RawDataset data = iris();
  ExperimentConfig config = iris_hinge_config;
  const CVReport again = cross_validate(data, config);
  config.threads = 5;
  const CVReport parallel = cross_validate(data, config);
  const bool serial_same = again.to_text() == iris_hinge_report.to_text() &&
                           again.trials_text() == iris_hinge_report.trials_text();
  const bool parallel_same = parallel.to_text() == iris_hinge_report.to_text() &&
                             parallel.trials_text() == iris_hinge_report.trials_text() &&
                             parallel.summary_json(config) == iris_hinge_report.summary_json(config);
  out.detail << "serial rerun identical: " << serial_same << ", 5 threads identical: " << parallel_same;
  out.require(!iris_hinge_report.folds.empty(), "reference report missing");
  out.require(serial_same, "serial rerun");
  out.require(parallel_same, "concurrent folds");
}

}  // namespace

int main() {
  set_warnings_enabled(false);
  const std::vector<Criterion> criteria = {
      {1, "algebraic identities", 5, algebraic_identities},
      {2, "projection oracle", 10, projection_oracle},
      {3, "hinge subproblem", 30, hinge_subproblem},
      {4, "least-squares subproblem", 10, ls_subproblem},
      {5, "penalty decomposition contract", 0, pd_contract},
      {6, "dense reduction", 0, dense_reduction},
      {7, "synthetic ellipse", 30, ellipse},
      {8, "Iris cross-validation", 600, iris_cv},
      {9, "accuracy vs k", 0, k_sweep},
      {10, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0) out.require(seconds < c.budget_seconds, "runtime budget");
    if (!out.ok) ++failures;
    std::printf("%s %2d %-32s %8.2fs  %s\n", out.ok ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds,
                out.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
