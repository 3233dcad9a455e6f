#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>

#include "l0qsvm/quadfeat.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace l0qsvm;
using testutil::thrown_kind;

TEST_CASE("hvec follows the column-major lower triangle") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2, 3;
  CHECK(hvec(a) == Eigen::Vector3d(1, 2, 3));

  Eigen::VectorXd id(6);
  id << 1, 0, 0, 1, 0, 1;
  CHECK(hvec(Eigen::MatrixXd::Identity(3, 3)) == id);

  Eigen::MatrixXd off(2, 2);
  off << 0, 5, 5, 0;
  CHECK(hvec(off) == Eigen::Vector3d(0, 5, 0));

  Eigen::MatrixXd three(3, 3);
  three << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  Eigen::VectorXd expected(6);
  expected << 1, 2, 3, 4, 5, 6;
  CHECK(hvec(three) == expected);
}

TEST_CASE("hvec rejects non-square and asymmetric input") {
  CHECK(thrown_kind([] { hvec(Eigen::MatrixXd::Zero(2, 3)); }) == ErrorKind::kInvalidArgument);
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2.1, 3;
  CHECK(thrown_kind([&] { hvec(a); }) == ErrorKind::kInvalidArgument);
  // Within tolerance is accepted.
  a(1, 0) = 2.0 + 1e-15;
  CHECK_NOTHROW(hvec(a));
}

TEST_CASE("unhvec inverts hvec") {
  oracle::Rng rng(11);
  for (int n = 1; n <= 6; ++n) {
    const Eigen::MatrixXd a = rng.symmetric(n);
    CHECK(unhvec(hvec(a), n) == a);
  }
  CHECK(thrown_kind([] { unhvec(Eigen::VectorXd::Zero(4), 2); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("SymIndexMap pairs") {
  for (int n = 1; n <= 8; ++n) {
    const SymIndexMap map(n);
    CHECK(map.hvec_size() == n * (n + 1) / 2);
    CHECK(map.param_size() == n * (n + 1) / 2 + n);
    std::set<std::pair<int, int>> seen(map.pairs().begin(), map.pairs().end());
    CHECK(seen.size() == map.pairs().size());
    CHECK(static_cast<int>(map.pairs().size()) == map.hvec_size());
    int p = 0;
    for (int col = 0; col < n; ++col) {
      for (int row = col; row < n; ++row, ++p) {
        CHECK(map.pair(p) == std::make_pair(row, col));
        CHECK(map.position(row, col) == p);
        CHECK(map.position(col, row) == p);
      }
    }
  }
  CHECK(thrown_kind([] { SymIndexMap(0); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("duplication and elimination matrices") {
  CHECK(duplication_matrix(1) == Eigen::MatrixXd::Ones(1, 1));
  CHECK(elimination_matrix(1) == Eigen::MatrixXd::Ones(1, 1));

  CHECK(elimination_matrix(2) * duplication_matrix(2) == Eigen::MatrixXd::Identity(3, 3));
  Eigen::Vector4d v(1, 2, 2, 3);
  CHECK(duplication_matrix(2) * Eigen::Vector3d(1, 2, 3) == Eigen::VectorXd(v));

  oracle::Rng rng(5);
  for (int n = 1; n <= 8; ++n) {
    const Eigen::MatrixXd d = duplication_matrix(n);
    const Eigen::MatrixXd l = elimination_matrix(n);
    CHECK(d.rows() == n * n);
    CHECK(d.cols() == n * (n + 1) / 2);
    CHECK((l * d) == Eigen::MatrixXd::Identity(n * (n + 1) / 2, n * (n + 1) / 2));
    CHECK(((d.array() == 0.0) || (d.array() == 1.0)).all());
    CHECK(((l.array() == 0.0) || (l.array() == 1.0)).all());
    const Eigen::MatrixXd a = rng.symmetric(n);
    CHECK((d * hvec(a) - vec(a)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((l * vec(a) - hvec(a)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(thrown_kind([] { duplication_matrix(0); }) == ErrorKind::kInvalidArgument);
  CHECK(thrown_kind([] { elimination_matrix(-1); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("pack and unpack") {
  Eigen::MatrixXd w(2, 2);
  w << 1, 2, 2, 3;
  const PackedParams p = pack(w, Eigen::Vector2d(4, 5));
  Eigen::VectorXd expected(5);
  expected << 1, 2, 3, 4, 5;
  CHECK(p.z == expected);

  CHECK(pack(Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Zero(3)).z == Eigen::VectorXd::Zero(9));

  oracle::Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const int n = rng.integer(1, 6);
    const Eigen::MatrixXd a = rng.symmetric(n);
    const Eigen::VectorXd b = rng.vector(n);
    const auto [w2, b2] = unpack(pack(a, b));
    CHECK(w2 == a);
    CHECK(b2 == b);
    const Eigen::VectorXd z = rng.vector(n * (n + 1) / 2 + n);
    const auto [w3, b3] = unpack(z, n);
    CHECK(pack(w3, b3).z == z);
    CHECK(pack(a, b).z == oracle::packed(a, b));
  }

  CHECK(thrown_kind([] { pack(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(3)); }) ==
        ErrorKind::kInvalidArgument);
  CHECK(thrown_kind([] { unpack(Eigen::VectorXd::Zero(4), 2); }) == ErrorKind::kInvalidArgument);
  CHECK(features_for_param_size(5) == 2);
  CHECK(features_for_param_size(14) == 4);
  CHECK(thrown_kind([] { features_for_param_size(6); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("one-feature hand expansion") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(quadratic_lift(x) == Eigen::VectorXd::Constant(1, 2.0));
  CHECK(lift(x) == Eigen::Vector2d(2, 2));
  Eigen::MatrixXd h(1, 2);
  h << 2, 1;
  CHECK(h_matrix(x) == h);

  const FeatureCache cache = build_feature_cache(x.transpose(), Eigen::VectorXd::Ones(1));
  Eigen::Matrix2d g;
  g << 4, 2, 2, 1;
  CHECK(cache.gram() == Eigen::MatrixXd(2.0 * g));
  CHECK(cache.r() == Eigen::MatrixXd(lift(x).transpose()));
}

TEST_CASE("lifted features reproduce the quadratic surface") {
  oracle::Rng rng(2024);
  for (int n : {1, 2, 3, 5}) {
    for (int t = 0; t < 250; ++t) {
      const Eigen::MatrixXd w = rng.symmetric(n);
      const Eigen::VectorXd b = rng.vector(n);
      const Eigen::VectorXd x = rng.vector(n, -3, 3);
      const double c = rng.uniform();
      const Eigen::VectorXd z = pack(w, b).z;
      const double rhs = 0.5 * x.dot(w * x) + b.dot(x) + c;
      CHECK(std::abs(z.dot(lift(x)) + c - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
      CHECK((h_matrix(x) * z - (w * x + b)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((lift(x) - oracle::lifted(x)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("G encodes the sum of squared gradients") {
  oracle::Rng rng(99);
  for (int n : {1, 2, 3, 5}) {
    const int m = 3 + n;
    const oracle::Labeled data = oracle::random_labeled(rng, m, n);
    const FeatureCache cache = build_feature_cache(data.x, data.y);
    const Eigen::MatrixXd& g = cache.gram();
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g - oracle::gram(data.x)).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + g.cwiseAbs().maxCoeff()));
    CHECK((cache.r() - oracle::lifted_rows(data.x)).cwiseAbs().maxCoeff() == 0.0);
    for (int t = 0; t < 200; ++t) {
      const Eigen::MatrixXd w = rng.symmetric(n);
      const Eigen::VectorXd b = rng.vector(n);
      const Eigen::VectorXd z = pack(w, b).z;
      double direct = 0.0;
      for (int i = 0; i < m; ++i) direct += (w * data.x.row(i).transpose() + b).squaredNorm();
      const double lhs = 0.5 * z.dot(g * z);
      CHECK(std::abs(lhs - direct) <= 1e-10 * (1.0 + direct));
      const Eigen::VectorXd any = rng.vector(static_cast<int>(z.size()), -5, 5);
      CHECK(any.dot(g * any) >= -1e-12 * g.norm() * any.squaredNorm());
    }
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues();
    CHECK(eig.minCoeff() >= -1e-12 * g.norm());
  }
}

TEST_CASE("build_feature_cache validates input") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::Vector2d y(1, -1);
  x(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(thrown_kind([&] { build_feature_cache(x, y); }) == ErrorKind::kInvalidData);
  x(0, 1) = std::numeric_limits<double>::infinity();
  CHECK(thrown_kind([&] { build_feature_cache(x, y); }) == ErrorKind::kInvalidData);
  x(0, 1) = 0.0;
  CHECK(thrown_kind([&] { build_feature_cache(x, Eigen::Vector2d(1, 0)); }) == ErrorKind::kInvalidLabel);
  CHECK(thrown_kind([&] { build_feature_cache(x, Eigen::Vector2d(1, 2)); }) == ErrorKind::kInvalidLabel);
  CHECK(thrown_kind([&] { build_feature_cache(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)); }) ==
        ErrorKind::kInvalidData);
  CHECK(thrown_kind([&] {
          build_feature_cache(Eigen::MatrixXd::Zero(2, kMaxFeatures + 1), y);
        }) == ErrorKind::kInvalidData);
  CHECK(thrown_kind([&] { build_feature_cache(x, Eigen::Vector3d(1, -1, 1)); }) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("factorizations are cached per rho and restrict consistently") {
  oracle::Rng rng(3);
  const oracle::Labeled data = oracle::random_labeled(rng, 12, 3);
  const FeatureCache cache = build_feature_cache(data.x, data.y);
  const auto f1 = cache.factor(1.0);
  CHECK(cache.factor(1.0) == f1);
  CHECK(cache.factor(10.0) != f1);
  const FeatureCache copy = cache;
  CHECK(copy.factor(1.0) == f1);

  const int d = cache.dim();
  const Eigen::VectorXd rhs = rng.vector(d);
  const Eigen::MatrixXd k = cache.gram() + Eigen::MatrixXd::Identity(d, d);
  CHECK((k * f1->solve(rhs) - rhs).cwiseAbs().maxCoeff() <= 1e-10);

  const Eigen::MatrixXd& q = f1->dual_hessian();
  const Eigen::MatrixXd yr = data.y.asDiagonal() * cache.r();
  CHECK((q - yr * k.inverse() * yr.transpose()).cwiseAbs().maxCoeff() <= 1e-9);

  CHECK(thrown_kind([&] { cache.factor(0.0); }) == ErrorKind::kNumeric);
  CHECK(thrown_kind([&] { cache.factor(-1.0); }) == ErrorKind::kNumeric);

  const std::vector<int> cols = {0, 3, 7};
  const FeatureCache sub = cache.restrict_to(cols);
  CHECK(sub.dim() == 3);
  CHECK(sub.samples() == cache.samples());
  for (int a = 0; a < 3; ++a) {
    CHECK(sub.r().col(a) == cache.r().col(cols[static_cast<std::size_t>(a)]));
    for (int b = 0; b < 3; ++b) {
      CHECK(sub.gram()(a, b) ==
            cache.gram()(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]));
    }
  }
}
