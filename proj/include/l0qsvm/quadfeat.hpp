#pragma once

// Vectorization algebra for kernel-free quadratic surfaces.
//
// A surface f(x) = 1/2 x'Wx + b'x + c with symmetric W is rewritten as
// f(x) = z'r(x) + c, where z = [hvec(W); b] stacks the lower triangle of W
// (column-major: w11..wn1, w22..wn2, ..., wnn) followed by b.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace l0qsvm {

/// Largest feature count accepted by build_feature_cache. G is dense with
/// side n(n+1)/2 + n.
inline constexpr int kMaxFeatures = 60;

/// Index bookkeeping between symmetric n x n matrices and hvec positions.
class SymIndexMap {
 public:
  explicit SymIndexMap(int n);

  int n() const noexcept { return n_; }
  int hvec_size() const noexcept { return n_ * (n_ + 1) / 2; }
  int param_size() const noexcept { return hvec_size() + n_; }

  /// (row, col) of hvec position p, row >= col.
  std::pair<int, int> pair(int p) const { return pairs_[static_cast<std::size_t>(p)]; }
  const std::vector<std::pair<int, int>>& pairs() const noexcept { return pairs_; }

  /// hvec position of entry (i, j); order of i and j does not matter.
  int position(int i, int j) const;

 private:
  int n_;
  std::vector<std::pair<int, int>> pairs_;
};

Eigen::VectorXd hvec(const Eigen::MatrixXd& a);
Eigen::MatrixXd unhvec(const Eigen::VectorXd& w, int n);

/// Column-stacked vec(A).
Eigen::VectorXd vec(const Eigen::MatrixXd& a);

// Dense D_n and L_n. Only meant for small n (tests and documentation); the
// production path never materializes them.
Eigen::MatrixXd duplication_matrix(int n);
Eigen::MatrixXd elimination_matrix(int n);

struct PackedParams {
  SymIndexMap map;
  Eigen::VectorXd z;
};

PackedParams pack(const Eigen::MatrixXd& w, const Eigen::VectorXd& b);
std::pair<Eigen::MatrixXd, Eigen::VectorXd> unpack(const PackedParams& params);
std::pair<Eigen::MatrixXd, Eigen::VectorXd> unpack(const Eigen::VectorXd& z, int n);

/// Feature count n such that n(n+1)/2 + n == d; throws if none exists.
int features_for_param_size(int d);

/// Immutable lifted dataset shared between a FeatureCache and its factors.
struct LiftedData {
  Eigen::MatrixXd r;     // m x d, row i is r_i
  Eigen::MatrixXd gram;  // d x d
  Eigen::VectorXd y;     // m labels in {-1, +1}
  int n = 0;             // feature count of the unrestricted problem
};

/// Cholesky factor of (G + rho I) plus the quantities the dual solver derives
/// from it. Everything except the factor is built lazily and memoized.
class ShiftedFactor {
 public:
  ShiftedFactor(std::shared_ptr<const LiftedData> data, double rho);

  double rho() const noexcept { return rho_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

  /// (G + rho I)^{-1} R', d x m.
  const Eigen::MatrixXd& kinv_rt() const;
  /// Q_ij = y_i y_j r_i'(G + rho I)^{-1} r_j.
  const Eigen::MatrixXd& dual_hessian() const;

 private:
  std::shared_ptr<const LiftedData> data_;
  double rho_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  mutable std::once_flag kinv_once_;
  mutable std::once_flag hessian_once_;
  mutable Eigen::MatrixXd kinv_rt_;
  mutable Eigen::MatrixXd hessian_;
};

/// Per-dataset precomputation: the lifted samples r_i (rows of r()), the PSD
/// matrix G, the labels, and a per-rho cache of (G + rho I) factorizations.
///
/// Immutable apart from the factor memo, which is internally synchronized.
/// Copies share both the data and the memo.
class FeatureCache {
 public:
  FeatureCache(Eigen::MatrixXd r, Eigen::MatrixXd gram, Eigen::VectorXd y, int n);

  int samples() const noexcept { return static_cast<int>(data_->r.rows()); }
  int dim() const noexcept { return static_cast<int>(data_->r.cols()); }
  /// Feature count of the unrestricted problem.
  int features() const noexcept { return data_->n; }

  const Eigen::MatrixXd& r() const noexcept { return data_->r; }
  const Eigen::MatrixXd& gram() const noexcept { return data_->gram; }
  const Eigen::VectorXd& labels() const noexcept { return data_->y; }

  /// Factorization of (G + rho I), computed once per rho. Throws numeric
  /// error when rho <= 0 or the factorization breaks down.
  std::shared_ptr<const ShiftedFactor> factor(double rho) const;

  /// Cache over the coordinates listed in `columns` only: r restricted to
  /// those columns and G to the matching principal submatrix.
  FeatureCache restrict_to(std::span<const int> columns) const;

 private:
  struct FactorMemo {
    std::mutex mutex;
    std::map<double, std::shared_ptr<const ShiftedFactor>> by_rho;
  };

  std::shared_ptr<const LiftedData> data_;
  std::shared_ptr<FactorMemo> memo_;
};

/// Builds r_i = [s_i; x_i] and G = 2 sum H_i'H_i from raw samples (rows of x)
/// and labels in {-1, +1}.
FeatureCache build_feature_cache(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// s_i for a single sample: off-diagonal pair (j, k) holds x_j x_k, diagonal
/// entries hold x_j^2 / 2, so that hvec(W)'s_i = 1/2 x'Wx.
Eigen::VectorXd quadratic_lift(const Eigen::VectorXd& x);

/// r(x) = [s(x); x].
Eigen::VectorXd lift(const Eigen::VectorXd& x);

/// H_i with H_i z = W x_i + b.
Eigen::MatrixXd h_matrix(const Eigen::VectorXd& x);

}  // namespace l0qsvm
