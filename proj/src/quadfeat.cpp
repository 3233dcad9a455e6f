#include "l0qsvm/quadfeat.hpp"

#include <cmath>
#include <string>

#include "l0qsvm/error.hpp"

namespace l0qsvm {

namespace {

constexpr double kSymmetryTol = 1e-12;

void require_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    raise(ErrorKind::kInvalidArgument,
          "matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
              ", expected square");
  }
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < a.rows(); ++i) {
      const double scale = std::max({1.0, std::abs(a(i, j)), std::abs(a(j, i))});
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTol * scale) {
        raise(ErrorKind::kInvalidArgument,
              "matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace

SymIndexMap::SymIndexMap(int n) : n_(n) {
  if (n < 1) raise(ErrorKind::kInvalidArgument, "feature count must be >= 1, got " + std::to_string(n));
  pairs_.reserve(static_cast<std::size_t>(hvec_size()));
  for (int col = 0; col < n; ++col) {
    for (int row = col; row < n; ++row) pairs_.emplace_back(row, col);
  }
}

int SymIndexMap::position(int i, int j) const {
  if (i < j) std::swap(i, j);
  if (j < 0 || i >= n_) raise(ErrorKind::kInvalidArgument, "index out of range");
  // Columns 0..j-1 contribute n, n-1, ..., n-j+1 entries.
  return j * n_ - j * (j - 1) / 2 + (i - j);
}

Eigen::VectorXd hvec(const Eigen::MatrixXd& a) {
  require_symmetric(a);
  const SymIndexMap map(static_cast<int>(a.rows()));
  Eigen::VectorXd out(map.hvec_size());
  for (int p = 0; p < map.hvec_size(); ++p) {
    const auto [row, col] = map.pair(p);
    out(p) = a(row, col);
  }
  return out;
}

Eigen::MatrixXd unhvec(const Eigen::VectorXd& w, int n) {
  const SymIndexMap map(n);
  if (w.size() != map.hvec_size()) {
    raise(ErrorKind::kInvalidArgument, "hvec length " + std::to_string(w.size()) +
                                           " does not match n=" + std::to_string(n));
  }
  Eigen::MatrixXd a(n, n);
  for (int p = 0; p < map.hvec_size(); ++p) {
    const auto [row, col] = map.pair(p);
    a(row, col) = w(p);
    a(col, row) = w(p);
  }
  return a;
}

Eigen::VectorXd vec(const Eigen::MatrixXd& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
}

Eigen::MatrixXd duplication_matrix(int n) {
  const SymIndexMap map(n);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n * n, map.hvec_size());
  for (int p = 0; p < map.hvec_size(); ++p) {
    const auto [row, col] = map.pair(p);
    d(col * n + row, p) = 1.0;
    d(row * n + col, p) = 1.0;
  }
  return d;
}

Eigen::MatrixXd elimination_matrix(int n) {
  const SymIndexMap map(n);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(map.hvec_size(), n * n);
  for (int p = 0; p < map.hvec_size(); ++p) {
    const auto [row, col] = map.pair(p);
    l(p, col * n + row) = 1.0;
  }
  return l;
}

PackedParams pack(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  if (w.rows() != b.size()) {
    raise(ErrorKind::kInvalidArgument, "W is " + std::to_string(w.rows()) + "x" +
                                           std::to_string(w.cols()) + " but b has length " +
                                           std::to_string(b.size()));
  }
  PackedParams out{SymIndexMap(static_cast<int>(b.size())), {}};
  out.z.resize(out.map.param_size());
  out.z.head(out.map.hvec_size()) = hvec(w);
  out.z.tail(b.size()) = b;
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> unpack(const PackedParams& params) {
  if (params.z.size() != params.map.param_size()) {
    raise(ErrorKind::kInvalidArgument, "packed vector length " + std::to_string(params.z.size()) +
                                           " does not match n=" + std::to_string(params.map.n()));
  }
  const int dw = params.map.hvec_size();
  return {unhvec(params.z.head(dw), params.map.n()), params.z.tail(params.map.n())};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> unpack(const Eigen::VectorXd& z, int n) {
  return unpack(PackedParams{SymIndexMap(n), z});
}

int features_for_param_size(int d) {
  for (int n = 1; n * (n + 1) / 2 + n <= d; ++n) {
    if (n * (n + 1) / 2 + n == d) return n;
  }
  raise(ErrorKind::kInvalidArgument, "no feature count has parameter size " + std::to_string(d));
}

Eigen::VectorXd quadratic_lift(const Eigen::VectorXd& x) {
  const SymIndexMap map(static_cast<int>(x.size()));
  Eigen::VectorXd s(map.hvec_size());
  for (int p = 0; p < map.hvec_size(); ++p) {
    const auto [row, col] = map.pair(p);
    s(p) = row == col ? 0.5 * x(row) * x(row) : x(row) * x(col);
  }
  return s;
}

Eigen::VectorXd lift(const Eigen::VectorXd& x) {
  Eigen::VectorXd r(x.size() * (x.size() + 1) / 2 + x.size());
  r << quadratic_lift(x), x;
  return r;
}

Eigen::MatrixXd h_matrix(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const SymIndexMap map(n);
  const int dw = map.hvec_size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, map.param_size());
  // (Wx)_row picks up W(row, col) x_col and, off the diagonal, W(col, row) x_row.
  for (int p = 0; p < dw; ++p) {
    const auto [row, col] = map.pair(p);
    h(row, p) += x(col);
    if (row != col) h(col, p) += x(row);
  }
  h.rightCols(n).setIdentity();
  return h;
}

ShiftedFactor::ShiftedFactor(std::shared_ptr<const LiftedData> data, double rho)
    : data_(std::move(data)), rho_(rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    raise(ErrorKind::kNumeric, "shift rho must be positive and finite, got " + std::to_string(rho));
  }
  const Eigen::Index d = data_->gram.rows();
  Eigen::MatrixXd shifted = data_->gram;
  shifted.diagonal().array() += rho;
  llt_.compute(shifted);
  if (llt_.info() != Eigen::Success) {
    raise(ErrorKind::kNumeric, "Cholesky factorization of G + rho I failed (rho=" +
                                   std::to_string(rho) + ", d=" + std::to_string(d) + ")");
  }
}

const Eigen::MatrixXd& ShiftedFactor::kinv_rt() const {
  std::call_once(kinv_once_, [this] { kinv_rt_ = llt_.solve(data_->r.transpose()); });
  return kinv_rt_;
}

const Eigen::MatrixXd& ShiftedFactor::dual_hessian() const {
  std::call_once(hessian_once_, [this] {
    const Eigen::MatrixXd& b = kinv_rt();
    hessian_ = data_->r * b;
    hessian_ = 0.5 * (hessian_ + hessian_.transpose()).eval();
    hessian_ = data_->y.asDiagonal() * hessian_ * data_->y.asDiagonal();
  });
  return hessian_;
}

FeatureCache::FeatureCache(Eigen::MatrixXd r, Eigen::MatrixXd gram, Eigen::VectorXd y, int n)
    : memo_(std::make_shared<FactorMemo>()) {
  if (gram.rows() != gram.cols() || gram.rows() != r.cols()) {
    raise(ErrorKind::kInvalidArgument, "G must be d x d with d = columns of r");
  }
  if (y.size() != r.rows()) raise(ErrorKind::kInvalidArgument, "label count does not match sample count");
  data_ = std::make_shared<const LiftedData>(LiftedData{std::move(r), std::move(gram), std::move(y), n});
}

std::shared_ptr<const ShiftedFactor> FeatureCache::factor(double rho) const {
  std::lock_guard<std::mutex> lock(memo_->mutex);
  auto it = memo_->by_rho.find(rho);
  if (it != memo_->by_rho.end()) return it->second;
  auto factor = std::make_shared<const ShiftedFactor>(data_, rho);
  memo_->by_rho.emplace(rho, factor);
  return factor;
}

FeatureCache FeatureCache::restrict_to(std::span<const int> columns) const {
  const auto k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd r(samples(), k);
  Eigen::MatrixXd g(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const int ca = columns[static_cast<std::size_t>(a)];
    if (ca < 0 || ca >= dim()) raise(ErrorKind::kInvalidArgument, "restriction column out of range");
    r.col(a) = data_->r.col(ca);
    for (Eigen::Index b = 0; b < k; ++b) g(a, b) = data_->gram(ca, columns[static_cast<std::size_t>(b)]);
  }
  return FeatureCache(std::move(r), std::move(g), data_->y, data_->n);
}

FeatureCache build_feature_cache(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index m = x.rows();
  const Eigen::Index n = x.cols();
  if (m < 1 || n < 1) raise(ErrorKind::kInvalidData, "dataset must have at least one sample and one feature");
  if (n > kMaxFeatures) {
    raise(ErrorKind::kInvalidData, std::to_string(n) + " features exceed the dense limit of " +
                                       std::to_string(kMaxFeatures) + " (G would be " +
                                       std::to_string(n * (n + 1) / 2 + n) + " square)");
  }
  if (y.size() != m) raise(ErrorKind::kInvalidArgument, "label count does not match sample count");
  if (!x.allFinite()) raise(ErrorKind::kInvalidData, "features contain NaN or Inf");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (y(i) != 1.0 && y(i) != -1.0) {
      raise(ErrorKind::kInvalidLabel, "label at row " + std::to_string(i) + " is " +
                                          std::to_string(y(i)) + ", expected -1 or +1");
    }
  }

  const SymIndexMap map(static_cast<int>(n));
  const int d = map.param_size();
  Eigen::MatrixXd r(m, d);
  // Stack all H_i so that G = 2 H'H is a single product.
  Eigen::MatrixXd stacked(m * n, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    r.row(i) = lift(xi).transpose();
    stacked.middleRows(i * n, n) = h_matrix(xi);
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  g.selfadjointView<Eigen::Lower>().rankUpdate(stacked.transpose(), 2.0);
  g = g.selfadjointView<Eigen::Lower>();
  return FeatureCache(std::move(r), std::move(g), y, static_cast<int>(n));
}

}  // namespace l0qsvm
