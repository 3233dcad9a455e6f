#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "l0qsvm/harness.hpp"

namespace l0qsvm {

namespace {

std::string feature_label(const std::vector<std::string>& names, int j) {
  if (j < static_cast<int>(names.size())) return names[static_cast<std::size_t>(j)];
  return "x" + std::to_string(j);
}

}  // namespace

void write_boundary_grid(const QuadraticSurfaceModel& model, std::ostream& out, int resolution,
                         int dims, const std::vector<std::string>& feature_names) {
  if (dims != 2 && dims != 3) raise(ErrorKind::kInvalidArgument, "grid dimension must be 2 or 3");
  if (resolution < 2) raise(ErrorKind::kInvalidArgument, "grid resolution must be >= 2");
  const int n = model.features();
  if (n < dims) {
    raise(ErrorKind::kDimension, "model has " + std::to_string(n) + " features, grid needs " +
                                     std::to_string(dims));
  }

  std::vector<int> axes = model.active_features();
  if (static_cast<int>(axes.size()) > dims) {
    std::ostringstream os;
    os << "model uses " << axes.size() << " features, more than " << dims << " can be plotted; active:";
    for (int j : axes) os << ' ' << feature_label(feature_names, j);
    raise(ErrorKind::kDimension, os.str());
  }
  for (int j = 0; j < n && static_cast<int>(axes.size()) < dims; ++j) {
    if (std::find(axes.begin(), axes.end(), j) == axes.end()) axes.push_back(j);
  }
  std::sort(axes.begin(), axes.end());

  const Eigen::VectorXd& mean = model.standardizer.mean;
  const Eigen::VectorXd& scale = model.standardizer.scale;
  auto coordinate = [&](int axis, int step) {
    const double lo = mean(axis) - 3.0 * scale(axis);
    const double hi = mean(axis) + 3.0 * scale(axis);
    return lo + (hi - lo) * static_cast<double>(step) / static_cast<double>(resolution - 1);
  };

  for (int a : axes) out << feature_label(feature_names, a) << ',';
  out << "f\n";
  out << std::setprecision(10);

  Eigen::VectorXd x = mean;
  const int outer = dims == 3 ? resolution : 1;
  for (int s = 0; s < outer; ++s) {
    if (dims == 3) x(axes[2]) = coordinate(axes[2], s);
    for (int i = 0; i < resolution; ++i) {
      x(axes[0]) = coordinate(axes[0], i);
      for (int j = 0; j < resolution; ++j) {
        x(axes[1]) = coordinate(axes[1], j);
        for (int a = 0; a < dims; ++a) out << x(axes[static_cast<std::size_t>(a)]) << ',';
        out << model.decision_value(x) << '\n';
      }
    }
  }
}

void write_magnitudes(const QuadraticSurfaceModel& model, std::ostream& out,
                      const std::vector<std::string>& feature_names) {
  out << "term,i,j,name_i,name_j,magnitude\n";
  out << std::setprecision(17);
  const int n = model.features();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      out << "W," << i << ',' << j << ',' << feature_label(feature_names, i) << ','
          << feature_label(feature_names, j) << ',' << std::abs(model.W(i, j)) << '\n';
    }
  }
  for (int i = 0; i < n; ++i) {
    out << "b," << i << ",," << feature_label(feature_names, i) << ",," << std::abs(model.b(i))
        << '\n';
  }
}

void write_sweep(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "k,mean_accuracy,std_accuracy,envelope,failed_folds\n";
  out << std::setprecision(17);
  double envelope = 0.0;
  for (const auto& r : rows) {
    envelope = std::max(envelope, r.mean_accuracy);
    out << r.k << ',' << r.mean_accuracy << ',' << r.std_accuracy << ',' << envelope << ','
        << r.failed_folds << '\n';
  }
}

}  // namespace l0qsvm
