#include "l0qsvm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace l0qsvm {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool parse_number(const std::string& text, double& value) {
  if (text.empty()) return false;
  std::size_t used = 0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == text.size();
}

// Uniform double in [0, 1) from the top 53 bits.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  // Fisher-Yates with our own index mapping so the order does not depend on
  // the standard library's distribution implementation.
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double evaluate(const OvRModel& model, const RawDataset& data) {
  return accuracy(model.predict_all(data.features), data.labels);
}

}  // namespace

RawDataset RawDataset::subset(const std::vector<int>& rows) const {
  RawDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  out.feature_names = feature_names;
  out.label_column = label_column;
  return out;
}

RawDataset parse_csv(std::istream& in, const std::string& label_column) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) raise(ErrorKind::kInvalidData, "CSV input is empty");

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    raise(ErrorKind::kConfig, "label column '" + label_column + "' not found in header");
  }
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());

  RawDataset data;
  data.label_column = label_column;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_index) data.feature_names.push_back(header[j]);
  }
  if (data.feature_names.empty()) raise(ErrorKind::kInvalidData, "CSV has no feature columns");

  std::vector<std::vector<double>> rows;
  int row_number = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_number;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      raise(ErrorKind::kParse, "row " + std::to_string(row_number) + " has " +
                                   std::to_string(cells.size()) + " cells, header has " +
                                   std::to_string(header.size()));
    }
    std::vector<double> values;
    values.reserve(header.size() - 1);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == label_index) continue;
      double v = 0.0;
      if (!parse_number(cells[j], v) || !std::isfinite(v)) {
        raise(ErrorKind::kParse, "non-numeric cell '" + cells[j] + "' at (row " +
                                     std::to_string(row_number) + ", col " + header[j] + ")");
      }
      values.push_back(v);
    }
    data.labels.push_back(cells[label_index]);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) raise(ErrorKind::kInvalidData, "CSV has a header but no data rows");

  data.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(data.feature_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return data;
}

RawDataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kConfig, "cannot open '" + path + "'");
  return parse_csv(in, label_column);
}

void write_csv(const RawDataset& data, std::ostream& out) {
  for (const auto& name : data.feature_names) out << name << ',';
  out << (data.label_column.empty() ? "label" : data.label_column) << '\n';
  for (int i = 0; i < data.samples(); ++i) {
    for (int j = 0; j < data.features_count(); ++j) out << fmt(data.features(i, j)) << ',';
    out << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

StandardizedFeatures standardize(const Eigen::MatrixXd& train) {
  if (train.rows() < 2) raise(ErrorKind::kInvalidData, "standardization needs at least two rows");
  StandardizedFeatures out;
  out.params = Standardizer::fit(train);
  out.features = out.params.apply(train);
  return out;
}

Eigen::VectorXd binary_labels(const std::vector<std::string>& labels, const std::string& positive) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = labels[i] == positive ? 1.0 : -1.0;
  }
  return y;
}

RawDataset make_ellipse(int m, double margin, std::uint64_t seed, double box) {
  if (m < 1) raise(ErrorKind::kInvalidArgument, "sample count must be positive");
  if (!(margin >= 0.0) || !(box > 1.0 + margin)) {
    raise(ErrorKind::kInvalidArgument, "box must exceed 1 + margin");
  }
  auto rng = make_rng(seed, 0x656c6c69707365ULL);
  RawDataset data;
  data.feature_names = {"x1", "x2"};
  data.label_column = "label";
  data.features.resize(m, 2);
  int filled = 0;
  while (filled < m) {
    const double x1 = box * (2.0 * unit_draw(rng) - 1.0);
    const double x2 = box * (2.0 * unit_draw(rng) - 1.0);
    const double radius = std::hypot(x1, x2);
    if (std::abs(radius - 1.0) < margin) continue;
    const char* label = radius > 1.0 ? "1" : "-1";
    for (double sign : {1.0, -1.0}) {
      if (filled == m) break;
      data.features(filled, 0) = sign * x1;
      data.features(filled, 1) = sign * x2;
      data.labels.push_back(label);
      ++filled;
    }
  }
  return data;
}

int ExperimentConfig::effective_k_max(int n_features) const {
  const int d = n_features * (n_features + 1) / 2 + n_features;
  return k_max > 0 ? std::min(k_max, d) : std::min(2 * n_features, d);
}

void ExperimentConfig::validate(int n_features) const {
  auto fail = [](const std::string& what) { raise(ErrorKind::kConfig, what); };
  if (folds < 2) fail("folds must be >= 2");
  if (trials < 1) fail("trials must be >= 1");
  if (!(c_min > 0.0) || !(c_max >= c_min)) fail("C range must satisfy 0 < c_min <= c_max");
  const int d = n_features * (n_features + 1) / 2 + n_features;
  if (k_min < 1 || k_min > d) fail("k_min must lie in [1, " + std::to_string(d) + "]");
  if (k_max != 0 && (k_max < k_min || k_max > d)) {
    fail("k_max must lie in [k_min, " + std::to_string(d) + "]");
  }
  if (effective_k_max(n_features) < k_min) fail("k range is empty");
  if (threads < 1) fail("threads must be >= 1");
  try {
    PDConfig probe = solver;
    probe.k = std::max(1, probe.k);
    probe.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

std::vector<std::pair<double, int>> draw_hyperparameters(const ExperimentConfig& config,
                                                         int n_features, std::uint64_t stream) {
  auto rng = make_rng(config.seed, stream);
  const double log_lo = std::log(config.c_min);
  const double log_hi = std::log(config.c_max);
  const int k_lo = config.k_min;
  const int k_hi = config.effective_k_max(n_features);
  std::vector<std::pair<double, int>> draws;
  draws.reserve(static_cast<std::size_t>(config.trials));
  for (int t = 0; t < config.trials; ++t) {
    const double C = std::exp(log_lo + (log_hi - log_lo) * unit_draw(rng));
    const int span = k_hi - k_lo + 1;
    const int k = k_lo + std::min(span - 1, static_cast<int>(unit_draw(rng) * span));
    draws.emplace_back(C, k);
  }
  return draws;
}

const Trial& best_trial(const std::vector<Trial>& trials) {
  const Trial* best = nullptr;
  for (const auto& t : trials) {
    if (t.failed) continue;
    if (best == nullptr || t.val_accuracy > best->val_accuracy ||
        (t.val_accuracy == best->val_accuracy &&
         (t.k < best->k || (t.k == best->k && t.C < best->C)))) {
      best = &t;
    }
  }
  if (best == nullptr) raise(ErrorKind::kSearchFailure, "every hyperparameter trial failed");
  return *best;
}

SearchResult random_search(const RawDataset& train, const RawDataset& val,
                           const ExperimentConfig& config, std::uint64_t stream) {
  const int n = train.features_count();
  config.validate(n);
  SearchResult result;
  const auto draws = draw_hyperparameters(config, n, stream);
  for (std::size_t t = 0; t < draws.size(); ++t) {
    Trial trial;
    trial.index = static_cast<int>(t);
    trial.C = draws[t].first;
    trial.k = draws[t].second;
    PDConfig pd = config.solver;
    pd.C = trial.C;
    pd.k = trial.k;
    try {
      const OvRModel model = train_ovr(train.features, train.labels, pd);
      trial.val_accuracy = evaluate(model, val);
    } catch (const Error& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    result.trials.push_back(std::move(trial));
  }
  try {
    const Trial& best = best_trial(result.trials);
    result.C = best.C;
    result.k = best.k;
    result.val_accuracy = best.val_accuracy;
  } catch (const Error& e) {
    std::ostringstream log;
    for (const auto& t : result.trials) log << "\n  trial " << t.index << ": " << t.error;
    raise(ErrorKind::kSearchFailure, std::string("every hyperparameter trial failed") + log.str());
  }
  return result;
}

std::vector<std::vector<int>> stratified_folds(const std::vector<std::string>& labels, int folds,
                                               std::uint64_t seed) {
  if (folds < 2) raise(ErrorKind::kConfig, "folds must be >= 2");
  std::map<std::string, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  for (const auto& [cls, rows] : by_class) {
    if (static_cast<int>(rows.size()) < folds) {
      raise(ErrorKind::kStratification, "class '" + cls + "' has " + std::to_string(rows.size()) +
                                            " members, fewer than " + std::to_string(folds) + " folds");
    }
  }
  auto rng = make_rng(seed, 0x666f6c6473ULL);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  std::size_t next = 0;
  for (auto& [cls, rows] : by_class) {
    shuffle(rows, rng);
    for (int row : rows) {
      out[next].push_back(row);
      next = (next + 1) % out.size();
    }
  }
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

namespace {

FoldResult run_fold(const RawDataset& data, const ExperimentConfig& config,
                    const std::vector<std::vector<int>>& folds, int f) {
  const auto start = std::chrono::steady_clock::now();
  const int nf = static_cast<int>(folds.size());
  const int val_fold = (f + 1) % nf;
  FoldResult res;
  res.fold = f;
  res.test_rows = folds[static_cast<std::size_t>(f)];
  res.val_rows = folds[static_cast<std::size_t>(val_fold)];
  for (int g = 0; g < nf; ++g) {
    if (g == f || g == val_fold) continue;
    const auto& rows = folds[static_cast<std::size_t>(g)];
    res.train_rows.insert(res.train_rows.end(), rows.begin(), rows.end());
  }
  std::sort(res.train_rows.begin(), res.train_rows.end());

  const RawDataset train = data.subset(res.train_rows);
  const RawDataset val = data.subset(res.val_rows);
  const RawDataset test = data.subset(res.test_rows);

  SearchResult search = random_search(train, val, config, static_cast<std::uint64_t>(f) + 1);
  res.C = search.C;
  res.k = search.k;
  res.val_accuracy = search.val_accuracy;
  res.trials = std::move(search.trials);

  std::vector<int> refit_rows = res.train_rows;
  refit_rows.insert(refit_rows.end(), res.val_rows.begin(), res.val_rows.end());
  std::sort(refit_rows.begin(), refit_rows.end());
  const RawDataset refit = data.subset(refit_rows);

  PDConfig pd = config.solver;
  pd.C = res.C;
  pd.k = res.k;
  OvRModel model;
  try {
    model = train_ovr(refit.features, refit.labels, pd);
  } catch (const PDConvergenceError&) {
    PDConfig relaxed = pd;
    relaxed.accept_unconverged = true;
    model = train_ovr(refit.features, refit.labels, relaxed);
    res.retrain_unconverged = true;
  }
  res.final_standardizer = model.models.front().standardizer;
  res.test_accuracy = evaluate(model, test);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace

CVReport cross_validate(const RawDataset& data, const ExperimentConfig& config) {
  config.validate(data.features_count());
  const auto folds = stratified_folds(data.labels, config.folds, config.seed);

  CVReport report;
  report.folds.resize(folds.size());
  if (config.threads <= 1) {
    for (int f = 0; f < config.folds; ++f) {
      report.folds[static_cast<std::size_t>(f)] = run_fold(data, config, folds, f);
    }
  } else {
    for (int begin = 0; begin < config.folds; begin += config.threads) {
      const int end = std::min(config.folds, begin + config.threads);
      std::vector<std::future<FoldResult>> pending;
      for (int f = begin; f < end; ++f) {
        pending.push_back(std::async(std::launch::async, [&data, &config, &folds, f] {
          return run_fold(data, config, folds, f);
        }));
      }
      for (int f = begin; f < end; ++f) {
        report.folds[static_cast<std::size_t>(f)] = pending[static_cast<std::size_t>(f - begin)].get();
      }
    }
  }

  std::vector<double> acc;
  for (const auto& f : report.folds) acc.push_back(f.test_accuracy);
  report.mean = mean_of(acc);
  report.std_dev = population_std(acc);
  return report;
}

std::string CVReport::to_text() const {
  std::ostringstream os;
  os << "fold,test_accuracy,C,k,val_accuracy,n_train,n_val,n_test,failed_trials\n";
  for (const auto& f : folds) {
    const auto failed = std::count_if(f.trials.begin(), f.trials.end(),
                                      [](const Trial& t) { return t.failed; });
    os << f.fold << ',' << fmt(f.test_accuracy) << ',' << fmt(f.C) << ',' << f.k << ','
       << fmt(f.val_accuracy) << ',' << f.train_rows.size() << ',' << f.val_rows.size() << ','
       << f.test_rows.size() << ',' << failed << '\n';
  }
  os << "mean," << fmt(mean) << '\n';
  os << "std," << fmt(std_dev) << '\n';
  return os.str();
}

std::string CVReport::trials_text() const {
  std::ostringstream os;
  os << "fold,trial,C,k,val_accuracy,failed\n";
  for (const auto& f : folds) {
    for (const auto& t : f.trials) {
      os << f.fold << ',' << t.index << ',' << fmt(t.C) << ',' << t.k << ',' << fmt(t.val_accuracy)
         << ',' << (t.failed ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

std::string CVReport::timing_text() const {
  std::ostringstream os;
  os << "fold,seconds\n";
  for (const auto& f : folds) os << f.fold << ',' << fmt(f.seconds) << '\n';
  return os.str();
}

std::string CVReport::summary_json(const ExperimentConfig& config) const {
  nlohmann::json doc;
  doc["dataset"] = config.dataset_path;
  doc["label_column"] = config.label_column;
  doc["loss"] = std::string(to_string(config.solver.loss));
  doc["folds"] = config.folds;
  doc["trials"] = config.trials;
  doc["c_range"] = {config.c_min, config.c_max};
  doc["k_min"] = config.k_min;
  doc["k_max"] = config.k_max;
  doc["seed"] = config.seed;
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& f : folds) {
    per_fold.push_back({{"fold", f.fold},
                        {"test_accuracy", f.test_accuracy},
                        {"C", f.C},
                        {"k", f.k},
                        {"val_accuracy", f.val_accuracy},
                        {"retrain_unconverged", f.retrain_unconverged}});
  }
  doc["per_fold"] = std::move(per_fold);
  doc["mean_accuracy"] = mean;
  doc["std_accuracy"] = std_dev;
  return doc.dump(2) + "\n";
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidArgument:
      return 2;
    case ErrorKind::kInvalidData:
    case ErrorKind::kInvalidLabel:
    case ErrorKind::kParse:
    case ErrorKind::kVersion:
    case ErrorKind::kStratification:
    case ErrorKind::kDimension:
      return 3;
    case ErrorKind::kConvergence:
    case ErrorKind::kSearchFailure:
    case ErrorKind::kNumeric:
      return 4;
  }
  return 1;
}

std::vector<SweepRow> sweep_k(const RawDataset& data, const ExperimentConfig& config, double C,
                              const std::vector<int>& ks) {
  config.validate(data.features_count());
  const auto folds = stratified_folds(data.labels, config.folds, config.seed);
  std::vector<SweepRow> rows;
  for (int k : ks) {
    PDConfig pd = config.solver;
    pd.C = C;
    pd.k = k;
    SweepRow row;
    row.k = k;
    std::vector<double> acc;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<int> train_rows;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
      }
      std::sort(train_rows.begin(), train_rows.end());
      try {
        const RawDataset train = data.subset(train_rows);
        const OvRModel model = train_ovr(train.features, train.labels, pd);
        acc.push_back(evaluate(model, data.subset(folds[f])));
      } catch (const ConvergenceError&) {
        ++row.failed_folds;
      }
    }
    row.mean_accuracy = mean_of(acc);
    row.std_accuracy = population_std(acc);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace l0qsvm
