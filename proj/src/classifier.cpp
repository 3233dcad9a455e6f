#include "l0qsvm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace l0qsvm {

using nlohmann::json;

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const auto n = x.cols();
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))))) {
      warn("feature " + std::to_string(j) + " has zero variance on the training split; scale set to 1");
      s.scale(j) = 1.0;
    } else {
      s.scale(j) = sd;
    }
  }
  return s;
}

Standardizer Standardizer::identity(int n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) {
    raise(ErrorKind::kInvalidArgument, "expected " + std::to_string(mean.size()) + " features, got " +
                                           std::to_string(x.cols()));
  }
  return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Eigen::VectorXd Standardizer::apply_one(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) {
    raise(ErrorKind::kInvalidArgument, "expected " + std::to_string(mean.size()) + " features, got " +
                                           std::to_string(x.size()));
  }
  return ((x - mean).array() / scale.array()).matrix();
}

int QuadraticSurfaceModel::nonzeros() const {
  int count = 0;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    for (Eigen::Index i = j; i < W.rows(); ++i) count += W(i, j) != 0.0;
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) count += b(i) != 0.0;
  return count;
}

std::vector<int> QuadraticSurfaceModel::active_features() const {
  std::set<int> active;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    for (Eigen::Index i = j; i < W.rows(); ++i) {
      if (W(i, j) != 0.0) {
        active.insert(static_cast<int>(i));
        active.insert(static_cast<int>(j));
      }
    }
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b(i) != 0.0) active.insert(static_cast<int>(i));
  }
  return {active.begin(), active.end()};
}

double QuadraticSurfaceModel::decision_value(const Eigen::VectorXd& x) const {
  if (x.size() != b.size()) {
    raise(ErrorKind::kInvalidArgument, "expected " + std::to_string(b.size()) + " features, got " +
                                           std::to_string(x.size()));
  }
  const Eigen::VectorXd s = standardizer.apply_one(x);
  return 0.5 * s.dot(W * s) + b.dot(s) + c;
}

Eigen::VectorXd QuadraticSurfaceModel::decision_values(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd s = standardizer.apply(x);
  const Eigen::MatrixXd sw = s * W;
  return (0.5 * (sw.array() * s.array()).rowwise().sum()).matrix() + s * b +
         Eigen::VectorXd::Constant(x.rows(), c);
}

int QuadraticSurfaceModel::predict(const Eigen::VectorXd& x) const {
  return decision_value(x) >= 0.0 ? 1 : -1;
}

std::size_t OvRModel::predict_index(const Eigen::VectorXd& x) const {
  if (models.empty()) raise(ErrorKind::kInvalidArgument, "one-vs-rest model has no classes");
  std::vector<double> f(models.size());
  for (std::size_t c = 0; c < models.size(); ++c) f[c] = models[c].decision_value(x);
  if (vote == VoteRule::kArgmax) {
    return static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
  }
  std::vector<int> votes(models.size(), 0);
  for (std::size_t c = 0; c < models.size(); ++c) {
    if (f[c] >= 0.0) {
      ++votes[c];
    } else {
      for (std::size_t o = 0; o < models.size(); ++o) votes[o] += o != c;
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < models.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && f[c] > f[best])) best = c;
  }
  return best;
}

const std::string& OvRModel::predict(const Eigen::VectorXd& x) const {
  return classes[predict_index(x)];
}

std::vector<std::string> OvRModel::predict_all(const Eigen::MatrixXd& x) const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(predict(x.row(i).transpose()));
  return out;
}

QuadraticSurfaceModel train_binary_standardized(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y,
                                                const Standardizer& standardizer,
                                                const PDConfig& config, PDResult* result) {
  const FeatureCache cache = build_feature_cache(xs, y);
  PDResult res = penalty_decompose(cache, config);
  QuadraticSurfaceModel model;
  model.W = res.W;
  model.b = res.b;
  model.c = res.solution.c;
  model.k = res.k_used;
  model.loss = config.loss;
  model.standardizer = standardizer;
  if (result != nullptr) *result = std::move(res);
  return model;
}

QuadraticSurfaceModel train_binary(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const PDConfig& config, PDResult* result) {
  const Standardizer s = Standardizer::fit(x);
  return train_binary_standardized(s.apply(x), y, s, config, result);
}

OvRModel train_ovr(const Eigen::MatrixXd& x, const std::vector<std::string>& labels,
                   const PDConfig& config, std::vector<PDResult>* results) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    raise(ErrorKind::kInvalidArgument, "label count does not match sample count");
  }
  OvRModel ovr;
  const std::set<std::string> distinct(labels.begin(), labels.end());
  ovr.classes.assign(distinct.begin(), distinct.end());
  if (ovr.classes.size() < 2) {
    raise(ErrorKind::kInvalidLabel, "one-vs-rest needs at least two classes");
  }
  const Standardizer s = Standardizer::fit(x);
  const Eigen::MatrixXd xs = s.apply(x);
  if (results != nullptr) results->clear();
  if (ovr.classes.size() == 2) {
    // One fit; the rest-vs-class model is its exact negation.
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      y(i) = labels[static_cast<std::size_t>(i)] == ovr.classes[0] ? 1.0 : -1.0;
    }
    PDResult res;
    QuadraticSurfaceModel first = train_binary_standardized(xs, y, s, config, &res);
    QuadraticSurfaceModel second = first;
    second.W = -first.W;
    second.b = -first.b;
    second.c = -first.c;
    ovr.models = {std::move(first), std::move(second)};
    if (results != nullptr) results->assign(2, res);
    return ovr;
  }
  for (const auto& cls : ovr.classes) {
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      y(i) = labels[static_cast<std::size_t>(i)] == cls ? 1.0 : -1.0;
    }
    PDResult res;
    ovr.models.push_back(train_binary_standardized(xs, y, s, config, &res));
    if (results != nullptr) results->push_back(std::move(res));
  }
  return ovr;
}

double accuracy(const std::vector<std::string>& predicted, const std::vector<std::string>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    raise(ErrorKind::kInvalidArgument, "accuracy needs equal-length, non-empty label lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json model_json(const QuadraticSurfaceModel& model) {
  const auto n = model.b.size();
  std::vector<double> lower;
  lower.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) lower.push_back(model.W(i, j));
  }
  return json{{"version", kModelSchemaVersion},
              {"n", n},
              {"k", model.k},
              {"loss", std::string(to_string(model.loss))},
              {"mean", vector_json(model.standardizer.mean)},
              {"scale", vector_json(model.standardizer.scale)},
              {"W", lower},
              {"b", vector_json(model.b)},
              {"c", model.c}};
}

void check_version(const json& doc) {
  if (!doc.is_object() || !doc.contains("version")) {
    raise(ErrorKind::kParse, "model document has no version field");
  }
  if (!doc.at("version").is_number_integer()) raise(ErrorKind::kParse, "version must be an integer");
  const int version = doc.at("version").get<int>();
  if (version != kModelSchemaVersion) {
    raise(ErrorKind::kVersion, "unsupported model schema version " + std::to_string(version) +
                                   " (expected " + std::to_string(kModelSchemaVersion) + ")");
  }
}

json parse_document(const std::string& document) {
  try {
    return json::parse(document);
  } catch (const json::exception& e) {
    raise(ErrorKind::kParse, std::string("malformed model document: ") + e.what());
  }
}

Eigen::VectorXd vector_field(const json& doc, const char* name, Eigen::Index expected) {
  const auto& field = doc.at(name);
  if (!field.is_array() || static_cast<Eigen::Index>(field.size()) != expected) {
    raise(ErrorKind::kParse, std::string("field '") + name + "' must be an array of length " +
                                 std::to_string(expected));
  }
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const auto& e = field[static_cast<std::size_t>(i)];
    if (!e.is_number()) raise(ErrorKind::kParse, std::string("field '") + name + "' has a non-numeric entry");
    v(i) = e.get<double>();
  }
  return v;
}

QuadraticSurfaceModel model_from_json(const json& doc) {
  check_version(doc);
  try {
    QuadraticSurfaceModel model;
    const int n = doc.at("n").get<int>();
    if (n < 1) raise(ErrorKind::kParse, "n must be >= 1");
    model.k = doc.at("k").get<int>();
    model.loss = parse_loss(doc.at("loss").get<std::string>());
    model.standardizer.mean = vector_field(doc, "mean", n);
    model.standardizer.scale = vector_field(doc, "scale", n);
    const Eigen::VectorXd lower = vector_field(doc, "W", n * (n + 1) / 2);
    model.W.resize(n, n);
    Eigen::Index p = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j, ++p) {
        model.W(i, j) = lower(p);
        model.W(j, i) = lower(p);
      }
    }
    model.b = vector_field(doc, "b", n);
    if (!doc.at("c").is_number()) raise(ErrorKind::kParse, "field 'c' must be numeric");
    model.c = doc.at("c").get<double>();
    return model;
  } catch (const json::exception& e) {
    raise(ErrorKind::kParse, std::string("corrupted model document: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidArgument) raise(ErrorKind::kParse, e.what());
    throw;
  }
}

}  // namespace

std::string serialize(const QuadraticSurfaceModel& model) {
  return model_json(model).dump(2);
}

QuadraticSurfaceModel deserialize_model(const std::string& document) {
  return model_from_json(parse_document(document));
}

std::string serialize(const OvRModel& model) {
  json doc{{"version", kModelSchemaVersion},
           {"type", "ovr"},
           {"vote", model.vote == VoteRule::kArgmax ? "argmax" : "sign-plurality"},
           {"classes", model.classes}};
  json models = json::array();
  for (const auto& m : model.models) models.push_back(model_json(m));
  doc["models"] = std::move(models);
  if (!model.feature_names.empty()) doc["feature_names"] = model.feature_names;
  return doc.dump(2);
}

OvRModel deserialize_ovr(const std::string& document) {
  const json doc = parse_document(document);
  check_version(doc);
  try {
    if (doc.value("type", std::string()) != "ovr") {
      raise(ErrorKind::kParse, "document is not a one-vs-rest model");
    }
    OvRModel ovr;
    const std::string vote = doc.at("vote").get<std::string>();
    if (vote == "argmax") {
      ovr.vote = VoteRule::kArgmax;
    } else if (vote == "sign-plurality") {
      ovr.vote = VoteRule::kSignPlurality;
    } else {
      raise(ErrorKind::kParse, "unknown vote rule '" + vote + "'");
    }
    ovr.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& m : doc.at("models")) ovr.models.push_back(model_from_json(m));
    if (ovr.models.size() != ovr.classes.size() || ovr.classes.size() < 2) {
      raise(ErrorKind::kParse, "class list and model list disagree");
    }
    if (doc.contains("feature_names")) {
      ovr.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
      if (static_cast<int>(ovr.feature_names.size()) != ovr.models.front().features()) {
        raise(ErrorKind::kParse, "feature_names length disagrees with the model");
      }
    }
    return ovr;
  } catch (const json::exception& e) {
    raise(ErrorKind::kParse, std::string("corrupted model document: ") + e.what());
  }
}

}  // namespace l0qsvm
