// l0qsvm: train, evaluate and export sparse quadratic surface classifiers.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "l0qsvm/harness.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace l0qsvm;

namespace {

struct SolverFlags {
  std::string loss = "hinge";
  double C = 1.0;
  int k = 1;
  double rho0 = 1.0;
  double beta = 10.0;
  double eps_inner = 1e-4;
  double eps_outer = 1e-4;
  int max_outer = 30;
  int max_inner = 50;

  void add_to(CLI::App* app, bool with_c_k) {
    app->add_option("--loss", loss, "hinge or ls")->check(CLI::IsMember({"hinge", "ls"}));
    if (with_c_k) {
      app->add_option("--c", C, "misclassification weight C");
      app->add_option("--k", k, "support size of [hvec(W); b]");
    }
    app->add_option("--rho0", rho0, "initial penalty");
    app->add_option("--beta", beta, "penalty growth factor");
    app->add_option("--eps-inner", eps_inner, "inner-loop tolerance");
    app->add_option("--eps-outer", eps_outer, "outer-loop tolerance on ||z - u||_inf");
    app->add_option("--max-outer", max_outer, "outer iteration cap");
    app->add_option("--max-inner", max_inner, "inner iteration cap");
  }

  PDConfig config() const {
    PDConfig c;
    c.loss = parse_loss(loss);
    c.C = C;
    c.k = k;
    c.rho0 = rho0;
    c.beta = beta;
    c.eps_inner = eps_inner;
    c.eps_outer = eps_outer;
    c.max_outer = max_outer;
    c.max_inner = max_inner;
    return c;
  }
};

struct SearchFlags {
  int folds = 5;
  int trials = 100;
  double c_min = 1e-2;
  double c_max = 1e2;
  int k_min = 1;
  int k_max = 0;
  std::uint64_t seed = 0;
  int threads = 1;

  void add_to(CLI::App* app) {
    app->add_option("--folds", folds, "number of outer folds");
    app->add_option("--trials", trials, "random (C, k) draws per search");
    app->add_option("--c-min", c_min, "lower end of the log-uniform C range");
    app->add_option("--c-max", c_max, "upper end of the log-uniform C range");
    app->add_option("--k-min", k_min, "smallest k drawn");
    app->add_option("--k-max", k_max, "largest k drawn (0: min(2n, d))");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--threads", threads, "folds evaluated concurrently");
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kConfig, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kConfig, "cannot write '" + path.string() + "'");
  out << text;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ? ch : '_';
  return out;
}

ExperimentConfig experiment(const std::string& data, const std::string& label,
                            const SolverFlags& solver, const SearchFlags& search,
                            const std::string& out) {
  ExperimentConfig cfg;
  cfg.dataset_path = data;
  cfg.label_column = label;
  cfg.folds = search.folds;
  cfg.trials = search.trials;
  cfg.c_min = search.c_min;
  cfg.c_max = search.c_max;
  cfg.k_min = search.k_min;
  cfg.k_max = search.k_max;
  cfg.seed = search.seed;
  cfg.threads = search.threads;
  cfg.output_dir = out;
  cfg.solver = solver.config();
  return cfg;
}

PDConfig validated(const PDConfig& c) {
  try {
    c.validate();
  } catch (const Error& e) {
    raise(ErrorKind::kConfig, e.what());
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse kernel-free quadratic surface SVM"};
  app.require_subcommand(1);

  std::string data;
  std::string label = "label";
  std::string model_path;
  std::string out;
  std::string vote = "argmax";
  SolverFlags solver;
  SearchFlags search;

  auto* train = app.add_subcommand("train", "fit a one-vs-rest model and write its JSON document");
  train->add_option("--data", data, "CSV file")->required();
  train->add_option("--label", label, "label column");
  train->add_option("--model", model_path, "model document to write")->required();
  train->add_option("--vote", vote, "argmax or sign-plurality")
      ->check(CLI::IsMember({"argmax", "sign-plurality"}));
  solver.add_to(train, true);

  auto* predict = app.add_subcommand("predict", "predict labels for a CSV");
  predict->add_option("--data", data, "CSV file")->required();
  predict->add_option("--label", label, "label column; accuracy is printed when present");
  predict->add_option("--model", model_path, "model document")->required();
  predict->add_option("--out", out, "predictions CSV (default stdout)");

  auto* cv = app.add_subcommand("cv", "stratified cross-validation with random search");
  cv->add_option("--data", data, "CSV file")->required();
  cv->add_option("--label", label, "label column");
  cv->add_option("--out", out, "output directory")->required();
  solver.add_to(cv, false);
  search.add_to(cv);

  auto* srch = app.add_subcommand("search", "random search on one stratified 75/25 split");
  srch->add_option("--data", data, "CSV file")->required();
  srch->add_option("--label", label, "label column");
  srch->add_option("--out", out, "output directory")->required();
  solver.add_to(srch, false);
  search.add_to(srch);

  std::vector<int> ks;
  auto* sweep = app.add_subcommand("sweep-k", "cross-validated accuracy for each k at fixed C");
  sweep->add_option("--data", data, "CSV file")->required();
  sweep->add_option("--label", label, "label column");
  sweep->add_option("--out", out, "sweep table (default stdout)");
  sweep->add_option("--ks", ks, "k values (default 1..2n)");
  solver.add_to(sweep, true);
  sweep->add_option("--folds", search.folds, "number of folds");
  sweep->add_option("--seed", search.seed, "random seed");

  std::string kind;
  int resolution = 100;
  int dims = 2;
  auto* exp = app.add_subcommand("export", "plot data: boundary grid, magnitudes or PD trace");
  exp->add_option("--kind", kind, "boundary, magnitudes or trace")
      ->required()
      ->check(CLI::IsMember({"boundary", "magnitudes", "trace"}));
  exp->add_option("--model", model_path, "model document (boundary, magnitudes)");
  exp->add_option("--data", data, "CSV file (trace)");
  exp->add_option("--label", label, "label column");
  exp->add_option("--out", out, "output directory")->required();
  exp->add_option("--resolution", resolution, "grid points per axis");
  exp->add_option("--dims", dims, "grid dimension, 2 or 3");
  solver.add_to(exp, true);

  int samples = 200;
  double margin = 0.1;
  double box = 1.3;
  auto* gen = app.add_subcommand("gen-ellipse", "write the synthetic circle dataset");
  gen->add_option("--m", samples, "number of points");
  gen->add_option("--margin", margin, "excluded band around the unit circle");
  gen->add_option("--box", box, "half-width of the sampling square");
  gen->add_option("--seed", search.seed, "random seed");
  gen->add_option("--out", out, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      const RawDataset ds = load_csv(data, label);
      OvRModel model = train_ovr(ds.features, ds.labels, validated(solver.config()));
      model.vote = vote == "argmax" ? VoteRule::kArgmax : VoteRule::kSignPlurality;
      model.feature_names = ds.feature_names;
      write_file(model_path, serialize(model) + "\n");
      std::cout << "training accuracy " << accuracy(model.predict_all(ds.features), ds.labels) << "\n";
    } else if (*predict) {
      const OvRModel model = deserialize_ovr(read_file(model_path));
      const std::string text = read_file(data);
      RawDataset ds;
      bool labelled = true;
      try {
        std::istringstream src(text);
        ds = parse_csv(src, label);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kConfig) throw;
        // No label column: parse with a placeholder one appended.
        labelled = false;
        std::istringstream in(text);
        std::ostringstream patched;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          patched << line << (first ? ",__label__" : ",?") << '\n';
          first = false;
        }
        std::istringstream src(patched.str());
        ds = parse_csv(src, "__label__");
      }
      const auto pred = model.predict_all(ds.features);
      std::ostringstream table;
      table << "row,prediction\n";
      for (std::size_t i = 0; i < pred.size(); ++i) table << i << ',' << pred[i] << '\n';
      if (out.empty()) {
        std::cout << table.str();
      } else {
        write_file(out, table.str());
      }
      if (labelled) std::cerr << "accuracy " << accuracy(pred, ds.labels) << "\n";
    } else if (*cv) {
      const RawDataset ds = load_csv(data, label);
      const ExperimentConfig cfg = experiment(data, label, solver, search, out);
      const CVReport report = cross_validate(ds, cfg);
      const fs::path dir(out);
      write_file(dir / "cv_report.csv", report.to_text());
      write_file(dir / "trials.csv", report.trials_text());
      write_file(dir / "summary.json", report.summary_json(cfg));
      write_file(dir / "timing.csv", report.timing_text());
      std::cout << report.to_text();
    } else if (*srch) {
      const RawDataset ds = load_csv(data, label);
      const ExperimentConfig cfg = experiment(data, label, solver, search, out);
      cfg.validate(ds.features_count());
      const auto parts = stratified_folds(ds.labels, 4, cfg.seed);
      std::vector<int> train_rows;
      for (int g = 1; g < 4; ++g) train_rows.insert(train_rows.end(), parts[g].begin(), parts[g].end());
      std::sort(train_rows.begin(), train_rows.end());
      const SearchResult result = random_search(ds.subset(train_rows), ds.subset(parts[0]), cfg, 0);
      std::ostringstream trials;
      trials << "trial,C,k,val_accuracy,failed\n" << std::setprecision(17);
      for (const auto& t : result.trials) {
        trials << t.index << ',' << t.C << ',' << t.k << ',' << t.val_accuracy << ','
               << (t.failed ? 1 : 0) << '\n';
      }
      const fs::path dir(out);
      write_file(dir / "trials.csv", trials.str());
      nlohmann::json best = {{"C", result.C}, {"k", result.k}, {"val_accuracy", result.val_accuracy}};
      write_file(dir / "best.json", best.dump(2) + "\n");
      std::cout << best.dump() << "\n";
    } else if (*sweep) {
      const RawDataset ds = load_csv(data, label);
      ExperimentConfig cfg = experiment(data, label, solver, search, out);
      if (ks.empty()) {
        ks.resize(static_cast<std::size_t>(cfg.effective_k_max(ds.features_count())));
        std::iota(ks.begin(), ks.end(), 1);
      }
      const auto rows = sweep_k(ds, cfg, solver.C, ks);
      std::ostringstream table;
      write_sweep(rows, table);
      if (out.empty()) {
        std::cout << table.str();
      } else {
        write_file(out, table.str());
      }
    } else if (*exp) {
      const fs::path dir(out);
      if (kind == "trace") {
        if (data.empty()) raise(ErrorKind::kConfig, "--data is required for trace export");
        const RawDataset ds = load_csv(data, label);
        std::vector<PDResult> results;
        const OvRModel model = train_ovr(ds.features, ds.labels, validated(solver.config()), &results);
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
          std::ostringstream os;
          results[c].trace.write_lines(os);
          write_file(dir / ("trace_" + safe_name(model.classes[c]) + ".csv"), os.str());
        }
      } else {
        if (model_path.empty()) raise(ErrorKind::kConfig, "--model is required for " + kind + " export");
        const OvRModel model = deserialize_ovr(read_file(model_path));
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
          std::ostringstream os;
          if (kind == "boundary") {
            write_boundary_grid(model.models[c], os, resolution, dims, model.feature_names);
          } else {
            write_magnitudes(model.models[c], os, model.feature_names);
          }
          write_file(dir / (kind + "_" + safe_name(model.classes[c]) + ".csv"), os.str());
        }
      }
    } else if (*gen) {
      std::ostringstream os;
      write_csv(make_ellipse(samples, margin, search.seed, box), os);
      write_file(out, os.str());
    }
  } catch (const PDConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
