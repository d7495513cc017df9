#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gvcplm/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> data, family, y, u, algorithm, out, test, study, emit_csv;
  std::optional<std::vector<std::string>> x, z;
  std::optional<std::vector<double>> h_grid, delta_grid, gammas;
  std::optional<double> h, delta, tol;
  std::optional<int> degree, max_steps, cv, n, reps, threads;
  std::optional<std::uint64_t> seed;
  bool intercept = false, use_cv = false;
};

template <class T>
void put(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

void add_data_flags(CLI::App* app, Flags& f) {
  app->add_option("--data", f.data, "input CSV file");
  app->add_option("--y", f.y, "response column");
  app->add_option("--u", f.u, "index column");
  app->add_option("--x", f.x, "varying-coefficient covariate columns")->delimiter(',');
  app->add_option("--z", f.z, "parametric covariate columns")->delimiter(',');
  app->add_flag("--intercept", f.intercept, "prepend an intercept column to X");
}

void add_smoothing_flags(CLI::App* app, Flags& f) {
  app->add_option("--h", f.h, "bandwidth (cross-validated when unset)");
  app->add_option("--delta", f.delta, "response transform offset used by the initializer");
  app->add_option("--degree", f.degree, "local polynomial degree");
}

void add_fit_flags(CLI::App* app, Flags& f) {
  app->add_option("--algorithm", f.algorithm, "backfit, accel or full")
      ->check(CLI::IsMember({"backfit", "accel", "full"}));
  app->add_option("--max-steps", f.max_steps, "maximum outer Newton steps");
  app->add_option("--tol", f.tol, "relative step tolerance");
}

void add_cv_flags(CLI::App* app, Flags& f) {
  app->add_option("--cv", f.cv, "number of folds");
  app->add_option("--h-grid", f.h_grid, "bandwidth grid")->delimiter(',');
  app->add_option("--delta-grid", f.delta_grid, "offset grid")->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profile-kernel quasi-likelihood fitting for varying-coefficient partially linear models"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON configuration file; flags override its values")->check(CLI::ExistingFile);
  app.add_option("--family", f.family, "gaussian, poisson or bernoulli");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--threads", f.threads, "worker threads (0 = hardware concurrency)");

  auto* fit = app.add_subcommand("fit", "fit a model to a CSV file");
  auto* test = app.add_subcommand("test", "fit and run a likelihood ratio test");
  auto* cv = app.add_subcommand("cv", "cross-validate bandwidth and offset");
  auto* sim = app.add_subcommand("simulate", "run a simulation study");
  for (auto* s : {fit, test, cv, sim}) s->set_help_flag("--help", "print this help and exit");
  for (auto* s : {fit, test, cv}) {
    add_data_flags(s, f);
    add_smoothing_flags(s, f);
    add_fit_flags(s, f);
    add_cv_flags(s, f);
  }
  test->add_option("--test", f.test, "hypothesis such as \"z7=0,z8=0\"");
  add_smoothing_flags(sim, f);
  sim->add_option("--study", f.study, "table1, table2, table3, table4, fig1_null or fig1_power");
  sim->add_option("--n", f.n, "sample size");
  sim->add_option("--reps", f.reps, "number of replicates");
  sim->add_option("--gammas", f.gammas, "alternatives for fig1_power")->delimiter(',');
  sim->add_option("--emit-csv", f.emit_csv, "write one generated dataset to this CSV and exit");
  sim->add_flag("--use-cv", f.use_cv, "choose smoothing per replicate by cross-validation");
  for (auto* s : {fit, test, cv, sim}) {
    s->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
    s->add_option("--family", f.family, "gaussian, poisson or bernoulli");
    s->add_option("--out", f.out, "output directory");
    s->add_option("--seed", f.seed, "master seed");
    s->add_option("--threads", f.threads, "worker threads");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gvcplm::cli::config_error;
  }

  nlohmann::json j = nlohmann::json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "configuration error: " << e.what() << "\n";
      return gvcplm::cli::config_error;
    }
    if (!j.is_object()) {
      std::cerr << "configuration error: config file must hold a JSON object\n";
      return gvcplm::cli::config_error;
    }
  }
  j["command"] = app.get_subcommands().front()->get_name();
  put(j, "data", f.data);
  put(j, "family", f.family);
  put(j, "y", f.y);
  put(j, "u", f.u);
  put(j, "x", f.x);
  put(j, "z", f.z);
  if (f.intercept) j["intercept"] = true;
  put(j, "h", f.h);
  put(j, "delta", f.delta);
  put(j, "degree", f.degree);
  put(j, "algorithm", f.algorithm);
  put(j, "max_steps", f.max_steps);
  put(j, "tol", f.tol);
  put(j, "out", f.out);
  put(j, "seed", f.seed);
  put(j, "cv", f.cv);
  put(j, "h_grid", f.h_grid);
  put(j, "delta_grid", f.delta_grid);
  put(j, "test", f.test);
  put(j, "study", f.study);
  put(j, "n", f.n);
  put(j, "reps", f.reps);
  put(j, "threads", f.threads);
  put(j, "emit_csv", f.emit_csv);
  put(j, "gammas", f.gammas);
  if (f.use_cv) j["use_cv"] = true;

  gvcplm::cli::RunConfig config;
  try {
    config = gvcplm::cli::RunConfig::from_json(j);
  } catch (const gvcplm::Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return gvcplm::cli::config_error;
  }
  return gvcplm::cli::run(config);
}
