#ifndef GVCPLM_CLI_HPP
#define GVCPLM_CLI_HPP

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gvcplm/csv.hpp"
#include "gvcplm/cv.hpp"
#include "gvcplm/inference.hpp"
#include "gvcplm/profile.hpp"
#include "gvcplm/report.hpp"
#include "gvcplm/sim.hpp"

namespace gvcplm::cli {

enum ExitCode : int { ok = 0, config_error = 2, data_error = 3, numerical_error = 4 };

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Command { fit, test, cv, simulate };

/// One CLI invocation. Every field maps to a JSON key of the same name.
struct RunConfig {
  Command command = Command::fit;
  std::string data;
  csv::ColumnRoles roles;
  std::string family = "poisson";
  std::optional<double> h;
  std::optional<double> delta;
  int degree = 1;
  std::string algorithm = "accel";
  int max_steps = 50;
  double tol = 1e-6;
  std::string out = ".";
  std::uint64_t seed = 7;
  int cv = 5;
  std::vector<double> h_grid;
  std::vector<double> delta_grid;
  std::string test;
  std::vector<std::vector<double>> hypothesis_rows;
  // simulate
  std::string study = "table2";
  int n = 200;
  int reps = 50;
  int threads = 0;
  std::string emit_csv;
  bool use_cv = false;
  std::vector<double> gammas;

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
      const std::string cmd = j.value("command", std::string("fit"));
      if (cmd == "fit") c.command = Command::fit;
      else if (cmd == "test") c.command = Command::test;
      else if (cmd == "cv") c.command = Command::cv;
      else if (cmd == "simulate") c.command = Command::simulate;
      else throw ConfigError("unknown command '" + cmd + "'");
      c.data = j.value("data", c.data);
      c.roles.y = j.value("y", std::string());
      c.roles.u = j.value("u", std::string());
      c.roles.x = j.value("x", std::vector<std::string>{});
      c.roles.z = j.value("z", std::vector<std::string>{});
      c.roles.intercept = j.value("intercept", false);
      c.family = j.value("family", c.family);
      if (j.contains("h") && !j["h"].is_null()) c.h = j["h"].get<double>();
      if (j.contains("delta") && !j["delta"].is_null()) c.delta = j["delta"].get<double>();
      c.degree = j.value("degree", c.degree);
      c.algorithm = j.value("algorithm", c.algorithm);
      c.max_steps = j.value("max_steps", c.max_steps);
      c.tol = j.value("tol", c.tol);
      c.out = j.value("out", c.out);
      c.seed = j.value("seed", c.seed);
      c.cv = j.value("cv", c.cv);
      c.h_grid = j.value("h_grid", c.h_grid);
      c.delta_grid = j.value("delta_grid", c.delta_grid);
      c.test = j.value("test", c.test);
      c.hypothesis_rows = j.value("hypothesis_rows", c.hypothesis_rows);
      c.study = j.value("study", c.study);
      c.n = j.value("n", c.n);
      c.reps = j.value("reps", c.reps);
      c.threads = j.value("threads", c.threads);
      c.emit_csv = j.value("emit_csv", c.emit_csv);
      c.use_cv = j.value("use_cv", c.use_cv);
      c.gammas = j.value("gammas", c.gammas);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid configuration value: ") + e.what());
    }
    return c;
  }

  void validate_roles() const {
    std::vector<std::string> all{roles.y, roles.u};
    all.insert(all.end(), roles.x.begin(), roles.x.end());
    all.insert(all.end(), roles.z.begin(), roles.z.end());
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t b = a + 1; b < all.size(); ++b)
        if (!all[a].empty() && all[a] == all[b]) throw ConfigError("column '" + all[a] + "' is given two roles");
    if (roles.x.empty() && !roles.intercept) throw ConfigError("no varying-coefficient columns (x) and no intercept");
  }
};

/// Parses "z7=0,z8=0": each term names a Z column (by header name or as zK,
/// 1-based) constrained to zero.
inline ConstraintSpec parse_hypothesis(const std::string& spec, const Dataset& data) {
  std::vector<Eigen::Index> coords;
  std::stringstream ss(spec);
  std::string term;
  while (std::getline(ss, term, ',')) {
    const auto eq = term.find('=');
    std::string name = term.substr(0, eq);
    name.erase(0, name.find_first_not_of(' '));
    name.erase(name.find_last_not_of(' ') + 1);
    if (eq != std::string::npos) {
      std::string rhs = term.substr(eq + 1);
      rhs.erase(0, rhs.find_first_not_of(' '));
      rhs.erase(rhs.find_last_not_of(' ') + 1);
      if (rhs != "0") throw ConfigError("only hypotheses of the form name=0 are supported (got '" + term + "')");
    }
    Eigen::Index idx = -1;
    for (Eigen::Index k = 0; k < data.p(); ++k)
      if (data.z_name(k) == name) idx = k;
    if (idx < 0 && name.size() > 1 && name[0] == 'z' && name.find_first_not_of("0123456789", 1) == std::string::npos)
      idx = std::stol(name.substr(1)) - 1;
    if (idx < 0 || idx >= data.p()) throw ConfigError("hypothesis term '" + name + "' does not name a z column");
    coords.push_back(idx);
  }
  if (coords.empty()) throw ConfigError("empty hypothesis");
  return coordinate_constraint(coords, data.p());
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline void write_csv(const std::filesystem::path& path, const Table& t) {
  std::ostringstream s;
  csv::write_table(s, t.columns, t.rows);
  write_text(path, s.str());
}

inline Dataset load(const RunConfig& c, const FamilySpec& family) {
  if (c.data.empty()) throw ConfigError("no data file given");
  c.validate_roles();
  Dataset d = csv::to_dataset(csv::read_file(c.data), c.roles);
  d.validate();
  family.check_responses(d.y);
  return d;
}

inline FitConfig fit_config(const RunConfig& c, const SmoothingParams& s) {
  FitConfig f;
  f.algorithm = algorithm_from_string(c.algorithm);
  f.max_steps = c.max_steps;
  f.step_tol = c.tol;
  f.smoothing = s;
  return f;
}

inline CvReport run_cv(const RunConfig& c, const FamilySpec& family, const Dataset& data) {
  const auto hs = c.h_grid.empty() ? (c.h ? std::vector<double>{*c.h} : default_h_grid(data)) : c.h_grid;
  const auto ds = c.delta_grid.empty() ? (c.delta ? std::vector<double>{*c.delta} : default_delta_grid(family))
                                       : c.delta_grid;
  SmoothingParams s;
  s.degree = c.degree;
  FitConfig fc = fit_config(c, s);
  fc.max_steps = 3;
  return cross_validate(family, data, make_cv_grid(ds, hs), c.cv, fc, c.seed);
}

inline SmoothingParams smoothing_for(const RunConfig& c, const FamilySpec& family, const Dataset& data,
                                     std::optional<CvReport>& cv) {
  if (!c.h) {
    cv = run_cv(c, family, data);
    SmoothingParams s = cv->best;
    if (c.delta) s.delta = *c.delta;
    return s;
  }
  SmoothingParams s;
  s.h = *c.h;
  s.delta = c.delta.value_or(family.is_gaussian() ? 1.0 : 0.1);
  s.degree = c.degree;
  return s;
}

}  // namespace detail

/// Runs one command and writes its artifacts under `config.out`.
inline int execute(const RunConfig& c, std::ostream& log = std::cerr) {
  namespace fs = std::filesystem;
  const FamilySpec family = FamilySpec::from_string(c.family);
  fs::create_directories(c.out);
  const fs::path out(c.out);

  switch (c.command) {
    case Command::fit:
    case Command::test: {
      const Dataset data = detail::load(c, family);
      std::optional<CvReport> cv;
      const SmoothingParams s = detail::smoothing_for(c, family, data, cv);
      if (cv) detail::write_json(out / "cv.json", report::cv_report(*cv));
      const FitConfig fc = detail::fit_config(c, s);
      const FitResult f = fit(family, data, fc);
      const SandwichCov cov = sandwich_covariance(family, data, f, s);
      detail::write_json(out / "fit.json", report::fit_report(family, data, f, fc, &cov));
      Table curves;
      curves.columns = {"grid_u"};
      for (Eigen::Index k = 0; k < data.q(); ++k) curves.columns.push_back("alpha_" + std::to_string(k + 1) + "_hat");
      for (Eigen::Index g = 0; g < f.curve.grid.size(); ++g) {
        std::vector<double> row{f.curve.grid[g]};
        for (Eigen::Index k = 0; k < data.q(); ++k) row.push_back(f.curve.values(g, k));
        curves.rows.push_back(std::move(row));
      }
      detail::write_csv(out / "curves.csv", curves);
      if (c.command == Command::test) {
        ConstraintSpec hyp;
        if (!c.hypothesis_rows.empty()) {
          Eigen::MatrixXd rows(static_cast<Eigen::Index>(c.hypothesis_rows.size()), data.p());
          for (std::size_t r = 0; r < c.hypothesis_rows.size(); ++r) {
            if (static_cast<Eigen::Index>(c.hypothesis_rows[r].size()) != data.p())
              throw ConfigError("hypothesis row width does not match the number of z columns");
            for (Eigen::Index k = 0; k < data.p(); ++k)
              rows(static_cast<Eigen::Index>(r), k) = c.hypothesis_rows[r][static_cast<std::size_t>(k)];
          }
          hyp = make_constraint(rows);
        } else {
          hyp = parse_hypothesis(c.test, data);
        }
        const GlrtResult g = glrt(family, data, hyp, fc, f);
        detail::write_json(out / "glrt.json", report::glrt_report(data, g, hyp));
        log << "T_n = " << g.t_n << " on " << g.df << " df, p = " << g.p_value << "\n";
      } else {
        log << "fit converged=" << f.converged << " steps=" << f.steps << " loglik=" << f.profile_loglik << "\n";
      }
      return ok;
    }
    case Command::cv: {
      const Dataset data = detail::load(c, family);
      const CvReport r = detail::run_cv(c, family, data);
      detail::write_json(out / "cv.json", report::cv_report(r));
      Table t;
      t.columns = {"delta", "h", "score", "failed"};
      for (const auto& cell : r.cells) t.rows.push_back({cell.delta, cell.h, cell.score, cell.failed ? 1.0 : 0.0});
      detail::write_csv(out / "cv_scores.csv", t);
      log << "best h=" << r.best.h << " delta=" << r.best.delta << "\n";
      return ok;
    }
    case Command::simulate: {
      if (!c.emit_csv.empty()) {
        const SimDesign d = SimDesign::for_family(family.name(), c.n, c.seed);
        std::ostringstream s;
        csv::write_dataset(s, generate(d));
        detail::write_text(c.emit_csv, s.str());
        log << "wrote " << c.emit_csv << "\n";
        return ok;
      }
      StudyConfig sc;
      sc.study = study_from_string(c.study);
      sc.family = family.name();
      sc.n = c.n;
      sc.reps = c.reps;
      sc.seed = c.seed;
      sc.threads = c.threads;
      sc.use_cv = c.use_cv;
      sc.gammas = c.gammas;
      if (c.h) {
        SmoothingParams s = design_smoothing(family.name(), c.n);
        s.h = *c.h;
        if (c.delta) s.delta = *c.delta;
        sc.smoothing = s;
      }
      const StudyReport r = run_study(sc);
      detail::write_json(out / (r.study + "_summary.json"), report::study_summary(r));
      detail::write_csv(out / (r.study + "_replicates.csv"), r.replicates);
      if (!r.plot.columns.empty()) detail::write_csv(out / (r.study + "_plot.csv"), r.plot);
      log << r.study << ": " << r.reps - r.failures << " of " << r.reps << " replicates succeeded\n";
      return ok;
    }
  }
  return ok;
}

/// execute() with the exit-code contract: 2 configuration, 3 data,
/// 4 numerical failure (a diagnostic JSON is written to the output directory).
inline int run(const RunConfig& c, std::ostream& log = std::cerr) {
  try {
    return execute(c, log);
  } catch (const DataError& e) {
    log << "data error: " << e.what() << "\n";
    return data_error;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    try {
      std::filesystem::create_directories(c.out);
      nlohmann::ordered_json diag{{"error", "numerical"}, {"message", e.what()}};
      if (const auto* ce = dynamic_cast<const ConditioningError*>(&e)) diag["condition"] = ce->condition();
      detail::write_json(std::filesystem::path(c.out) / "diagnostic.json", diag);
    } catch (...) {
    }
    return numerical_error;
  } catch (const Error& e) {
    log << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "configuration error: " << e.what() << "\n";
    return config_error;
  }
}

}  // namespace gvcplm::cli

#endif  // GVCPLM_CLI_HPP
