#ifndef GVCPLM_REPORT_HPP
#define GVCPLM_REPORT_HPP

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "gvcplm/cv.hpp"
#include "gvcplm/inference.hpp"
#include "gvcplm/profile.hpp"
#include "gvcplm/sim.hpp"

namespace gvcplm::report {

using nlohmann::ordered_json;

inline ordered_json to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline ordered_json to_json(const SmoothingParams& s) {
  return ordered_json{{"h", s.h}, {"delta", s.delta}, {"degree", s.degree}, {"kernel", "epanechnikov"}};
}

inline ordered_json to_json(const std::vector<TraceEntry>& trace) {
  ordered_json a = ordered_json::array();
  for (const auto& t : trace)
    a.push_back({{"step", t.step}, {"step_norm", t.step_norm}, {"objective", t.objective}, {"halvings", t.halvings}});
  return a;
}

/// Estimates with sandwich standard errors, Wald statistics, the fitted curve
/// and standardized residuals (y - mu) / sqrt(V(mu)).
inline ordered_json fit_report(const FamilySpec& family, const Dataset& data, const FitResult& fit,
                               const FitConfig& config, const SandwichCov* cov) {
  ordered_json j;
  j["family"] = family.to_string();
  j["algorithm"] = to_string(fit.algorithm_used);
  j["n"] = data.n();
  j["converged"] = fit.converged;
  j["steps"] = fit.steps;
  j["profile_loglik"] = fit.profile_loglik;
  j["smoothing"] = to_json(config.smoothing);
  ordered_json coefs = ordered_json::array();
  const Eigen::VectorXd se = cov ? cov->standard_errors() : Eigen::VectorXd();
  for (Eigen::Index k = 0; k < data.p(); ++k) {
    ordered_json c{{"name", data.z_name(k)}, {"estimate", fit.beta[k]}};
    if (cov) {
      const double z = fit.beta[k] / se[k];
      c["std_error"] = se[k];
      c["wald_z"] = z;
      c["p_value"] = 2.0 * (1.0 - normal_cdf(std::abs(z)));
    }
    coefs.push_back(std::move(c));
  }
  j["coefficients"] = std::move(coefs);
  ordered_json curves = ordered_json::object();
  curves["grid_u"] = to_json(fit.curve.grid);
  for (Eigen::Index k = 0; k < data.q(); ++k) curves[data.x_name(k)] = to_json(fit.curve.values.col(k));
  j["curves"] = std::move(curves);
  Eigen::VectorXd resid(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double mu = family.inverse_link(fit.at_observations.m_hat[i]);
    resid[i] = (data.y[i] - mu) / std::sqrt(family.variance(mu));
  }
  j["standardized_residuals"] = to_json(resid);
  j["trace"] = to_json(fit.trace);
  return j;
}

inline ordered_json glrt_report(const Dataset& data, const GlrtResult& g, const ConstraintSpec& c) {
  ordered_json j;
  j["t_n"] = g.t_n;
  j["df"] = g.df;
  j["p_value"] = g.p_value;
  if (g.signed_root) {
    j["signed_root"] = *g.signed_root;
    j["p_value_lower"] = *g.p_lower;
    j["p_value_upper"] = *g.p_upper;
  }
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < c.a.rows(); ++r) rows.push_back(to_json(c.a.row(r).transpose()));
  j["hypothesis_rows"] = std::move(rows);
  ordered_json names = ordered_json::array();
  for (Eigen::Index k = 0; k < data.p(); ++k) names.push_back(data.z_name(k));
  j["coefficient_names"] = std::move(names);
  j["beta_alt"] = to_json(g.beta_alt);
  j["beta_null"] = to_json(g.beta_null);
  j["loglik_alt"] = g.loglik_alt;
  j["loglik_null"] = g.loglik_null;
  return j;
}

inline ordered_json cv_report(const CvReport& r) {
  ordered_json j;
  j["folds"] = r.folds;
  j["seed"] = r.fold_assignment_seed;
  j["best"] = to_json(r.best);
  ordered_json cells = ordered_json::array();
  for (const auto& c : r.cells) {
    ordered_json e{{"delta", c.delta}, {"h", c.h}, {"failed", c.failed}};
    if (c.failed) {
      e["score"] = nullptr;
      e["failure"] = c.failure;
    } else {
      e["score"] = c.score;
    }
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  return j;
}

inline ordered_json study_summary(const StudyReport& r) {
  ordered_json j;
  j["study"] = r.study;
  j["family"] = r.family;
  j["n"] = r.n;
  j["p_n"] = r.p_n;
  j["reps"] = r.reps;
  j["failures"] = r.failures;
  j["seed"] = r.seed;
  j["smoothing"] = to_json(r.smoothing);
  ordered_json s = ordered_json::object();
  for (const auto& [k, v] : r.summary) s[k] = std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
  j["summary"] = std::move(s);
  return j;
}

}  // namespace gvcplm::report

#endif  // GVCPLM_REPORT_HPP
