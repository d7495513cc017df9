#ifndef GVCPLM_INFERENCE_HPP
#define GVCPLM_INFERENCE_HPP

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gvcplm/dataset.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"
#include "gvcplm/profile.hpp"

namespace gvcplm {

/// P(chi^2_df > x). Negative x is treated as 0.
inline double chi2_upper_tail(double x, int df) {
  if (df < 1) throw ParameterError("chi-square degrees of freedom must be at least 1");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

inline double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

/// Linear hypothesis A beta = 0 with orthonormal rows, plus an orthonormal
/// basis B of the complement (A B^T = 0). Under the null beta = B^T gamma.
struct ConstraintSpec {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::Index rows() const { return a.rows(); }
};

/// Orthonormalises the hypothesis rows (modified Gram-Schmidt, order and sign
/// preserving) and completes the basis.
inline ConstraintSpec make_constraint(const Eigen::MatrixXd& rows) {
  const auto l = rows.rows();
  const auto p = rows.cols();
  if (l == 0) throw ParameterError("hypothesis needs at least one row");
  if (l > p) throw RankError("more hypothesis rows than coefficients");
  ConstraintSpec c;
  c.a = rows;
  for (Eigen::Index k = 0; k < l; ++k) {
    const double scale = rows.row(k).norm();
    if (!(scale > 0.0)) throw RankError("hypothesis row " + std::to_string(k + 1) + " is zero");
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < k; ++j) c.a.row(k) -= c.a.row(k).dot(c.a.row(j)) * c.a.row(j);
    const double nrm = c.a.row(k).norm();
    if (nrm < 1e-10 * scale) throw RankError("hypothesis rows are linearly dependent");
    c.a.row(k) /= nrm;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c.a.transpose());
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  c.b = q.rightCols(p - l).transpose();
  return c;
}

/// Hypothesis setting the listed coefficients (0-based) to zero.
inline ConstraintSpec coordinate_constraint(const std::vector<Eigen::Index>& coords, Eigen::Index p) {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(coords.size()), p);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (coords[k] < 0 || coords[k] >= p) throw ParameterError("hypothesis coordinate out of range");
    rows(static_cast<Eigen::Index>(k), coords[k]) = 1.0;
  }
  return make_constraint(rows);
}

/// Covariance of beta_hat from per-observation profile scores:
/// sigma = n * bread^{-1} meat bread^{-1}, with bread the modified Hessian and
/// meat the centred average of score outer products.
struct SandwichCov {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd bread;
  Eigen::MatrixXd meat;
  Eigen::Index n = 0;

  Eigen::VectorXd standard_errors() const { return sigma.diagonal().cwiseMax(0.0).cwiseSqrt(); }
  /// n^2 bread^{-1} meat bread^{-1}, the covariance of sqrt(n)(beta_hat - beta).
  Eigen::MatrixXd scaled() const { return static_cast<double>(n) * sigma; }
};

inline SandwichCov sandwich_covariance(const FamilySpec& family, const Dataset& data, const FitResult& fit,
                                       const SmoothingParams& smoothing, const LocalFitOptions& local = {}) {
  const ProfileEvaluator ev(family, data, smoothing, local);
  const ProfileState st = ev.evaluate(fit.beta);
  const ProfileDerivatives d = ev.derivatives(st);
  const auto n = data.n();
  SandwichCov out;
  out.n = n;
  out.bread = d.hessian;
  const Eigen::RowVectorXd mean = d.scores.colwise().mean();
  out.meat = d.scores.transpose() * d.scores / static_cast<double>(n) - mean.transpose() * mean;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(-out.bread);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.bread);
  const double cond = svd.singularValues().size() > 0
                          ? svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1)
                          : 1.0;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(cond < 1e14))
    throw ConditioningError("sandwich bread is singular or not negative definite (condition " +
                                std::to_string(cond) + ")",
                            cond);
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(out.bread.rows(), out.bread.cols()));
  out.sigma = static_cast<double>(n) * inv * out.meat * inv;
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  return out;
}

struct GlrtResult {
  double t_n = 0.0;
  int df = 0;
  double p_value = 1.0;
  Eigen::VectorXd beta_null;
  Eigen::VectorXd beta_alt;
  double loglik_null = 0.0;
  double loglik_alt = 0.0;
  // l = 1 only: signed root of T_n and its one-sided normal tail probabilities.
  std::optional<double> signed_root;
  std::optional<double> p_lower;
  std::optional<double> p_upper;
  std::vector<TraceEntry> null_trace;
};

/// Generalized likelihood ratio test of A beta = 0. The null fit runs in
/// gamma-space through the reparametrized design Z B^T, started from B beta_hat.
inline GlrtResult glrt(const FamilySpec& family, const Dataset& data, const ConstraintSpec& constraint,
                       const FitConfig& config, const std::optional<FitResult>& unconstrained = std::nullopt) {
  if (constraint.a.cols() != data.p()) throw ParameterError("hypothesis width does not match the number of coefficients");
  const FitResult alt = unconstrained ? *unconstrained : fit(family, data, config);
  const Dataset reduced = data.reparametrized(constraint.b);
  FitResult null_fit;
  try {
    const Eigen::VectorXd gamma0 = constraint.b * alt.beta;
    null_fit = fit(family, reduced, config, gamma0);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("constrained fit failed: ") + e.what());
  }
  GlrtResult out;
  out.df = static_cast<int>(constraint.rows());
  out.beta_alt = alt.beta;
  out.beta_null = constraint.b.transpose() * null_fit.beta;
  out.loglik_alt = alt.profile_loglik;
  out.loglik_null = null_fit.profile_loglik;
  out.null_trace = null_fit.trace;
  out.t_n = std::max(0.0, 2.0 * (alt.profile_loglik - null_fit.profile_loglik));
  out.p_value = chi2_upper_tail(out.t_n, out.df);
  if (out.df == 1) {
    const double sign = (constraint.a.row(0).dot(alt.beta) < 0.0) ? -1.0 : 1.0;
    out.signed_root = sign * std::sqrt(out.t_n);
    out.p_lower = normal_cdf(*out.signed_root);
    out.p_upper = 1.0 - *out.p_lower;
  }
  return out;
}

}  // namespace gvcplm

#endif  // GVCPLM_INFERENCE_HPP
