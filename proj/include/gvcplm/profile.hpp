#ifndef GVCPLM_PROFILE_HPP
#define GVCPLM_PROFILE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gvcplm/dataset.hpp"
#include "gvcplm/dbe.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"
#include "gvcplm/kernel.hpp"
#include "gvcplm/local_fit.hpp"

namespace gvcplm {

/// Which derivative terms of the fitted curve enter the Newton iteration.
enum class Algorithm {
  backfitting,  // alpha' and alpha'' treated as zero
  accelerated,  // alpha' kept, alpha'' dropped from the Hessian
  full,         // alpha'' included via finite differences of alpha'
};

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::backfitting: return "backfit";
    case Algorithm::accelerated: return "accel";
    case Algorithm::full: return "full";
  }
  return "accel";
}

inline Algorithm algorithm_from_string(std::string_view s) {
  if (s == "backfit" || s == "backfitting") return Algorithm::backfitting;
  if (s == "accel" || s == "accelerated") return Algorithm::accelerated;
  if (s == "full") return Algorithm::full;
  throw ParameterError("unknown algorithm '" + std::string(s) + "' (expected backfit, accel or full)");
}

struct FitConfig {
  Algorithm algorithm = Algorithm::accelerated;
  int max_steps = 50;
  double step_tol = 1e-6;  // relative to ||beta|| + 1
  SmoothingParams smoothing{};
  bool one_step_curves = false;
  LocalFitOptions local{};
  double fd_epsilon = 1e-4;  // full algorithm's alpha'' differencing step
  int max_halvings = 20;
  int grid_points = 200;

  void validate(const FamilySpec& family) const {
    if (max_steps < 1) throw ParameterError("max_steps must be at least 1");
    if (!(step_tol > 0.0)) throw ParameterError("step_tol must be positive");
    if (!(fd_epsilon > 0.0)) throw ParameterError("fd_epsilon must be positive");
    if (grid_points < 1) throw ParameterError("grid_points must be at least 1");
    smoothing.validate(family);
  }
};

struct TraceEntry {
  int step = 0;
  double step_norm = 0.0;
  double objective = 0.0;
  int halvings = 0;
};

struct FitResult {
  Eigen::VectorXd beta;
  CurveEstimate curve;
  double profile_loglik = 0.0;
  std::vector<TraceEntry> trace;
  bool converged = false;
  Algorithm algorithm_used = Algorithm::accelerated;
  int steps = 0;
  ObservationFits at_observations;
};

/// Profile quantities at one beta: local fits at every U_i and the profile
/// quasi-likelihood Q_n(beta) = sum_i Q(m_hat_i, Y_i).
struct ProfileState {
  Eigen::VectorXd beta;
  Eigen::VectorXd offset;
  ObservationFits fits;
  double objective = 0.0;
};

/// First and second order profile quantities. `directions` row i holds
/// (Z_i + alpha'(U_i) X_i)^T; `scores` row i holds q1_i times that row.
struct ProfileDerivatives {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd scores;
  Eigen::MatrixXd directions;
  std::vector<Eigen::MatrixXd> alpha_prime;
};

class ProfileEvaluator {
 public:
  ProfileEvaluator(const FamilySpec& family, const Dataset& data, const SmoothingParams& smoothing,
                   LocalFitOptions local = {}, bool one_step_curves = false)
      : family_(family), data_(&data), smoother_(family, data, smoothing, local), one_step_(one_step_curves) {}

  const LocalSmoother& smoother() const { return smoother_; }

  ProfileState evaluate(const Eigen::VectorXd& beta, const ProfileState* warm = nullptr) const {
    ProfileState st;
    st.beta = beta;
    st.offset = offset_for(*data_, beta);
    st.fits = smoother_.fit_observations(st.offset, warm ? &warm->fits.fits : nullptr, one_step_ && warm);
    st.objective = 0.0;
    for (Eigen::Index i = 0; i < data_->n(); ++i) st.objective += family_.quasi_loglik(st.fits.m_hat[i], data_->y[i]);
    return st;
  }

  /// Gradient and Hessian of the profile likelihood. `use_alpha_prime` false
  /// gives the backfitting quantities.
  ProfileDerivatives derivatives(const ProfileState& st, bool use_alpha_prime = true,
                                 AlphaPrimeRule rule = AlphaPrimeRule::exact) const {
    const auto n = data_->n();
    const auto p = data_->p();
    ProfileDerivatives d;
    d.directions = data_->z;
    if (use_alpha_prime && p > 0) {
      d.alpha_prime = smoother_.alpha_prime_at_observations(st.offset, st.fits, rule);
      for (Eigen::Index i = 0; i < n; ++i)
        d.directions.row(i) += (d.alpha_prime[static_cast<std::size_t>(i)] * data_->x.row(i).transpose()).transpose();
    }
    Eigen::VectorXd q1(n), nq2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      q1[i] = family_.q1(st.fits.m_hat[i], data_->y[i]);
      nq2[i] = -family_.q2(st.fits.m_hat[i], data_->y[i]);
    }
    d.scores = q1.asDiagonal() * d.directions;
    d.gradient = d.scores.colwise().sum().transpose();
    d.hessian = -(d.directions.transpose() * nq2.asDiagonal() * d.directions);
    return d;
  }

  /// sum_i q1_i sum_r d^2 alpha^(r)(U_i) / d beta d beta^T X_ir, by central
  /// differences of the exact alpha' in beta.
  Eigen::MatrixXd second_order_term(const ProfileState& st, double eps) const {
    const auto n = data_->n();
    const auto p = data_->p();
    Eigen::MatrixXd term = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd q1(n);
    for (Eigen::Index i = 0; i < n; ++i) q1[i] = family_.q1(st.fits.m_hat[i], data_->y[i]);
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd bp = st.beta, bm = st.beta;
      bp[j] += eps;
      bm[j] -= eps;
      const ProfileState sp = evaluate(bp, &st);
      const ProfileState sm = evaluate(bm, &st);
      const auto ap = smoother_.alpha_prime_at_observations(sp.offset, sp.fits);
      const auto am = smoother_.alpha_prime_at_observations(sm.offset, sm.fits);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const Eigen::MatrixXd dj = (ap[si] - am[si]) / (2.0 * eps);
        term.col(j) += q1[i] * (dj * data_->x.row(i).transpose());
      }
    }
    return 0.5 * (term + term.transpose());
  }

 private:
  FamilySpec family_;
  const Dataset* data_;
  LocalSmoother smoother_;
  bool one_step_;
};

/// Q_n(beta): the profile quasi-likelihood with alpha replaced by its local
/// polynomial estimate at each U_i.
inline double profile_objective(const FamilySpec& family, const Dataset& data, const Eigen::VectorXd& beta,
                                const SmoothingParams& smoothing) {
  return ProfileEvaluator(family, data, smoothing).evaluate(beta).objective;
}

inline Eigen::VectorXd profile_gradient(const FamilySpec& family, const Dataset& data, const Eigen::VectorXd& beta,
                                        const SmoothingParams& smoothing) {
  const ProfileEvaluator ev(family, data, smoothing);
  return ev.derivatives(ev.evaluate(beta)).gradient;
}

/// sum_i q2_i (Z_i + alpha' X_i)(Z_i + alpha' X_i)^T, checked negative definite.
inline Eigen::MatrixXd modified_hessian(const FamilySpec& family, const Dataset& data, const Eigen::VectorXd& beta,
                                        const SmoothingParams& smoothing) {
  const ProfileEvaluator ev(family, data, smoothing);
  Eigen::MatrixXd h = ev.derivatives(ev.evaluate(beta)).hessian;
  if (h.size() > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(-h);
    if (llt.info() != Eigen::Success) throw ConditioningError("modified Hessian is not negative definite");
  }
  return h;
}

namespace detail {

inline Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                                        bool& ok) {
  Eigen::LLT<Eigen::MatrixXd> llt(-hessian);
  ok = llt.info() == Eigen::Success;
  if (!ok) return Eigen::VectorXd();
  Eigen::VectorXd d = llt.solve(gradient);
  ok = d.allFinite();
  return d;
}

}  // namespace detail

/// Maximises the profile quasi-likelihood by damped Newton iterations.
inline FitResult fit(const FamilySpec& family, const Dataset& data, const FitConfig& config,
                     const std::optional<Eigen::VectorXd>& init = std::nullopt) {
  config.validate(family);
  data.validate();
  family.check_responses(data.y);
  const auto p = data.p();

  Eigen::VectorXd beta = init ? *init : fit_dbe(family, data, config.smoothing.delta).beta0;
  if (beta.size() != p) throw DataError("initial beta has the wrong length");

  const ProfileEvaluator ev(family, data, config.smoothing, config.local, config.one_step_curves);
  ProfileState state = ev.evaluate(beta);

  FitResult out;
  out.algorithm_used = config.algorithm;
  out.trace.push_back({0, 0.0, state.objective, 0});

  if (p == 0) out.converged = true;
  for (int k = 1; k <= config.max_steps && p > 0; ++k) {
    ProfileDerivatives d = ev.derivatives(state);
    // Backfitting keeps the exact gradient but drops alpha' from the Hessian.
    Eigen::MatrixXd hess =
        config.algorithm == Algorithm::backfitting ? ev.derivatives(state, false).hessian : d.hessian;
    if (config.algorithm == Algorithm::full) {
      Eigen::MatrixXd full = hess + ev.second_order_term(state, config.fd_epsilon);
      Eigen::LLT<Eigen::MatrixXd> check(-full);
      if (check.info() == Eigen::Success) hess = std::move(full);
    }
    bool ok = false;
    const Eigen::VectorXd dir = detail::newton_direction(hess, d.gradient, ok);
    if (!ok) throw ConditioningError("profile Hessian is not negative definite at step " + std::to_string(k));

    const double tol = config.step_tol * (state.beta.norm() + 1.0);
    double t = 1.0;
    bool accepted = false;
    int halvings = 0;
    ProfileState cand;
    for (; halvings <= config.max_halvings; ++halvings) {
      try {
        cand = ev.evaluate(state.beta + t * dir, &state);
        if (std::isfinite(cand.objective) && cand.objective >= state.objective) {
          accepted = true;
          break;
        }
      } catch (const NumericalError&) {
        // treated as a failed trial step
      }
      t *= 0.5;
    }
    if (!accepted) {
      out.converged = dir.norm() < tol;
      break;
    }
    const double step_norm = (t * dir).norm();
    state = std::move(cand);
    out.steps = k;
    out.trace.push_back({k, step_norm, state.objective, halvings});
    if (step_norm < tol) {
      out.converged = true;
      break;
    }
  }

  out.beta = state.beta;
  out.profile_loglik = state.objective;
  out.curve = ev.smoother().fit_curve(state.offset, default_grid(data, config.grid_points));
  out.at_observations = std::move(state.fits);
  return out;
}

}  // namespace gvcplm

#endif  // GVCPLM_PROFILE_HPP
