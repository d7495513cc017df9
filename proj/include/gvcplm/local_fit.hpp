#ifndef GVCPLM_LOCAL_FIT_HPP
#define GVCPLM_LOCAL_FIT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gvcplm/dataset.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"
#include "gvcplm/kernel.hpp"

namespace gvcplm {

struct LocalFitOptions {
  int max_iters = 50;
  double tol = 1e-8;  // max-norm of the local score
  int max_halvings = 20;
};

/// Local polynomial quasi-likelihood fit at one point u.
///
/// a0 is the estimate of alpha(u); row r-1 of `higher` holds a_r, the r-th
/// derivative coefficient of the local expansion sum_r a_r^T X (U - u)^r / r!.
struct LocalFit {
  double u = 0.0;
  Eigen::VectorXd a0;
  Eigen::MatrixXd higher;
  bool converged = false;
  int newton_iters = 0;
  double gradient_norm = 0.0;
};

/// Fitted coefficient functions on a grid. dbeta[k] (p x q), when present,
/// holds d alpha(grid[k]) / d beta.
struct CurveEstimate {
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;
  std::vector<Eigen::MatrixXd> dbeta;
};

/// Local fits evaluated at every observation's own U_i.
struct ObservationFits {
  Eigen::MatrixXd alpha;  // n x q
  Eigen::VectorXd m_hat;  // alpha(U_i)^T X_i + offset_i
  std::vector<LocalFit> fits;
};

enum class AlphaPrimeRule {
  exact,   // implicit derivative of the local polynomial fit
  plugin,  // local-constant moment formula with q2 evaluated at fitted m_hat
};

inline Eigen::VectorXd uniform_grid(double lo, double hi, int points) {
  if (points < 1) throw ParameterError("grid needs at least one point");
  if (points == 1) return Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
  return Eigen::VectorXd::LinSpaced(points, lo, hi);
}

namespace detail {

/// Solves (H + lambda I) x = rhs for symmetric positive semidefinite H,
/// escalating lambda through 1e-10 .. 1e-6 when H is badly conditioned.
inline Eigen::MatrixXd regularized_solve(const Eigen::MatrixXd& h, const Eigen::MatrixXd& rhs,
                                         const char* what) {
  constexpr double max_condition = 1e12;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.info() != Eigen::Success) throw SingularityError(std::string(what) + ": eigen decomposition failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double lmax = ev.maxCoeff();
  const double lmin = ev.minCoeff();
  if (!(lmax > 0.0) || !std::isfinite(lmax))
    throw SingularityError(std::string(what) + ": information matrix has no curvature");
  double ridge = 0.0;
  if (!(lmin > 0.0 && lmax / lmin <= max_condition)) {
    bool ok = false;
    for (double lambda = 1e-10; lambda <= 1.000001e-6; lambda *= 10.0) {
      const double lo = lmin + lambda;
      if (lo > 0.0 && (lmax + lambda) / lo <= max_condition) {
        ridge = lambda;
        ok = true;
        break;
      }
    }
    if (!ok)
      throw SingularityError(std::string(what) + ": condition number " +
                             std::to_string(lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity()) +
                             " exceeds 1e12 after ridge escalation");
  }
  const Eigen::VectorXd inv = (ev.array() + ridge).inverse().matrix();
  return eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * rhs);
}

inline double factorial(int r) {
  double f = 1.0;
  for (int k = 2; k <= r; ++k) f *= k;
  return f;
}

}  // namespace detail

/// Local polynomial quasi-likelihood smoother for a fixed dataset.
///
/// Given an offset vector (Z beta), maximises
///   sum_i Q(g^{-1}(sum_r a_r^T X_i (U_i - u)^r / r! + offset_i), Y_i) K_h(U_i - u)
/// over (a_0, ..., a_p) by damped Newton. Internally the polynomial terms use
/// (U_i - u) / h so the local information matrix stays well scaled.
class LocalSmoother {
 public:
  LocalSmoother(const FamilySpec& family, const Dataset& data, SmoothingParams smoothing,
                LocalFitOptions options = {})
      : family_(family), data_(&data), smoothing_(smoothing), options_(options) {
    smoothing_.validate(family_);
    order_.resize(static_cast<std::size_t>(data.n()));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return data.u[a] < data.u[b]; });
    sorted_u_.resize(order_.size());
    for (std::size_t k = 0; k < order_.size(); ++k) sorted_u_[k] = data.u[order_[k]];
  }

  const FamilySpec& family() const { return family_; }
  const Dataset& data() const { return *data_; }
  const SmoothingParams& smoothing() const { return smoothing_; }
  const LocalFitOptions& options() const { return options_; }
  int dim() const { return (smoothing_.degree + 1) * static_cast<int>(data_->q()); }
  double u_min() const { return sorted_u_.front(); }
  double u_max() const { return sorted_u_.back(); }
  const std::vector<Eigen::Index>& order() const { return order_; }

  /// Fits the local model at u. A warm start is Taylor-shifted from its own
  /// location to u. With one_step a single damped Newton step is taken from
  /// the warm start.
  LocalFit fit(const Eigen::VectorXd& offset, double u, const LocalFit* warm = nullptr,
               bool one_step = false) const {
    const Window win = window(u);
    Eigen::VectorXd c = (warm && compatible(*warm)) ? scaled_from(*warm, u) : cold_start(win, offset);
    const bool single = one_step && warm && compatible(*warm);

    Eigen::VectorXd off = gather(offset, win);
    Eigen::VectorXd y = gather(data_->y, win);
    Eigen::VectorXd m = win.design * c + off;
    double obj = objective(win, m, y);

    LocalFit out;
    out.u = u;
    int iters = 0;
    for (;;) {
      Eigen::VectorXd q1(win.size()), nq2(win.size());
      for (Eigen::Index k = 0; k < win.size(); ++k) {
        q1[k] = win.w[k] * family_.q1(m[k], y[k]);
        nq2[k] = -win.w[k] * family_.q2(m[k], y[k]);
      }
      const Eigen::VectorXd g = win.design.transpose() * q1;
      out.gradient_norm = g.lpNorm<Eigen::Infinity>();
      if (out.gradient_norm < options_.tol) {
        out.converged = true;
        break;
      }
      if (iters >= options_.max_iters || (single && iters >= 1)) break;
      const Eigen::MatrixXd info = win.design.transpose() * nq2.asDiagonal() * win.design;
      const Eigen::VectorXd step = detail::regularized_solve(info, g, "local fit");
      double t = 1.0;
      bool accepted = false;
      Eigen::VectorXd cand, mc;
      double cand_obj = 0.0;
      for (int k = 0; k <= options_.max_halvings; ++k) {
        cand = c + t * step;
        mc = win.design * cand + off;
        cand_obj = objective(win, mc, y);
        if (std::isfinite(cand_obj) && cand_obj >= obj - 1e-12 * (1.0 + std::abs(obj))) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      c = std::move(cand);
      m = std::move(mc);
      obj = cand_obj;
      ++iters;
    }
    out.newton_iters = iters;
    unpack(c, out);
    return out;
  }

  /// d alpha(u) / d beta (p x q) as the implicit derivative of the converged
  /// local fit: -[first q rows of I_aa^{-1} I_az]^T.
  Eigen::MatrixXd alpha_prime(const Eigen::VectorXd& offset, const LocalFit& fit) const {
    const auto p = data_->p();
    const auto q = data_->q();
    if (p == 0) return Eigen::MatrixXd::Zero(0, q);
    const Window win = window(fit.u);
    const Eigen::VectorXd c = scaled_from(fit, fit.u);
    const Eigen::VectorXd m = win.design * c + gather(offset, win);
    Eigen::VectorXd nq2(win.size());
    Eigen::MatrixXd zw(win.size(), p);
    for (Eigen::Index k = 0; k < win.size(); ++k) {
      const auto i = win.idx[static_cast<std::size_t>(k)];
      nq2[k] = -win.w[k] * family_.q2(m[k], data_->y[i]);
      zw.row(k) = data_->z.row(i);
    }
    const Eigen::MatrixXd info = win.design.transpose() * nq2.asDiagonal() * win.design;
    const Eigen::MatrixXd cross = win.design.transpose() * nq2.asDiagonal() * zw;
    const Eigen::MatrixXd dc = detail::regularized_solve(info, cross, "alpha derivative");
    return -dc.topRows(q).transpose();
  }

  /// -[sum q2_i Z_i X_i^T K_h(U_i - u)] [sum q2_i X_i X_i^T K_h(U_i - u)]^{-1}
  /// with q2_i evaluated at the fitted predictor m_hat_i.
  Eigen::MatrixXd alpha_prime_plugin(const Eigen::VectorXd& m_hat, double u) const {
    const auto p = data_->p();
    const auto q = data_->q();
    if (p == 0) return Eigen::MatrixXd::Zero(0, q);
    const Window win = window(u);
    Eigen::MatrixXd zx = Eigen::MatrixXd::Zero(p, q);
    Eigen::MatrixXd xx = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index k = 0; k < win.size(); ++k) {
      const auto i = win.idx[static_cast<std::size_t>(k)];
      const double a = -win.w[k] * family_.q2(m_hat[i], data_->y[i]);
      const Eigen::VectorXd xi = data_->x.row(i).transpose();
      zx.noalias() += a * data_->z.row(i).transpose() * xi.transpose();
      xx.noalias() += a * xi * xi.transpose();
    }
    return -detail::regularized_solve(xx, zx.transpose(), "alpha derivative").transpose();
  }

  /// Local fits at every U_i, visited in increasing U and warm-started from the
  /// previous point unless per-observation warm starts are supplied.
  ObservationFits fit_observations(const Eigen::VectorXd& offset, const std::vector<LocalFit>* warm = nullptr,
                                   bool one_step = false) const {
    const auto n = data_->n();
    ObservationFits out;
    out.alpha.resize(n, data_->q());
    out.m_hat.resize(n);
    out.fits.resize(static_cast<std::size_t>(n));
    const LocalFit* prev = nullptr;
    for (const auto i : order_) {
      const auto si = static_cast<std::size_t>(i);
      const LocalFit* start = (warm && si < warm->size()) ? &(*warm)[si] : prev;
      out.fits[si] = fit(offset, data_->u[i], start, one_step);
      prev = &out.fits[si];
      out.alpha.row(i) = out.fits[si].a0.transpose();
      out.m_hat[i] = data_->x.row(i).dot(out.fits[si].a0) + offset[i];
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> alpha_prime_at_observations(const Eigen::VectorXd& offset,
                                                           const ObservationFits& fits,
                                                           AlphaPrimeRule rule = AlphaPrimeRule::exact) const {
    std::vector<Eigen::MatrixXd> out(fits.fits.size());
    for (std::size_t i = 0; i < fits.fits.size(); ++i)
      out[i] = rule == AlphaPrimeRule::exact ? alpha_prime(offset, fits.fits[i])
                                             : alpha_prime_plugin(fits.m_hat, fits.fits[i].u);
    return out;
  }

  CurveEstimate fit_curve(const Eigen::VectorXd& offset, const Eigen::VectorXd& grid, bool one_step = false,
                          bool with_dbeta = false) const {
    for (Eigen::Index k = 1; k < grid.size(); ++k)
      if (!(grid[k] > grid[k - 1])) throw ParameterError("curve grid must be strictly increasing");
    CurveEstimate out;
    out.grid = grid;
    out.values.resize(grid.size(), data_->q());
    std::optional<LocalFit> prev;
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      LocalFit f = fit(offset, grid[k], prev ? &*prev : nullptr, one_step);
      out.values.row(k) = f.a0.transpose();
      if (with_dbeta) out.dbeta.push_back(alpha_prime(offset, f));
      prev = std::move(f);
    }
    return out;
  }

  /// Local likelihood at u for stacked coefficients
  /// (a_0, ..., a_p), each block of length q.
  double local_likelihood(const Eigen::VectorXd& offset, double u, const Eigen::VectorXd& coef) const {
    const Window win = window(u);
    Eigen::VectorXd c = coef;
    const auto q = data_->q();
    for (int r = 1; r <= smoothing_.degree; ++r) c.segment(r * q, q) *= std::pow(smoothing_.h, r);
    const Eigen::VectorXd m = win.design * c + gather(offset, win);
    return objective(win, m, gather(data_->y, win));
  }

  /// Gradient of local_likelihood with respect to the stacked coefficients.
  Eigen::VectorXd local_score(const Eigen::VectorXd& offset, double u, const Eigen::VectorXd& coef) const {
    const Window win = window(u);
    Eigen::VectorXd c = coef;
    const auto q = data_->q();
    for (int r = 1; r <= smoothing_.degree; ++r) c.segment(r * q, q) *= std::pow(smoothing_.h, r);
    const Eigen::VectorXd m = win.design * c + gather(offset, win);
    Eigen::VectorXd q1(win.size());
    for (Eigen::Index k = 0; k < win.size(); ++k)
      q1[k] = win.w[k] * family_.q1(m[k], data_->y[win.idx[static_cast<std::size_t>(k)]]);
    Eigen::VectorXd g = win.design.transpose() * q1;
    for (int r = 1; r <= smoothing_.degree; ++r) g.segment(r * q, q) /= std::pow(smoothing_.h, r);
    return g;
  }

  static Eigen::VectorXd stack(const LocalFit& f) {
    const auto q = f.a0.size();
    Eigen::VectorXd c((f.higher.rows() + 1) * q);
    c.head(q) = f.a0;
    for (Eigen::Index r = 0; r < f.higher.rows(); ++r) c.segment((r + 1) * q, q) = f.higher.row(r).transpose();
    return c;
  }

 private:
  struct Window {
    std::vector<Eigen::Index> idx;
    Eigen::VectorXd w;
    Eigen::MatrixXd design;
    Eigen::Index size() const { return static_cast<Eigen::Index>(idx.size()); }
  };

  Window window(double u) const {
    const double h = smoothing_.h;
    const double reach = h * smoothing_.kernel.support_radius;
    auto lo = std::upper_bound(sorted_u_.begin(), sorted_u_.end(), u - reach);
    auto hi = std::lower_bound(sorted_u_.begin(), sorted_u_.end(), u + reach);
    Window win;
    std::vector<double> weights;
    for (auto it = lo; it < hi; ++it) {
      const double w = kernel_weight(smoothing_.kernel, *it - u, h);
      if (w > 0.0) {
        win.idx.push_back(order_[static_cast<std::size_t>(it - sorted_u_.begin())]);
        weights.push_back(w);
      }
    }
    const auto q = data_->q();
    const int deg = smoothing_.degree;
    if (static_cast<Eigen::Index>(win.idx.size()) < (deg + 1) * q)
      throw EffectiveSampleError("only " + std::to_string(win.idx.size()) +
                                 " observations with positive kernel weight at u = " + std::to_string(u) +
                                 " (need " + std::to_string((deg + 1) * q) + ")");
    win.w = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    win.design.resize(win.size(), (deg + 1) * q);
    for (Eigen::Index k = 0; k < win.size(); ++k) {
      const auto i = win.idx[static_cast<std::size_t>(k)];
      const double s = (data_->u[i] - u) / h;
      double pw = 1.0;
      for (int r = 0; r <= deg; ++r) {
        win.design.row(k).segment(r * q, q) = data_->x.row(i) * (pw / detail::factorial(r));
        pw *= s;
      }
    }
    return win;
  }

  static Eigen::VectorXd gather(const Eigen::VectorXd& v, const Window& win) {
    Eigen::VectorXd out(win.size());
    for (Eigen::Index k = 0; k < win.size(); ++k) out[k] = v[win.idx[static_cast<std::size_t>(k)]];
    return out;
  }

  double objective(const Window& win, const Eigen::VectorXd& m, const Eigen::VectorXd& y) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < win.size(); ++k) s += win.w[k] * family_.quasi_loglik(m[k], y[k]);
    return s;
  }

  bool compatible(const LocalFit& f) const {
    return f.a0.size() == data_->q() && f.higher.rows() == smoothing_.degree && f.a0.allFinite();
  }

  // Transformed-response local weighted least squares.
  Eigen::VectorXd cold_start(const Window& win, const Eigen::VectorXd& offset) const {
    Eigen::VectorXd target(win.size());
    for (Eigen::Index k = 0; k < win.size(); ++k) {
      const auto i = win.idx[static_cast<std::size_t>(k)];
      target[k] = family_.transform_response(data_->y[i], smoothing_.delta) - offset[i];
    }
    const Eigen::MatrixXd gram = win.design.transpose() * win.w.asDiagonal() * win.design;
    const Eigen::VectorXd rhs = win.design.transpose() * (win.w.array() * target.array()).matrix();
    return detail::regularized_solve(gram, rhs, "local starting value");
  }

  // Taylor-shifts the derivative coefficients of f to u and rescales by h^r.
  Eigen::VectorXd scaled_from(const LocalFit& f, double u) const {
    const auto q = data_->q();
    const int deg = smoothing_.degree;
    const double delta = u - f.u;
    Eigen::VectorXd c(dim());
    for (int r = 0; r <= deg; ++r) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(q);
      for (int s = r; s <= deg; ++s) {
        const Eigen::VectorXd as = s == 0 ? f.a0 : Eigen::VectorXd(f.higher.row(s - 1).transpose());
        a += as * (std::pow(delta, s - r) / detail::factorial(s - r));
      }
      c.segment(r * q, q) = a * std::pow(smoothing_.h, r);
    }
    return c;
  }

  void unpack(const Eigen::VectorXd& c, LocalFit& out) const {
    const auto q = data_->q();
    const int deg = smoothing_.degree;
    out.a0 = c.head(q);
    out.higher.resize(deg, q);
    for (int r = 1; r <= deg; ++r) out.higher.row(r - 1) = c.segment(r * q, q).transpose() / std::pow(smoothing_.h, r);
  }

  FamilySpec family_;
  const Dataset* data_;
  SmoothingParams smoothing_;
  LocalFitOptions options_;
  std::vector<Eigen::Index> order_;
  std::vector<double> sorted_u_;
};

inline Eigen::VectorXd offset_for(const Dataset& data, const Eigen::VectorXd& beta) {
  if (beta.size() != data.p()) throw DataError("beta length does not match the number of parametric covariates");
  if (data.p() == 0) return Eigen::VectorXd::Zero(data.n());
  return data.z * beta;
}

inline LocalFit fit_local(const FamilySpec& family, const Dataset& data, const Eigen::VectorXd& beta, double u,
                          const SmoothingParams& smoothing, const LocalFit* warm_start = nullptr,
                          const LocalFitOptions& options = {}) {
  const LocalSmoother smoother(family, data, smoothing, options);
  return smoother.fit(offset_for(data, beta), u, warm_start);
}

/// d alpha_beta(u) / d beta (p x q). With the plugin rule `m_hat` must hold
/// the fitted predictors at every observation.
inline Eigen::MatrixXd estimate_alpha_prime(const FamilySpec& family, const Dataset& data,
                                            const Eigen::VectorXd& beta, double u,
                                            const SmoothingParams& smoothing,
                                            AlphaPrimeRule rule = AlphaPrimeRule::exact,
                                            const Eigen::VectorXd* m_hat = nullptr) {
  const LocalSmoother smoother(family, data, smoothing);
  const Eigen::VectorXd offset = offset_for(data, beta);
  if (rule == AlphaPrimeRule::plugin) {
    if (m_hat) return smoother.alpha_prime_plugin(*m_hat, u);
    return smoother.alpha_prime_plugin(smoother.fit_observations(offset).m_hat, u);
  }
  return smoother.alpha_prime(offset, smoother.fit(offset, u));
}

inline CurveEstimate fit_curve(const FamilySpec& family, const Dataset& data, const Eigen::VectorXd& beta,
                               const SmoothingParams& smoothing, const Eigen::VectorXd& grid,
                               bool one_step = false, bool with_dbeta = false) {
  const LocalSmoother smoother(family, data, smoothing);
  return smoother.fit_curve(offset_for(data, beta), grid, one_step, with_dbeta);
}

/// The default 200-point display grid spanning the observed U range.
inline Eigen::VectorXd default_grid(const Dataset& data, int points = 200) {
  return uniform_grid(data.u.minCoeff(), data.u.maxCoeff(), points);
}

}  // namespace gvcplm

#endif  // GVCPLM_LOCAL_FIT_HPP
