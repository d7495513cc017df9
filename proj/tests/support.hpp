#ifndef GVCPLM_TESTS_SUPPORT_HPP
#define GVCPLM_TESTS_SUPPORT_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gvcplm/gvcplm.hpp"

namespace testsupport {

using gvcplm::Dataset;

inline double epan(double t) { return std::abs(t) <= 1.0 ? 0.75 * (1.0 - t * t) : 0.0; }

/// Local-linear smoother matrix S: row i maps a response vector r to
/// X_i^T alpha_hat(U_i) from kernel-weighted least squares of r on
/// [X, X (U - U_i)].
inline Eigen::MatrixXd local_linear_smoother(const Dataset& d, double h) {
  const auto n = d.n();
  const auto q = d.q();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd design(n, 2 * q);
    Eigen::VectorXd w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double du = d.u[j] - d.u[i];
      design.row(j) << d.x.row(j), d.x.row(j) * du;
      w[j] = epan(du / h) / h;
    }
    const Eigen::MatrixXd xtw = design.transpose() * w.asDiagonal();
    const Eigen::MatrixXd coef_map = (xtw * design).ldlt().solve(xtw);
    s.row(i) = d.x.row(i) * coef_map.topRows(q);
  }
  return s;
}

/// Closed-form profiled least squares: argmin ||(I - S)(y - Z beta)||^2.
inline Eigen::VectorXd gaussian_profile_ls(const Dataset& d, double h) {
  const Eigen::MatrixXd s = local_linear_smoother(d, h);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d.n(), d.n()) - s;
  const Eigen::MatrixXd rz = r * d.z;
  return (rz.transpose() * rz).ldlt().solve(rz.transpose() * (r * d.y));
}

/// Random Gaussian varying-coefficient partially linear instance with
/// X = [1, x2], smooth alpha and unit noise scaled by `noise`.
inline Dataset gaussian_instance(std::uint64_t seed, int n, int p, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  Dataset d;
  d.y.resize(n);
  d.u.resize(n);
  d.x.resize(n, 2);
  d.z.resize(n, p);
  Eigen::VectorXd beta(p);
  for (int k = 0; k < p; ++k) beta[k] = 1.0 - 0.3 * k;
  for (int i = 0; i < n; ++i) {
    d.u[i] = ud(rng);
    d.x(i, 0) = 1.0;
    d.x(i, 1) = nd(rng);
    for (int k = 0; k < p; ++k) d.z(i, k) = nd(rng) + (k == 0 ? 0.5 * d.x(i, 1) : 0.0);
    const double a1 = std::sin(2.0 * M_PI * d.u[i]);
    const double a2 = 1.0 + d.u[i] * d.u[i];
    d.y[i] = a1 + a2 * d.x(i, 1) + d.z.row(i).dot(beta) + noise * nd(rng);
  }
  return d;
}

/// Small Poisson or Bernoulli instance with X = [1, x2] and p covariates.
inline Dataset glm_instance(gvcplm::FamilyName family, std::uint64_t seed, int n, int p) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  Dataset d;
  d.y.resize(n);
  d.u.resize(n);
  d.x.resize(n, 2);
  d.z.resize(n, p);
  for (int i = 0; i < n; ++i) {
    d.u[i] = ud(rng);
    d.x(i, 0) = 1.0;
    d.x(i, 1) = nd(rng);
    double eta = 0.0;
    for (int k = 0; k < p; ++k) {
      d.z(i, k) = nd(rng);
      eta += (k % 2 == 0 ? 0.4 : -0.3) * d.z(i, k);
    }
    if (family == gvcplm::FamilyName::poisson_log) {
      eta += 1.0 + 0.5 * std::sin(2.0 * M_PI * d.u[i]) + 0.3 * d.u[i] * d.x(i, 1);
      std::poisson_distribution<int> pd(std::exp(eta));
      d.y[i] = pd(rng);
    } else {
      eta += 0.5 * std::cos(2.0 * M_PI * d.u[i]) + 0.5 * d.x(i, 1);
      std::bernoulli_distribution bd(1.0 / (1.0 + std::exp(-eta)));
      d.y[i] = bd(rng) ? 1.0 : 0.0;
    }
  }
  return d;
}

}  // namespace testsupport

#endif  // GVCPLM_TESTS_SUPPORT_HPP
