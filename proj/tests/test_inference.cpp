#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gvcplm/gvcplm.hpp"
#include "support.hpp"

using namespace gvcplm;

namespace {

// Regularised upper incomplete gamma Q(a, x): power series for x < a + 1,
// modified Lentz continued fraction otherwise.
double upper_gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  const double log_pref = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a, sum = term;
    for (int k = 1; k < 10000; ++k) {
      term *= x / (a + k);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return 1.0 - std::exp(log_pref) * sum;
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int k = 1; k < 10000; ++k) {
    const double an = -k * (k - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(log_pref) * h;
}

SmoothingParams bandwidth(double h, double delta = 0.1) {
  SmoothingParams s;
  s.h = h;
  s.delta = delta;
  return s;
}

FitConfig tight(const SmoothingParams& s) {
  FitConfig cfg;
  cfg.smoothing = s;
  cfg.max_steps = 200;
  cfg.step_tol = 1e-11;
  return cfg;
}

}  // namespace

TEST(Chi2, Examples) {
  EXPECT_DOUBLE_EQ(chi2_upper_tail(0.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(chi2_upper_tail(-3.0, 2), 1.0);
  EXPECT_NEAR(chi2_upper_tail(3.841458820694124, 1), 0.05, 1e-10);
  EXPECT_NEAR(chi2_upper_tail(14.47, 1), 0.0001, 0.00005);
  EXPECT_THROW(chi2_upper_tail(1.0, 0), ParameterError);
}

TEST(Chi2, MatchesSeriesAndContinuedFractionOracle) {
  for (int df : {1, 2, 3, 5, 7, 10, 13, 30})
    for (double x : {0.01, 0.3, 1.0, 2.5, 5.0, 7.8, 12.0, 20.0, 40.0, 80.0})
      EXPECT_NEAR(chi2_upper_tail(x, df), upper_gamma_q(0.5 * df, 0.5 * x), 1e-10) << "df=" << df << " x=" << x;
}

TEST(Constraint, SingleUnitRowUnchanged) {
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, 10);
  row(0, 6) = 1.0;
  const ConstraintSpec c = make_constraint(row);
  EXPECT_LT((c.a - row).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(c.b.rows(), 9);
}

TEST(Constraint, CoordinateRowsAndComplement) {
  const ConstraintSpec c = coordinate_constraint({6, 7}, 13);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 13);
  expected(0, 6) = expected(1, 7) = 1.0;
  EXPECT_LT((c.a - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((c.a * c.b.transpose()).norm(), 1e-12);
  EXPECT_LT((c.b * c.b.transpose() - Eigen::MatrixXd::Identity(11, 11)).norm(), 1e-12);
}

TEST(Constraint, GeneralRowsOrthonormalised) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd rows(3, 7);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 7; ++j) rows(i, j) = nd(rng);
  const ConstraintSpec c = make_constraint(rows);
  EXPECT_LT((c.a * c.a.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-10);
  EXPECT_LT((c.a * c.b.transpose()).norm(), 1e-10);
  // Same rowspace: projecting the user rows onto span(A) leaves them intact.
  EXPECT_LT((rows - rows * c.a.transpose() * c.a).norm(), 1e-10);
}

TEST(Constraint, DependentRowsRejected) {
  Eigen::MatrixXd rows(2, 4);
  rows << 1, 2, 0, 0, 2, 4, 0, 0;
  EXPECT_THROW(make_constraint(rows), RankError);
  EXPECT_THROW(make_constraint(Eigen::MatrixXd::Zero(1, 4)), RankError);
  EXPECT_THROW(make_constraint(Eigen::MatrixXd::Identity(5, 4)), RankError);
  EXPECT_THROW(coordinate_constraint({4}, 4), ParameterError);
}

// With a flat curve and no X, the profile fit is OLS with an intercept and the
// sandwich is the HC0 estimator up to the slight curvature of the kernel
// weights at h=100. A single draw of HC0 scatters by roughly 15%
// around the classical variance at this n, so the 10% band is checked on the
// average over replicates.
TEST(Sandwich, MatchesClassicalOlsCovariance) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  const int n = 500, p = 3, reps = 20;
  const double sigma = 0.7;
  SmoothingParams s = bandwidth(100.0);
  s.degree = 0;
  const FamilySpec fam(FamilyName::gaussian_identity);
  FitConfig cfg;
  cfg.smoothing = s;
  Eigen::VectorXd ratio = Eigen::VectorXd::Zero(p);
  for (int rep = 0; rep < reps; ++rep) {
    Dataset d;
    d.u = Eigen::VectorXd::LinSpaced(n, 0, 1);
    d.x = Eigen::MatrixXd::Ones(n, 1);
    d.z.resize(n, p);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < p; ++k) d.z(i, k) = nd(rng) + 0.3 * k;
      d.y[i] = 2.0 + d.z(i, 0) - 0.5 * d.z(i, 2) + sigma * nd(rng);
    }
    const FitResult f = fit(fam, d, cfg);
    const SandwichCov cov = sandwich_covariance(fam, d, f, s);
    const Eigen::MatrixXd zc = d.z.rowwise() - d.z.colwise().mean();
    const Eigen::MatrixXd inv = (zc.transpose() * zc).inverse();
    const Eigen::VectorXd res = d.y - f.at_observations.m_hat;
    const Eigen::MatrixXd hc0 = inv * zc.transpose() * res.cwiseAbs2().asDiagonal() * zc * inv;
    EXPECT_LT((cov.sigma - hc0).cwiseAbs().maxCoeff(), 1e-5 * hc0.cwiseAbs().maxCoeff()) << rep;
    ratio += (cov.sigma.diagonal().array() / (sigma * sigma * inv.diagonal().array())).matrix() / reps;
  }
  for (int k = 0; k < p; ++k) EXPECT_NEAR(ratio[k], 1.0, 0.1) << k;
}

TEST(Sandwich, Invariants) {
  const FamilySpec fam(FamilyName::poisson_log);
  const SimDesign design = SimDesign::poisson(400, 12);
  const Dataset d = generate(design);
  FitConfig cfg;
  cfg.smoothing = design_smoothing(design.family, design.n);
  const FitResult f = fit(fam, d, cfg);
  const SandwichCov cov = sandwich_covariance(fam, d, f, cfg.smoothing);
  EXPECT_LT((cov.sigma - cov.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GE(cov.sigma.diagonal().minCoeff(), 0.0);
  EXPECT_LT((cov.bread - cov.bread.transpose()).cwiseAbs().maxCoeff(), 1e-8 * cov.bread.cwiseAbs().maxCoeff());
  EXPECT_LT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov.bread).eigenvalues().maxCoeff(), 0.0);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov.meat).eigenvalues().minCoeff(),
            -1e-10 * cov.meat.norm());
  EXPECT_LT((cov.scaled() - static_cast<double>(d.n()) * cov.sigma).norm(), 1e-12 * cov.scaled().norm());
  const Eigen::VectorXd se = cov.standard_errors();
  for (Eigen::Index k = 0; k < se.size(); ++k) EXPECT_NEAR(se[k] * se[k], cov.sigma(k, k), 1e-18);
}

TEST(Sandwich, DuplicatedDataHalvesCovariance) {
  const FamilySpec fam(FamilyName::poisson_log);
  const SimDesign design = SimDesign::poisson(200, 44);
  const Dataset d = generate(design);
  std::vector<Eigen::Index> twice;
  for (Eigen::Index i = 0; i < d.n(); ++i) twice.insert(twice.end(), {i, i});
  const Dataset dd = d.rows(twice);
  FitConfig cfg;
  cfg.smoothing = design_smoothing(design.family, design.n);
  const FitResult f = fit(fam, d, cfg);
  const FitResult ff = fit(fam, dd, cfg, f.beta);
  const SandwichCov a = sandwich_covariance(fam, d, f, cfg.smoothing);
  const SandwichCov b = sandwich_covariance(fam, dd, ff, cfg.smoothing);
  for (Eigen::Index k = 0; k < a.sigma.rows(); ++k)
    for (Eigen::Index j = 0; j < a.sigma.cols(); ++j)
      if (std::abs(a.sigma(k, j)) > 1e-3 * a.sigma.diagonal().maxCoeff())
        EXPECT_NEAR(b.sigma(k, j) / a.sigma(k, j), 0.5, 0.075) << k << "," << j;
}

TEST(Sandwich, SingularBreadReported) {
  const FamilySpec fam(FamilyName::gaussian_identity);
  Dataset d = testsupport::gaussian_instance(3, 100, 3);
  d.z.col(2) = d.z.col(1);
  FitConfig cfg;
  cfg.smoothing = bandwidth(0.3);
  FitResult f;
  f.beta = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(sandwich_covariance(fam, d, f, cfg.smoothing), ConditioningError);
}

TEST(Glrt, ExactNullGivesZeroStatistic) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  const int n = 150;
  Dataset d;
  d.u.resize(n);
  d.y.resize(n);
  d.x.resize(n, 2);
  d.z.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    d.u[i] = ud(rng);
    d.x(i, 0) = 1.0;
    d.x(i, 1) = nd(rng);
    for (int k = 0; k < 4; ++k) d.z(i, k) = nd(rng);
    d.y[i] = (1.0 + 2.0 * d.u[i]) + (0.5 - d.u[i]) * d.x(i, 1) + 1.5 * d.z(i, 0) - d.z(i, 1);
  }
  const FamilySpec fam(FamilyName::gaussian_identity);
  const GlrtResult g = glrt(fam, d, coordinate_constraint({2, 3}, 4), tight(bandwidth(0.3)));
  EXPECT_LT(g.t_n, 1e-8);
  EXPECT_GT(g.p_value, 0.999);
  EXPECT_EQ(g.df, 2);
  EXPECT_NEAR(g.beta_null[2], 0.0, 1e-12);
  EXPECT_NEAR(g.beta_null[3], 0.0, 1e-12);
}

TEST(Glrt, RowspaceInvariance) {
  const FamilySpec fam(FamilyName::poisson_log);
  const SimDesign design = SimDesign::poisson(200, 606);
  const Dataset d = generate(design);
  const FitConfig cfg = tight(design_smoothing(design.family, design.n));
  const FitResult alt = fit(fam, d, cfg);
  const GlrtResult base = glrt(fam, d, coordinate_constraint({0, 1}, d.p()), cfg, alt);
  Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(2, d.p());
  mixed(0, 0) = mixed(0, 1) = 1.0 / std::sqrt(2.0);
  mixed(1, 0) = 1.0 / std::sqrt(2.0);
  mixed(1, 1) = -1.0 / std::sqrt(2.0);
  const GlrtResult rot = glrt(fam, d, make_constraint(mixed), cfg, alt);
  EXPECT_NEAR(base.t_n, rot.t_n, 1e-6);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  const ConstraintSpec tail = coordinate_constraint({6, 7, 8}, d.p());
  const GlrtResult ref = glrt(fam, d, tail, cfg, alt);
  for (int rep = 0; rep < 3; ++rep) {
    Eigen::MatrixXd m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = nd(rng);
    const Eigen::MatrixXd orth = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    const GlrtResult g = glrt(fam, d, make_constraint(orth * tail.a), cfg, alt);
    EXPECT_NEAR(g.t_n, ref.t_n, 1e-6);
    EXPECT_NEAR(g.p_value, ref.p_value, 1e-6);
  }
}

TEST(Glrt, ConstrainedNeverExceedsUnconstrained) {
  const FamilySpec fam(FamilyName::bernoulli_logit);
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    const SimDesign design = SimDesign::bernoulli(200, 900 + rep);
    const Dataset d = generate(design);
    FitConfig cfg;
    cfg.smoothing = design_smoothing(design.family, design.n);
    const GlrtResult g = glrt(fam, d, coordinate_constraint({6, 7, 8, 9}, d.p()), cfg);
    EXPECT_GE(g.t_n, 0.0);
    EXPECT_LE(g.loglik_null, g.loglik_alt + 1e-6);
    EXPECT_GE(g.p_value, 0.0);
    EXPECT_LE(g.p_value, 1.0);
    EXPECT_FALSE(g.signed_root.has_value());
  }
}

TEST(Glrt, SingleRowReportsSignedRoot) {
  const FamilySpec fam(FamilyName::poisson_log);
  const SimDesign design = SimDesign::poisson(200, 5150);
  const Dataset d = generate(design);
  FitConfig cfg;
  cfg.smoothing = design_smoothing(design.family, design.n);
  const GlrtResult g = glrt(fam, d, coordinate_constraint({2}, d.p()), cfg);
  ASSERT_TRUE(g.signed_root.has_value());
  EXPECT_LT(*g.signed_root, 0.0);  // beta_3 = -0.5
  EXPECT_NEAR(*g.signed_root * *g.signed_root, g.t_n, 1e-9 * (1 + g.t_n));
  EXPECT_NEAR(*g.p_lower + *g.p_upper, 1.0, 1e-15);
  EXPECT_LT(g.p_value, 1e-6);
}

TEST(Glrt, WidthMismatchRejected) {
  const FamilySpec fam(FamilyName::poisson_log);
  const Dataset d = generate(SimDesign::poisson(200, 1));
  FitConfig cfg;
  cfg.smoothing = design_smoothing(FamilyName::poisson_log, 200);
  EXPECT_THROW(glrt(fam, d, coordinate_constraint({0}, 3), cfg), ParameterError);
}
