#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "gvcplm/gvcplm.hpp"
#include "support.hpp"

using namespace gvcplm;

namespace {

FitConfig cv_config() {
  FitConfig cfg;
  cfg.max_steps = 3;
  return cfg;
}

}  // namespace

TEST(Cv, FoldsAreBalancedAndSeeded) {
  const auto a = assign_folds(103, 5, 42);
  const auto b = assign_folds(103, 5, 42);
  const auto c = assign_folds(103, 5, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::map<int, int> sizes;
  for (int f : a) ++sizes[f];
  ASSERT_EQ(sizes.size(), 5u);
  int lo = 1 << 30, hi = 0;
  for (const auto& [f, s] : sizes) lo = std::min(lo, s), hi = std::max(hi, s);
  EXPECT_LE(hi - lo, 1);
}

TEST(Cv, DefaultGrids) {
  const Dataset d = generate(SimDesign::poisson(200, 1));
  const auto hs = default_h_grid(d);
  ASSERT_EQ(hs.size(), 10u);
  const double base = std::pow(200.0, -0.2) * (d.u.maxCoeff() - d.u.minCoeff());
  EXPECT_NEAR(hs.front(), 0.5 * base, 1e-12);
  EXPECT_NEAR(hs.back(), 2.0 * base, 1e-12);
  for (std::size_t k = 1; k < hs.size(); ++k) EXPECT_NEAR(hs[k] / hs[k - 1], std::pow(4.0, 1.0 / 9.0), 1e-12);
  EXPECT_EQ(default_delta_grid(FamilySpec(FamilyName::poisson_log)),
            (std::vector<double>{0.005, 0.01, 0.05, 0.1, 0.2}));
}

TEST(Cv, SingleCellIsBest) {
  const FamilySpec fam(FamilyName::poisson_log);
  const Dataset d = generate(SimDesign::poisson(200, 2));
  const CvReport r = cross_validate(fam, d, {{0.1, 0.12}}, 5, cv_config(), 1);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_FALSE(r.cells[0].failed);
  EXPECT_DOUBLE_EQ(r.best.h, 0.12);
  EXPECT_DOUBLE_EQ(r.best.delta, 0.1);
}

TEST(Cv, Deterministic) {
  const FamilySpec fam(FamilyName::poisson_log);
  const Dataset d = generate(SimDesign::poisson(200, 3));
  const auto grid = make_cv_grid({0.05, 0.1}, {0.08, 0.12});
  const CvReport a = cross_validate(fam, d, grid, 5, cv_config(), 99);
  const CvReport b = cross_validate(fam, d, grid, 5, cv_config(), 99);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    EXPECT_EQ(a.cells[k].score, b.cells[k].score);
    EXPECT_EQ(a.cells[k].failed, b.cells[k].failed);
  }
  EXPECT_EQ(a.best.h, b.best.h);
  EXPECT_EQ(a.best.delta, b.best.delta);
  EXPECT_EQ(a.fold_assignment_seed, 99u);
  const auto& best = *std::max_element(a.cells.begin(), a.cells.end(),
                                       [](const CvCell& x, const CvCell& y) { return x.score < y.score; });
  EXPECT_EQ(a.best.h, best.h);
}

TEST(Cv, TiesGoToLargerBandwidthThenLargerDelta) {
  // A Gaussian fit ignores delta, so cells differing only in delta tie exactly.
  const FamilySpec fam(FamilyName::gaussian_identity);
  const Dataset d = testsupport::gaussian_instance(5, 120, 2);
  const CvReport r = cross_validate(fam, d, make_cv_grid({0.5, 1.0, 0.2}, {0.3}), 4, cv_config(), 3);
  EXPECT_EQ(r.cells[0].score, r.cells[1].score);
  EXPECT_DOUBLE_EQ(r.best.delta, 1.0);
  const CvReport same_h = cross_validate(fam, d, {{1.0, 0.3}, {1.0, 0.3}}, 4, cv_config(), 3);
  EXPECT_DOUBLE_EQ(same_h.best.h, 0.3);
}

TEST(Cv, FailedCellsExcluded) {
  const FamilySpec fam(FamilyName::poisson_log);
  const Dataset d = generate(SimDesign::poisson(200, 4));
  const CvReport r = cross_validate(fam, d, {{0.1, 1e-4}, {0.1, 0.1}}, 5, cv_config(), 1);
  EXPECT_TRUE(r.cells[0].failed);
  EXPECT_FALSE(r.cells[0].failure.empty());
  EXPECT_FALSE(r.cells[1].failed);
  EXPECT_DOUBLE_EQ(r.best.h, 0.1);
  EXPECT_THROW(cross_validate(fam, d, {{0.1, 1e-4}}, 5, cv_config(), 1), NumericalError);
  EXPECT_THROW(cross_validate(fam, d, {{0.1, 0.1}}, 1, cv_config(), 1), ParameterError);
  EXPECT_THROW(cross_validate(fam, d, {}, 5, cv_config(), 1), ParameterError);
}

// Corrupting held-out responses changes the held-out score but never the
// trained estimate.
TEST(Cv, HeldOutResponsesArePoisonProof) {
  const FamilySpec fam(FamilyName::poisson_log);
  const Dataset d = generate(SimDesign::poisson(200, 5));
  const auto label = assign_folds(d.n(), 5, 7);
  Dataset poisoned = d;
  for (Eigen::Index i = 0; i < d.n(); ++i)
    if (label[static_cast<std::size_t>(i)] == 0) poisoned.y[i] = d.y[i] * 3 + 50;
  std::vector<Eigen::Index> tr, te;
  for (Eigen::Index i = 0; i < d.n(); ++i) (label[static_cast<std::size_t>(i)] == 0 ? te : tr).push_back(i);
  FitConfig cfg = cv_config();
  cfg.smoothing = design_smoothing(FamilyName::poisson_log, 200);
  const FitResult clean = fit(fam, d.rows(tr), cfg);
  const FitResult dirty = fit(fam, poisoned.rows(tr), cfg);
  EXPECT_EQ(clean.beta, dirty.beta);
  const double s_clean = held_out_score(fam, d.rows(tr), d.rows(te), clean, cfg);
  const double s_dirty = held_out_score(fam, poisoned.rows(tr), poisoned.rows(te), dirty, cfg);
  EXPECT_NE(s_clean, s_dirty);

  const auto grid = make_cv_grid({0.1}, {0.1});
  const CvReport a = cross_validate(fam, d, grid, 5, cfg, 7);
  const CvReport b = cross_validate(fam, poisoned, grid, 5, cfg, 7);
  EXPECT_NE(a.cells[0].score, b.cells[0].score);
}

TEST(Cv, PoissonSelectsBandwidthNearDesignValue) {
  const FamilySpec fam(FamilyName::poisson_log);
  int near = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset d = generate(SimDesign::poisson(200, child_seed(1234, static_cast<std::uint64_t>(rep))));
    const auto grid = make_cv_grid({0.1}, {0.05, 0.07, 0.1, 0.14, 0.2, 0.28});
    const CvReport r = cross_validate(fam, d, grid, 5, cv_config(), 11);
    if (r.best.h >= 0.1 / 1.5 && r.best.h <= 0.1 * 1.5) ++near;
  }
  EXPECT_GE(near, 12) << near << " of " << reps;
}

TEST(Cv, BernoulliSelectsSmoothingNearDesignValue) {
  const FamilySpec fam(FamilyName::bernoulli_logit);
  int near_h = 0, near_delta = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset d = generate(SimDesign::bernoulli(400, child_seed(1234, static_cast<std::uint64_t>(rep))));
    const auto grid = make_cv_grid({0.005, 0.01, 0.05}, {0.2, 0.28, 0.4, 0.56, 0.8});
    const CvReport r = cross_validate(fam, d, grid, 5, cv_config(), 11);
    if (r.best.h >= 0.4 / 1.5 && r.best.h <= 0.4 * 1.5) ++near_h;
    if (r.best.delta >= 0.005 / 1.5 && r.best.delta <= 0.005 * 1.5) ++near_delta;
  }
  EXPECT_GE(near_h, 12) << near_h << " of " << reps;
  EXPECT_GE(near_delta, 12) << near_delta << " of " << reps;
}
