#ifndef GVCPLM_CV_HPP
#define GVCPLM_CV_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gvcplm/dataset.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"
#include "gvcplm/profile.hpp"

namespace gvcplm {

struct CvCell {
  double delta = 0.0;
  double h = 0.0;
  double score = 0.0;
  bool failed = false;
  std::string failure;
};

struct CvReport {
  std::vector<CvCell> cells;
  SmoothingParams best;
  std::uint64_t fold_assignment_seed = 0;
  int folds = 0;
};

/// Fold label for every observation: a seeded random permutation dealt
/// round-robin, so fold sizes differ by at most one.
inline std::vector<int> assign_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> label(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < perm.size(); ++k) label[static_cast<std::size_t>(perm[k])] = static_cast<int>(k % folds);
  return label;
}

/// Ten log-spaced bandwidths over [0.5, 2] x n^{-1/5} range(U).
inline std::vector<double> default_h_grid(const Dataset& data) {
  const double range = data.u.maxCoeff() - data.u.minCoeff();
  const double base = std::pow(static_cast<double>(data.n()), -0.2) * range;
  std::vector<double> grid;
  for (int k = 0; k < 10; ++k) grid.push_back(base * 0.5 * std::pow(4.0, k / 9.0));
  return grid;
}

inline std::vector<double> default_delta_grid(const FamilySpec& family) {
  if (family.is_gaussian()) return {1.0};
  return {0.005, 0.01, 0.05, 0.1, 0.2};
}

/// Held-out quasi-likelihood of a training fit: alpha at each held-out U is
/// a local fit on the training data only.
inline double held_out_score(const FamilySpec& family, const Dataset& train, const Dataset& test,
                             const FitResult& trained, const FitConfig& config) {
  const LocalSmoother smoother(family, train, config.smoothing, config.local);
  const Eigen::VectorXd offset = offset_for(train, trained.beta);
  double score = 0.0;
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    const LocalFit f = smoother.fit(offset, test.u[i]);
    const double m = test.x.row(i).dot(f.a0) + (test.p() > 0 ? test.z.row(i).dot(trained.beta) : 0.0);
    score += family.quasi_loglik(m, test.y[i]);
  }
  return score;
}

/// K-fold cross-validation over (delta, h). Each cell trains the DBE-started
/// accelerated fit (config.max_steps steps) on K-1 folds and sums the held-out
/// quasi-likelihood. Ties go to the larger h, then the larger delta.
inline CvReport cross_validate(const FamilySpec& family, const Dataset& data,
                               const std::vector<std::pair<double, double>>& grid, int folds,
                               const FitConfig& config, std::uint64_t seed) {
  if (folds < 2) throw ParameterError("cross-validation needs at least 2 folds");
  if (grid.empty()) throw ParameterError("cross-validation grid is empty");
  if (folds > data.n()) throw ParameterError("more folds than observations");
  data.validate();
  family.check_responses(data.y);

  const std::vector<int> label = assign_folds(data.n(), folds, seed);
  std::vector<Dataset> train(static_cast<std::size_t>(folds)), test(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < data.n(); ++i) (label[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
    train[static_cast<std::size_t>(f)] = data.rows(tr);
    test[static_cast<std::size_t>(f)] = data.rows(te);
  }

  CvReport report;
  report.fold_assignment_seed = seed;
  report.folds = folds;
  for (const auto& [delta, h] : grid) {
    CvCell cell;
    cell.delta = delta;
    cell.h = h;
    FitConfig cfg = config;
    cfg.smoothing.delta = delta;
    cfg.smoothing.h = h;
    try {
      cfg.validate(family);
      for (int f = 0; f < folds; ++f) {
        const auto fi = static_cast<std::size_t>(f);
        const FitResult trained = fit(family, train[fi], cfg);
        cell.score += held_out_score(family, train[fi], test[fi], trained, cfg);
      }
      if (!std::isfinite(cell.score)) throw NumericalError("non-finite held-out score");
    } catch (const Error& e) {
      cell.failed = true;
      cell.failure = e.what();
      cell.score = -std::numeric_limits<double>::infinity();
    }
    report.cells.push_back(cell);
  }

  const CvCell* best = nullptr;
  for (const auto& c : report.cells) {
    if (c.failed) continue;
    if (!best || c.score > best->score ||
        (c.score == best->score && (c.h > best->h || (c.h == best->h && c.delta > best->delta))))
      best = &c;
  }
  if (!best) throw NumericalError("every cross-validation cell failed");
  report.best = config.smoothing;
  report.best.delta = best->delta;
  report.best.h = best->h;
  return report;
}

inline std::vector<std::pair<double, double>> make_cv_grid(const std::vector<double>& deltas,
                                                           const std::vector<double>& hs) {
  std::vector<std::pair<double, double>> grid;
  for (double d : deltas)
    for (double h : hs) grid.emplace_back(d, h);
  return grid;
}

}  // namespace gvcplm

#endif  // GVCPLM_CV_HPP
