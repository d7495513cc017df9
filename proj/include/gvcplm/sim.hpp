#ifndef GVCPLM_SIM_HPP
#define GVCPLM_SIM_HPP

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gvcplm/cv.hpp"
#include "gvcplm/dataset.hpp"
#include "gvcplm/dbe.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"
#include "gvcplm/inference.hpp"
#include "gvcplm/profile.hpp"

namespace gvcplm {

// ---------------------------------------------------------------------------
// Designs and data generation

/// floor(1.8 n^{1/3}), the parametric dimension used by the simulation designs.
inline int parametric_dimension(int n) {
  return static_cast<int>(std::floor(1.8 * std::cbrt(static_cast<double>(n)) + 1e-12));
}

struct SimDesign {
  FamilyName family = FamilyName::poisson_log;
  int n = 200;
  int p_n = 10;
  Eigen::VectorXd beta0;
  double cov_rho = 0.5;
  std::function<double(double)> alpha1;
  std::function<double(double)> alpha2;
  std::uint64_t seed = 0;

  /// Covariance of (Z_1..Z_p, X_2): rho^{|i-j|}.
  Eigen::MatrixXd covariance() const {
    const int d = p_n + 1;
    Eigen::MatrixXd s(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s(i, j) = std::pow(cov_rho, std::abs(i - j));
    return s;
  }

  /// E Z Z^T, the GMSE weight matrix.
  Eigen::MatrixXd z_moment() const { return covariance().topLeftCorner(p_n, p_n); }

  std::vector<std::function<double(double)>> alphas() const { return {alpha1, alpha2}; }

  static SimDesign poisson(int n, std::uint64_t seed = 0) {
    SimDesign d;
    d.family = FamilyName::poisson_log;
    d.n = n;
    d.p_n = parametric_dimension(n);
    d.beta0 = padded({0.5, 0.3, -0.5, 1.0, 0.1, -0.25}, d.p_n);
    d.alpha1 = [](double u) { return 4.0 + std::sin(2.0 * std::numbers::pi * u); };
    d.alpha2 = [](double u) { return 2.0 * u * (1.0 - u); };
    d.seed = seed;
    return d;
  }

  static SimDesign bernoulli(int n, std::uint64_t seed = 0) {
    SimDesign d;
    d.family = FamilyName::bernoulli_logit;
    d.n = n;
    d.p_n = parametric_dimension(n);
    d.beta0 = padded({3.0, 1.0, -2.0, 0.5, 2.0, -2.0}, d.p_n);
    d.alpha1 = [](double u) { return 2.0 * (u * u * u + 2.0 * u * u - 2.0 * u); };
    d.alpha2 = [](double u) { return 2.0 * std::cos(2.0 * std::numbers::pi * u); };
    d.seed = seed;
    return d;
  }

  static SimDesign for_family(FamilyName f, int n, std::uint64_t seed = 0) {
    if (f == FamilyName::bernoulli_logit) return bernoulli(n, seed);
    if (f == FamilyName::poisson_log) return poisson(n, seed);
    throw ParameterError("simulation designs exist for the poisson and bernoulli families only");
  }

  static Eigen::VectorXd padded(std::initializer_list<double> head, int p) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    int k = 0;
    for (double v : head) {
      if (k >= p) break;
      b[k++] = v;
    }
    return b;
  }
};

/// Bandwidths and offsets picked by cross-validation for the designs (n = 200,
/// 400, 800, 1500); other n scale the n = 200 value by (n / 200)^{-1/5}.
inline SmoothingParams design_smoothing(FamilyName family, int n) {
  SmoothingParams s;
  const bool bern = family == FamilyName::bernoulli_logit;
  s.delta = bern ? 0.005 : 0.1;
  const std::vector<std::pair<int, double>> table =
      bern ? std::vector<std::pair<int, double>>{{200, 0.45}, {400, 0.4}, {800, 0.25}, {1500, 0.18}}
           : std::vector<std::pair<int, double>>{{200, 0.1}, {400, 0.08}, {800, 0.075}, {1500, 0.06}};
  s.h = table.front().second * std::pow(n / 200.0, -0.2);
  for (const auto& [size, h] : table)
    if (size == n) s.h = h;
  return s;
}

/// SplitMix64 finaliser; child seeds are splitmix(master + counter * golden).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t counter) {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * (counter + 1));
}

inline Dataset generate(const SimDesign& design) {
  if (design.n < 1 || design.p_n < 0) throw ParameterError("invalid simulation design");
  if (design.beta0.size() != design.p_n) throw ParameterError("beta0 length must equal p_n");
  std::mt19937_64 rng(design.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd chol = design.covariance().llt().matrixL();
  const int p = design.p_n;

  Dataset d;
  d.y.resize(design.n);
  d.u.resize(design.n);
  d.x.resize(design.n, 2);
  d.z.resize(design.n, p);
  d.x_names = {"intercept", "x2"};
  for (int j = 0; j < p; ++j) d.z_names.push_back("z" + std::to_string(j + 1));

  Eigen::VectorXd e(p + 1);
  for (int i = 0; i < design.n; ++i) {
    d.u[i] = unif(rng);
    for (int j = 0; j <= p; ++j) e[j] = normal(rng);
    const Eigen::VectorXd w = chol * e;
    d.z.row(i) = w.head(p).transpose();
    d.x(i, 0) = 1.0;
    d.x(i, 1) = w[p];
  }
  for (int i = 0; i < design.n; ++i) {
    const double eta = design.alpha1(d.u[i]) + design.alpha2(d.u[i]) * d.x(i, 1) +
                       (p > 0 ? d.z.row(i).dot(design.beta0) : 0.0);
    if (design.family == FamilyName::poisson_log) {
      std::poisson_distribution<long long> pois(std::exp(std::min(eta, FamilySpec::max_predictor)));
      d.y[i] = static_cast<double>(pois(rng));
    } else if (design.family == FamilyName::bernoulli_logit) {
      std::bernoulli_distribution bern(FamilySpec::logistic(eta));
      d.y[i] = bern(rng) ? 1.0 : 0.0;
    } else {
      d.y[i] = eta + normal(rng);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Metrics

/// (beta_hat - beta0)^T B (beta_hat - beta0).
inline double gmse(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta0, const Eigen::MatrixXd& z_moment) {
  if (beta_hat.size() != beta0.size() || z_moment.rows() != beta0.size() || z_moment.cols() != beta0.size())
    throw DataError("gmse dimension mismatch");
  const Eigen::VectorXd d = beta_hat - beta0;
  return d.dot(z_moment * d);
}

/// Root of the grid-average squared distance between fitted and true curves.
inline double rase(const CurveEstimate& curve, const std::vector<std::function<double(double)>>& alpha_true) {
  if (static_cast<Eigen::Index>(alpha_true.size()) != curve.values.cols() || curve.grid.size() != curve.values.rows())
    throw DataError("rase: curve and true functions do not match");
  double s = 0.0;
  for (Eigen::Index k = 0; k < curve.grid.size(); ++k)
    for (Eigen::Index j = 0; j < curve.values.cols(); ++j) {
      const double e = curve.values(k, j) - alpha_true[static_cast<std::size_t>(j)](curve.grid[k]);
      s += e * e;
    }
  return std::sqrt(s / static_cast<double>(curve.grid.size()));
}

/// Linear-interpolation sample quantile.
inline double quantile(std::vector<double> v, double prob) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct MetricSummary {
  double median = 0.0;
  double sd_mad = 0.0;  // IQR / 1.349
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

inline MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  s.count = v.size();
  if (v.empty()) return s;
  s.median = quantile(v, 0.5);
  s.sd_mad = (quantile(v, 0.75) - quantile(v, 0.25)) / 1.349;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

/// sup_x |F_n(x) - F(x)| for the chi-square(df) distribution.
inline double ks_distance_chi2(std::vector<double> sample, int df) {
  if (sample.empty()) return 1.0;
  std::sort(sample.begin(), sample.end());
  const boost::math::chi_squared dist(df);
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = boost::math::cdf(dist, std::max(0.0, sample[i]));
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

/// Gaussian-kernel density estimate with Silverman's bandwidth.
inline std::vector<double> kernel_density(const std::vector<double>& sample, const std::vector<double>& at) {
  const MetricSummary s = summarize(sample);
  const double iqr = s.sd_mad * 1.349;
  const double spread = std::min(s.sd, iqr / 1.34 > 0 ? iqr / 1.34 : s.sd);
  const double bw = 0.9 * spread * std::pow(static_cast<double>(sample.size()), -0.2);
  std::vector<double> out;
  for (double x : at) {
    double acc = 0.0;
    for (double v : sample) {
      const double z = (x - v) / bw;
      acc += std::exp(-0.5 * z * z);
    }
    out.push_back(acc / (static_cast<double>(sample.size()) * bw * std::sqrt(2.0 * std::numbers::pi)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replicate driver

/// Runs fn(rep) for rep in [0, reps) on `threads` workers. Results are kept
/// in replicate order; a replicate that throws a library error yields nullopt.
template <typename Fn>
auto run_replicates(int reps, int threads, Fn fn) -> std::vector<std::optional<std::invoke_result_t<Fn, int>>> {
  using R = std::invoke_result_t<Fn, int>;
  std::vector<std::optional<R>> out(static_cast<std::size_t>(std::max(reps, 0)));
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(reps, 1));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) {
      try {
        out[static_cast<std::size_t>(r)] = fn(r);
      } catch (const Error&) {
        out[static_cast<std::size_t>(r)] = std::nullopt;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Studies

enum class Study { table1, table2, table3, table4, fig1_null, fig1_power };

inline std::string to_string(Study s) {
  switch (s) {
    case Study::table1: return "table1";
    case Study::table2: return "table2";
    case Study::table3: return "table3";
    case Study::table4: return "table4";
    case Study::fig1_null: return "fig1_null";
    case Study::fig1_power: return "fig1_power";
  }
  return "table1";
}

inline Study study_from_string(std::string_view s) {
  for (Study st : {Study::table1, Study::table2, Study::table3, Study::table4, Study::fig1_null, Study::fig1_power})
    if (to_string(st) == s) return st;
  throw ParameterError("unknown study '" + std::string(s) + "'");
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct StudyConfig {
  Study study = Study::table2;
  FamilyName family = FamilyName::poisson_log;
  int n = 200;
  int reps = 50;
  std::uint64_t seed = 7;
  std::optional<SmoothingParams> smoothing;  // defaults to design_smoothing
  bool use_cv = false;                       // pick (delta, h) per replicate by 5-fold CV
  int threads = 0;
  int glrt_steps = 50;        // steps used for both GLRT fits
  int inference_steps = 1;    // steps for table3/table4 estimates
  bool record_timing = true;  // table1 wall times
  std::vector<double> gammas;
  double max_failure_fraction = 0.10;
};

struct StudyReport {
  std::string study;
  std::string family;
  int n = 0;
  int p_n = 0;
  int reps = 0;
  int failures = 0;
  std::uint64_t seed = 0;
  SmoothingParams smoothing;
  std::vector<std::pair<std::string, double>> summary;
  Table replicates;
  Table plot;

  double value(const std::string& key) const {
    for (const auto& [k, v] : summary)
      if (k == key) return v;
    throw ParameterError("study summary has no entry '" + key + "'");
  }
};

namespace detail {

inline FitConfig study_fit_config(const SmoothingParams& s, Algorithm a, int steps) {
  FitConfig c;
  c.algorithm = a;
  c.max_steps = steps;
  c.smoothing = s;
  return c;
}

inline SmoothingParams replicate_smoothing(const StudyConfig& cfg, const FamilySpec& family, const Dataset& data,
                                           const SmoothingParams& base, std::uint64_t seed) {
  if (!cfg.use_cv) return base;
  FitConfig fc = study_fit_config(base, Algorithm::accelerated, 3);
  const auto grid = make_cv_grid(default_delta_grid(family), default_h_grid(data));
  return cross_validate(family, data, grid, 5, fc, seed).best;
}

inline void add_summary(StudyReport& r, const std::string& key, const MetricSummary& m) {
  r.summary.emplace_back(key + "_median", m.median);
  r.summary.emplace_back(key + "_sd_mad", m.sd_mad);
  r.summary.emplace_back(key + "_mean", m.mean);
  r.summary.emplace_back(key + "_sd", m.sd);
}

inline std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

template <typename R>
std::vector<R> collect(StudyReport& report, std::vector<std::optional<R>>&& results, double max_failure_fraction) {
  std::vector<R> ok;
  for (auto& r : results) {
    if (r) ok.push_back(std::move(*r));
    else ++report.failures;
  }
  if (report.failures > max_failure_fraction * static_cast<double>(results.size()))
    throw NumericalError("study " + report.study + ": " + std::to_string(report.failures) + " of " +
                         std::to_string(results.size()) + " replicates failed");
  return ok;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs one simulation study. Replicate r uses data seed child_seed(seed, r).
inline StudyReport run_study(const StudyConfig& cfg) {
  if (cfg.reps < 1) throw ParameterError("reps must be at least 1");
  const FamilySpec family(cfg.family);
  const SimDesign base_design = SimDesign::for_family(cfg.family, cfg.n, cfg.seed);
  const SmoothingParams base = cfg.smoothing ? *cfg.smoothing : design_smoothing(cfg.family, cfg.n);
  const int p = base_design.p_n;
  const Eigen::MatrixXd zmom = base_design.z_moment();

  StudyReport report;
  report.study = to_string(cfg.study);
  report.family = family.to_string();
  report.n = cfg.n;
  report.p_n = p;
  report.reps = cfg.reps;
  report.seed = cfg.seed;
  report.smoothing = base;

  auto design_for = [&](int rep) {
    SimDesign d = base_design;
    d.seed = child_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    return d;
  };

  switch (cfg.study) {
    case Study::table1: {
      report.replicates.columns = {"rep",         "time_backfit", "time_accel",   "time_full",  "gmse_backfit",
                                   "gmse_accel",  "gmse_full",    "rase_oracle",  "rase_backfit", "rase_accel",
                                   "rase_full",   "ratio_backfit", "ratio_accel", "ratio_full"};
      auto rows = detail::collect(report, run_replicates(cfg.reps, cfg.threads, [&](int rep) {
        const SimDesign d = design_for(rep);
        const Dataset data = generate(d);
        const SmoothingParams s = detail::replicate_smoothing(cfg, family, data, base, d.seed);
        const Eigen::VectorXd init = fit_dbe(family, data, s.delta).beta0;
        std::vector<double> row{static_cast<double>(rep)};
        std::vector<FitResult> fits;
        const std::pair<Algorithm, int> runs[] = {
            {Algorithm::backfitting, 3}, {Algorithm::accelerated, 3}, {Algorithm::full, 50}};
        for (const auto& [alg, steps] : runs) {
          const auto t0 = std::chrono::steady_clock::now();
          fits.push_back(fit(family, data, detail::study_fit_config(s, alg, steps), init));
          row.push_back(cfg.record_timing ? detail::seconds_since(t0) : 0.0);
        }
        for (const auto& f : fits) row.push_back(gmse(f.beta, d.beta0, zmom));
        const CurveEstimate oracle = fit_curve(family, data, d.beta0, s, fits[0].curve.grid);
        const double r0 = rase(oracle, d.alphas());
        row.push_back(r0);
        std::vector<double> r;
        for (const auto& f : fits) r.push_back(rase(f.curve, d.alphas()));
        for (double v : r) row.push_back(v);
        for (double v : r) row.push_back(r0 / v);
        return row;
      }), cfg.max_failure_fraction);
      const char* names[] = {"backfit", "accel", "full"};
      for (std::size_t a = 0; a < 3; ++a) {
        detail::add_summary(report, std::string("time_") + names[a], summarize(detail::column(rows, 1 + a)));
        detail::add_summary(report, std::string("gmse_") + names[a], summarize(detail::column(rows, 4 + a)));
        detail::add_summary(report, std::string("rase_ratio_") + names[a], summarize(detail::column(rows, 11 + a)));
      }
      report.replicates.rows = std::move(rows);
      break;
    }
    case Study::table2: {
      report.replicates.columns = {"rep", "gmse_dbe", "gmse_3s", "gmse_af", "af_over_dbe_pct", "af_over_3s_pct"};
      auto rows = detail::collect(report, run_replicates(cfg.reps, cfg.threads, [&](int rep) {
        const SimDesign d = design_for(rep);
        const Dataset data = generate(d);
        const SmoothingParams s = detail::replicate_smoothing(cfg, family, data, base, d.seed);
        const Eigen::VectorXd init = fit_dbe(family, data, s.delta).beta0;
        const FitResult three = fit(family, data, detail::study_fit_config(s, Algorithm::accelerated, 3), init);
        const FitResult af = fit(family, data, detail::study_fit_config(s, Algorithm::accelerated, 50), three.beta);
        const double g0 = gmse(init, d.beta0, zmom), g3 = gmse(three.beta, d.beta0, zmom),
                     gf = gmse(af.beta, d.beta0, zmom);
        return std::vector<double>{static_cast<double>(rep), g0, g3, gf, 100.0 * gf / g0, 100.0 * gf / g3};
      }), cfg.max_failure_fraction);
      detail::add_summary(report, "gmse_dbe", summarize(detail::column(rows, 1)));
      detail::add_summary(report, "gmse_3s", summarize(detail::column(rows, 2)));
      detail::add_summary(report, "gmse_af", summarize(detail::column(rows, 3)));
      detail::add_summary(report, "af_over_dbe_pct", summarize(detail::column(rows, 4)));
      detail::add_summary(report, "af_over_3s_pct", summarize(detail::column(rows, 5)));
      report.replicates.rows = std::move(rows);
      break;
    }
    case Study::table3: {
      const double mults[] = {0.66, 1.0, 1.5};
      report.replicates.columns = {"rep",         "gmse_h066", "gmse_h100", "gmse_h150",
                                   "sqerr5_h066", "sqerr5_h100", "sqerr5_h150"};
      const Eigen::Index j5 = std::min<Eigen::Index>(4, p - 1);
      auto rows = detail::collect(report, run_replicates(cfg.reps, cfg.threads, [&](int rep) {
        const SimDesign d = design_for(rep);
        const Dataset data = generate(d);
        const SmoothingParams s = detail::replicate_smoothing(cfg, family, data, base, d.seed);
        const Eigen::VectorXd init = fit_dbe(family, data, s.delta).beta0;
        std::vector<double> g, e;
        for (double m : mults) {
          SmoothingParams sm = s;
          sm.h = m * s.h;
          const FitResult f =
              fit(family, data, detail::study_fit_config(sm, Algorithm::accelerated, cfg.inference_steps), init);
          g.push_back(gmse(f.beta, d.beta0, zmom));
          e.push_back((f.beta[j5] - d.beta0[j5]) * (f.beta[j5] - d.beta0[j5]));
        }
        return std::vector<double>{static_cast<double>(rep), g[0], g[1], g[2], e[0], e[1], e[2]};
      }), cfg.max_failure_fraction);
      const char* tags[] = {"h066", "h100", "h150"};
      for (std::size_t k = 0; k < 3; ++k) {
        detail::add_summary(report, std::string("gmse_") + tags[k], summarize(detail::column(rows, 1 + k)));
        detail::add_summary(report, std::string("mse_beta5_") + tags[k], summarize(detail::column(rows, 4 + k)));
      }
      report.replicates.rows = std::move(rows);
      break;
    }
    case Study::table4: {
      report.replicates.columns = {"rep"};
      for (int j = 0; j < p; ++j) report.replicates.columns.push_back("beta" + std::to_string(j + 1));
      for (int j = 0; j < p; ++j) report.replicates.columns.push_back("se" + std::to_string(j + 1));
      auto rows = detail::collect(report, run_replicates(cfg.reps, cfg.threads, [&](int rep) {
        const SimDesign d = design_for(rep);
        const Dataset data = generate(d);
        const SmoothingParams s = detail::replicate_smoothing(cfg, family, data, base, d.seed);
        const FitResult f =
            fit(family, data, detail::study_fit_config(s, Algorithm::accelerated, cfg.inference_steps));
        const SandwichCov cov = sandwich_covariance(family, data, f, s);
        std::vector<double> row{static_cast<double>(rep)};
        for (int j = 0; j < p; ++j) row.push_back(f.beta[j]);
        const Eigen::VectorXd se = cov.standard_errors();
        for (int j = 0; j < p; ++j) row.push_back(se[j]);
        return row;
      }), cfg.max_failure_fraction);
      for (int j = 0; j < p; ++j) {
        const MetricSummary b = summarize(detail::column(rows, 1 + static_cast<std::size_t>(j)));
        const MetricSummary se = summarize(detail::column(rows, 1 + static_cast<std::size_t>(p + j)));
        const std::string k = std::to_string(j + 1);
        report.summary.emplace_back("sd_beta" + k, b.sd);
        report.summary.emplace_back("se_median_beta" + k, se.median);
        report.summary.emplace_back("se_sd_mad_beta" + k, se.sd_mad);
      }
      report.replicates.rows = std::move(rows);
      break;
    }
    case Study::fig1_null:
    case Study::fig1_power: {
      std::vector<double> gammas = cfg.gammas;
      if (cfg.study == Study::fig1_null) gammas = {0.0};
      if (gammas.empty())
        gammas = cfg.family == FamilyName::bernoulli_logit ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                                                           : std::vector<double>{0.0, 0.05, 0.1, 0.15, 0.2};
      if (p < 7) throw ParameterError("the GLRT study needs p_n >= 7");
      std::vector<Eigen::Index> coords;
      for (int j = 6; j < p; ++j) coords.push_back(j);
      const ConstraintSpec hyp = coordinate_constraint(coords, p);
      const int df = static_cast<int>(coords.size());
      report.replicates.columns = {"gamma", "rep", "t_n", "p_value"};
      report.plot.columns = cfg.study == Study::fig1_null
                                ? std::vector<std::string>{"t", "density_kde", "density_chi2"}
                                : std::vector<std::string>{"gamma", "power_alpha_0.01", "power_alpha_0.05",
                                                           "power_alpha_0.1"};
      const double levels[] = {0.01, 0.05, 0.1};
      for (std::size_t g = 0; g < gammas.size(); ++g) {
        const double gamma = gammas[g];
        auto rows = detail::collect(report, run_replicates(cfg.reps, cfg.threads, [&](int rep) {
          SimDesign d = design_for(rep);
          d.seed = child_seed(d.seed, g);
          d.beta0[6] = gamma;
          if (p > 7) d.beta0[7] = gamma;
          const Dataset data = generate(d);
          const SmoothingParams s = detail::replicate_smoothing(cfg, family, data, base, d.seed);
          const GlrtResult t = glrt(family, data, hyp, detail::study_fit_config(s, Algorithm::accelerated, cfg.glrt_steps));
          return std::vector<double>{gamma, static_cast<double>(rep), t.t_n, t.p_value};
        }), cfg.max_failure_fraction);
        const std::vector<double> pv = detail::column(rows, 3);
        std::vector<double> power;
        for (double lv : levels) {
          double rej = 0.0;
          for (double v : pv) rej += v < lv ? 1.0 : 0.0;
          power.push_back(rej / static_cast<double>(pv.size()));
        }
        const std::string tag = cfg.study == Study::fig1_null ? "" : "_gamma" + std::to_string(g);
        report.summary.emplace_back("rejection_0.01" + tag, power[0]);
        report.summary.emplace_back("rejection_0.05" + tag, power[1]);
        report.summary.emplace_back("rejection_0.1" + tag, power[2]);
        if (cfg.study == Study::fig1_power) {
          report.summary.emplace_back("gamma" + std::to_string(g), gamma);
          report.plot.rows.push_back({gamma, power[0], power[1], power[2]});
        } else {
          const std::vector<double> tn = detail::column(rows, 2);
          report.summary.emplace_back("df", df);
          report.summary.emplace_back("ks_distance", ks_distance_chi2(tn, df));
          const MetricSummary ms = summarize(tn);
          report.summary.emplace_back("t_n_mean", ms.mean);
          report.summary.emplace_back("t_n_median", ms.median);
          const boost::math::chi_squared dist(df);
          const double top = boost::math::quantile(dist, 0.999);
          std::vector<double> at;
          for (int k = 0; k <= 200; ++k) at.push_back(top * k / 200.0);
          const std::vector<double> kde = kernel_density(tn, at);
          for (std::size_t k = 0; k < at.size(); ++k)
            report.plot.rows.push_back({at[k], kde[k], at[k] > 0 || df >= 2 ? boost::math::pdf(dist, at[k]) : 0.0});
        }
        for (auto& r : rows) report.replicates.rows.push_back(std::move(r));
      }
      break;
    }
  }
  return report;
}

}  // namespace gvcplm

#endif  // GVCPLM_SIM_HPP
