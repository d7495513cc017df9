#ifndef GVCPLM_FAMILY_HPP
#define GVCPLM_FAMILY_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "gvcplm/dataset.hpp"
#include "gvcplm/errors.hpp"

namespace gvcplm {

enum class FamilyName { gaussian_identity, poisson_log, bernoulli_logit };

/// Quasi-likelihood family with canonical link.
///
/// Q(mu, y) is the integral of (s - y) / V(s) from mu to y, written here as a
/// function of the linear predictor x = g(mu) and with terms depending only on
/// y dropped. q(l, x, y) is the l-th derivative of Q(g^{-1}(x), y) in x.
/// For Poisson and Bernoulli the predictor is clipped to [-max_predictor,
/// max_predictor] inside every evaluation.
class FamilySpec {
 public:
  static constexpr double max_predictor = 30.0;

  explicit FamilySpec(FamilyName name = FamilyName::gaussian_identity) : name_(name) {}

  static FamilySpec from_string(std::string_view s) {
    if (s == "gaussian") return FamilySpec(FamilyName::gaussian_identity);
    if (s == "poisson") return FamilySpec(FamilyName::poisson_log);
    if (s == "bernoulli") return FamilySpec(FamilyName::bernoulli_logit);
    throw ParameterError("unknown family '" + std::string(s) + "' (expected gaussian, poisson or bernoulli)");
  }

  FamilyName name() const { return name_; }

  std::string to_string() const {
    switch (name_) {
      case FamilyName::gaussian_identity: return "gaussian";
      case FamilyName::poisson_log: return "poisson";
      case FamilyName::bernoulli_logit: return "bernoulli";
    }
    return "unknown";
  }

  bool is_gaussian() const { return name_ == FamilyName::gaussian_identity; }

  double clip(double x) const {
    if (is_gaussian()) return x;
    return std::clamp(x, -max_predictor, max_predictor);
  }

  double link(double mu) const {
    switch (name_) {
      case FamilyName::gaussian_identity: return mu;
      case FamilyName::poisson_log: return std::log(mu);
      case FamilyName::bernoulli_logit: return std::log(mu / (1.0 - mu));
    }
    return mu;
  }

  double inverse_link(double x) const {
    x = clip(x);
    switch (name_) {
      case FamilyName::gaussian_identity: return x;
      case FamilyName::poisson_log: return std::exp(x);
      case FamilyName::bernoulli_logit: return logistic(x);
    }
    return x;
  }

  double variance(double mu) const {
    switch (name_) {
      case FamilyName::gaussian_identity: return 1.0;
      case FamilyName::poisson_log: return mu;
      case FamilyName::bernoulli_logit: return mu * (1.0 - mu);
    }
    return 1.0;
  }

  bool valid_response(double y) const {
    if (!std::isfinite(y)) return false;
    switch (name_) {
      case FamilyName::gaussian_identity: return true;
      case FamilyName::poisson_log: return y >= 0.0;
      case FamilyName::bernoulli_logit: return y == 0.0 || y == 1.0;
    }
    return false;
  }

  void check_response(double y, long index) const {
    if (!valid_response(y))
      throw DomainError("response " + std::to_string(y) + " is outside the " + to_string() + " support", index);
  }

  void check_responses(const Eigen::VectorXd& y) const {
    for (Eigen::Index i = 0; i < y.size(); ++i) check_response(y[i], static_cast<long>(i));
  }

  /// Q(g^{-1}(x), y) up to an additive function of y.
  double quasi_loglik(double x, double y) const {
    const double xc = clip(x);
    switch (name_) {
      case FamilyName::gaussian_identity: return -0.5 * (y - x) * (y - x);
      case FamilyName::poisson_log: return y * xc - std::exp(xc);
      case FamilyName::bernoulli_logit:
        return xc > 0 ? (y - 1.0) * xc - log1pexp(-xc) : y * xc - log1pexp(xc);
    }
    return 0.0;
  }

  /// l-th derivative of Q(g^{-1}(x), y) with respect to x, l in 1..4.
  double q(int l, double x, double y) const {
    if (l < 1 || l > 4) throw ParameterError("derivative order must be in 1..4");
    const double xc = clip(x);
    switch (name_) {
      case FamilyName::gaussian_identity:
        if (l == 1) return y - x;
        return l == 2 ? -1.0 : 0.0;
      case FamilyName::poisson_log: {
        const double mu = std::exp(xc);
        return l == 1 ? y - mu : -mu;
      }
      case FamilyName::bernoulli_logit: {
        const double pi = logistic(xc);
        const double v = pi * (1.0 - pi);
        switch (l) {
          case 1: return y - pi;
          case 2: return -v;
          case 3: return -v * (1.0 - 2.0 * pi);
          default: return -v * (1.0 - 6.0 * v);
        }
      }
    }
    return 0.0;
  }

  double q1(double x, double y) const { return q(1, x, y); }
  double q2(double x, double y) const { return q(2, x, y); }

  /// Transformed response used by the difference-based initial estimator.
  double transform_response(double y, double delta) const {
    switch (name_) {
      case FamilyName::gaussian_identity: return y;
      case FamilyName::poisson_log:
        check_delta(delta);
        return std::log(y + delta);
      case FamilyName::bernoulli_logit:
        check_delta(delta);
        return std::log((y + delta) / (1.0 - y + delta));
    }
    return y;
  }

  static double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  static double log1pexp(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

 private:
  void check_delta(double delta) const {
    if (!(delta > 0.0)) throw ParameterError("transform offset delta must be positive for the " + to_string() + " family");
  }

  FamilyName name_;
};

inline double eval_quasi_loglik(const FamilySpec& family, double x, double y) {
  family.check_response(y, 0);
  return family.quasi_loglik(x, y);
}

inline double eval_q(const FamilySpec& family, int l, double x, double y) {
  family.check_response(y, 0);
  return family.q(l, x, y);
}

inline double transform_response(const FamilySpec& family, double y, double delta) {
  return family.transform_response(y, delta);
}

}  // namespace gvcplm

#endif  // GVCPLM_FAMILY_HPP
