#ifndef GVCPLM_KERNEL_HPP
#define GVCPLM_KERNEL_HPP

#include <cmath>

#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"

namespace gvcplm {

/// Epanechnikov kernel K(u) = 0.75 (1 - u^2)_+, supported on [-1, 1].
struct KernelSpec {
  double support_radius = 1.0;

  double eval(double t) const {
    const double a = std::abs(t);
    return a < 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
  }
};

/// K_h(t) = K(t / h) / h.
inline double kernel_weight(const KernelSpec& kernel, double t, double h) {
  if (!(h > 0.0)) throw ParameterError("bandwidth must be positive");
  return kernel.eval(t / h) / h;
}

struct SmoothingParams {
  double h = 0.1;
  double delta = 0.1;
  KernelSpec kernel{};
  int degree = 1;

  void validate(const FamilySpec& family) const {
    if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("bandwidth h must be positive");
    if (!family.is_gaussian() && !(delta > 0.0))
      throw ParameterError("transform offset delta must be positive");
    if (degree < 0) throw ParameterError("local polynomial degree must be non-negative");
  }
};

}  // namespace gvcplm

#endif  // GVCPLM_KERNEL_HPP
