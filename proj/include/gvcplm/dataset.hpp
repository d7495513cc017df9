#ifndef GVCPLM_DATASET_HPP
#define GVCPLM_DATASET_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "gvcplm/errors.hpp"

namespace gvcplm {

/// Observations (Y_i, X_i, Z_i, U_i) of a varying-coefficient partially
/// linear model. Row i of `x` and `z` belongs to observation i.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // n x q, covariates with varying coefficients
  Eigen::MatrixXd z;  // n x p, covariates with constant coefficients
  Eigen::VectorXd u;  // index variable

  std::vector<std::string> x_names;
  std::vector<std::string> z_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index q() const { return x.cols(); }
  Eigen::Index p() const { return z.cols(); }

  void validate() const {
    const auto rows = y.size();
    if (rows == 0) throw DataError("dataset has no observations");
    if (x.rows() != rows || z.rows() != rows || u.size() != rows)
      throw DataError("dataset blocks have inconsistent row counts");
    if (x.cols() == 0) throw DataError("dataset needs at least one varying-coefficient covariate");
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::isfinite(y[i]) || !std::isfinite(u[i]) || !x.row(i).allFinite() ||
          !z.row(i).allFinite())
        throw DataError("non-finite value in observation " + std::to_string(i));
    }
  }

  /// Subset of rows, in the given order.
  Dataset rows(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    out.u.resize(out.y.size());
    out.x.resize(out.y.size(), q());
    out.z.resize(out.y.size(), p());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto i = idx[k];
      const auto r = static_cast<Eigen::Index>(k);
      out.y[r] = y[i];
      out.u[r] = u[i];
      out.x.row(r) = x.row(i);
      out.z.row(r) = z.row(i);
    }
    out.x_names = x_names;
    out.z_names = z_names;
    return out;
  }

  /// Same observations with the parametric block replaced by Z * basis^T,
  /// i.e. the design seen by beta = basis^T gamma.
  Dataset reparametrized(const Eigen::MatrixXd& basis) const {
    Dataset out = *this;
    out.z = z * basis.transpose();
    out.z_names.clear();
    for (Eigen::Index k = 0; k < basis.rows(); ++k) out.z_names.push_back("gamma" + std::to_string(k + 1));
    return out;
  }

  std::string z_name(Eigen::Index j) const {
    if (j < static_cast<Eigen::Index>(z_names.size())) return z_names[static_cast<std::size_t>(j)];
    return "z" + std::to_string(j + 1);
  }
  std::string x_name(Eigen::Index j) const {
    if (j < static_cast<Eigen::Index>(x_names.size())) return x_names[static_cast<std::size_t>(j)];
    return "x" + std::to_string(j + 1);
  }
};

}  // namespace gvcplm

#endif  // GVCPLM_DATASET_HPP
