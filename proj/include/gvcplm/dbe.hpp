#ifndef GVCPLM_DBE_HPP
#define GVCPLM_DBE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "gvcplm/dataset.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"

namespace gvcplm {

/// Difference-based initial estimate of beta.
struct DbeResult {
  Eigen::VectorXd beta0;
  Eigen::VectorXd gamma0;
  Eigen::VectorXd gamma1;
  double residual_ss = 0.0;
  Eigen::Index starred_rows = 0;
  bool rank_deficient = false;  // least-norm solution was used
};

/// Unit vector w with sum_j w_j X_j = 0 for a (q+1) x q window of X rows.
/// The first entry whose magnitude is non-negligible is made positive. When
/// the window has rank < q the smallest-singular direction is returned.
inline Eigen::VectorXd difference_weights(const Eigen::MatrixXd& window) {
  if (window.rows() != window.cols() + 1)
    throw DataError("difference window must have q + 1 rows for q covariates");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(window.transpose(), Eigen::ComputeFullV);
  Eigen::VectorXd w = svd.matrixV().col(window.rows() - 1);
  w.normalize();
  const double cut = 1e-12;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (std::abs(w[j]) > cut) {
      if (w[j] < 0) w = -w;
      break;
    }
  }
  return w;
}

/// Starred regression design for the difference-based estimator: columns are
/// [X_i w_1 (q), sum_j w_j U_{i+j-1} X_{i+j-1} (q), Z*_i (p)], the response is
/// Y*_i built from transformed responses. Rows follow increasing U.
struct StarredData {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  std::vector<Eigen::VectorXd> weights;
  std::vector<std::vector<Eigen::Index>> members;  // original row indices in each window
};

inline StarredData starred_data(const FamilySpec& family, const Dataset& data, double delta) {
  const auto n = data.n();
  const auto q = data.q();
  const auto p = data.p();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return data.u[a] < data.u[b]; });

  const Eigen::Index rows = n - q;
  StarredData out;
  out.design = Eigen::MatrixXd::Zero(rows, 2 * q + p);
  out.response = Eigen::VectorXd::Zero(rows);
  Eigen::MatrixXd win(q + 1, q);
  for (Eigen::Index i = 0; i < rows; ++i) {
    std::vector<Eigen::Index> members(static_cast<std::size_t>(q + 1));
    for (Eigen::Index j = 0; j <= q; ++j) {
      members[static_cast<std::size_t>(j)] = order[static_cast<std::size_t>(i + j)];
      win.row(j) = data.x.row(members[static_cast<std::size_t>(j)]);
    }
    const Eigen::VectorXd w = difference_weights(win);
    auto row = out.design.row(i);
    row.segment(0, q) = win.row(0) * w[0];
    for (Eigen::Index j = 0; j <= q; ++j) {
      const auto r = members[static_cast<std::size_t>(j)];
      row.segment(q, q) += w[j] * data.u[r] * data.x.row(r);
      if (p > 0) row.segment(2 * q, p) += w[j] * data.z.row(r);
      out.response[i] += w[j] * family.transform_response(data.y[r], delta);
    }
    out.weights.push_back(w);
    out.members.push_back(std::move(members));
  }
  return out;
}

/// Ordinary least squares on the starred rows; the beta block of the solution
/// is the initial estimate.
inline DbeResult fit_dbe(const FamilySpec& family, const Dataset& data, double delta) {
  data.validate();
  family.check_responses(data.y);
  const auto q = data.q();
  const auto p = data.p();
  if (data.n() - q < 2 * q + p + 1)
    throw ParameterError("difference-based estimator needs more than " + std::to_string(3 * q + p) +
                         " observations");
  const StarredData st = starred_data(family, data, delta);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(st.design);
  const Eigen::VectorXd coef = cod.solve(st.response);
  DbeResult out;
  out.gamma0 = coef.segment(0, q);
  out.gamma1 = coef.segment(q, q);
  out.beta0 = coef.segment(2 * q, p);
  out.residual_ss = (st.response - st.design * coef).squaredNorm();
  out.starred_rows = st.design.rows();
  out.rank_deficient = cod.rank() < st.design.cols();
  return out;
}

}  // namespace gvcplm

#endif  // GVCPLM_DBE_HPP
