#pragma once

#include <Eigen/Dense>

#include "lgcp/covariance.hpp"
#include "lgcp/grid.hpp"

namespace lgcp::testing {

// Full covariance matrix over the extended torus, built entry by entry.
inline Eigen::MatrixXd dense_torus_cov(const CovarianceModel& m, const GridSpec& g) {
  const auto n = static_cast<Eigen::Index>(g.n_ext());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      c(i, j) = covariance(m, g.torus_distance(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
  return c;
}

}  // namespace lgcp::testing
