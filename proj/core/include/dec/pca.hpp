#pragma once

#include <cstddef>
#include <vector>

#include "dec/matrix.hpp"

namespace dec {

struct SymmetricEigen {
  std::vector<double> values;  ///< descending
  Matrix vectors;              ///< column j is the eigenvector of values[j]
};

/// Cyclic Jacobi rotations; intended for the small (embedding-sized)
/// covariance matrices used here.
SymmetricEigen symmetric_eigen(const Matrix& a, double tolerance = 1e-14,
                               std::size_t max_sweeps = 100);

/// Sample covariance (divides by n) of the rows of `data`.
Matrix covariance(const Matrix& data);

struct Projection {
  Matrix coordinates;                       ///< n × components
  std::vector<double> explained_variance;   ///< per component
  std::vector<double> mean;
  Matrix components;                        ///< components × dim
};

/// Centered projection onto the top principal directions.
Projection pca(const Matrix& data, std::size_t components);

}  // namespace dec
