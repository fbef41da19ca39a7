#include "dec/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dec/errors.hpp"

namespace dec {

SymmetricEigen symmetric_eigen(const Matrix& input, double tolerance, std::size_t max_sweeps) {
  require_shape(input.rows() == input.cols(), "symmetric_eigen: matrix must be square");
  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };
  double scale = 0.0;
  for (double x : a.values()) scale += x * x;

  for (std::size_t sweep = 0; sweep < max_sweeps && off_diagonal() > tolerance * tolerance * scale;
       ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

Matrix covariance(const Matrix& data) {
  if (data.rows() == 0) throw ArgumentError("covariance: empty data");
  const auto mean = column_means(data);
  Matrix centered = data;
  for (std::size_t r = 0; r < centered.rows(); ++r) {
    auto row = centered.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] -= mean[c];
  }
  Matrix cov = transpose_multiply(centered, centered);
  for (double& x : cov.values()) x /= static_cast<double>(data.rows());
  return cov;
}

Projection pca(const Matrix& data, std::size_t components) {
  if (components == 0 || components > data.cols())
    throw ArgumentError("pca: component count must lie in [1, dim]");
  const auto eig = symmetric_eigen(covariance(data));
  Projection out;
  out.mean = column_means(data);
  out.components = Matrix(components, data.cols());
  for (std::size_t c = 0; c < components; ++c) {
    out.explained_variance.push_back(eig.values[c]);
    // Sign convention: largest-magnitude loading is positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < data.cols(); ++i)
      if (std::abs(eig.vectors(i, c)) > std::abs(eig.vectors(arg, c))) arg = i;
    const double sign = eig.vectors(arg, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < data.cols(); ++i) out.components(c, i) = sign * eig.vectors(i, c);
  }
  Matrix centered = data;
  for (std::size_t r = 0; r < centered.rows(); ++r) {
    auto row = centered.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] -= out.mean[c];
  }
  out.coordinates = multiply_transposed(centered, out.components);
  return out;
}

}  // namespace dec
