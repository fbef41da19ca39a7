#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dec/matrix.hpp"
#include "dec/rng.hpp"

namespace dec {

struct KMeansConfig {
  std::size_t restarts = 20;
  std::size_t max_iters = 300;
};

struct KMeansResult {
  Matrix centroids;              ///< k × m
  std::vector<int> assignments;  ///< length n, values in [0, k)
  double inertia = 0.0;          ///< Σ‖z_i − μ_{a_i}‖²
  std::size_t iterations = 0;    ///< Lloyd iterations of the winning restart
  std::size_t winning_restart = 0;
  std::vector<double> restart_inertias;
  /// Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> inertia_trace;
};

/// Best-of-`restarts` Lloyd's algorithm with k-means++ seeding. Restart r
/// draws from `rng.fork(r)`, so results do not depend on restart order.
/// Empty clusters are re-seeded with the point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t restarts,
                    std::size_t max_iters, const Rng& rng);

inline KMeansResult kmeans(const Matrix& points, std::size_t k, const KMeansConfig& config,
                           const Rng& rng) {
  return kmeans(points, k, config.restarts, config.max_iters, rng);
}

/// Nearest centroid by squared Euclidean distance; ties go to the lower index.
std::vector<int> assign(const Matrix& points, const Matrix& centroids);

double inertia(const Matrix& points, const Matrix& centroids, std::span<const int> assignments);

}  // namespace dec
