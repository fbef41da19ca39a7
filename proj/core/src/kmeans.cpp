#include "dec/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "dec/errors.hpp"

namespace dec {

namespace {

struct Restart {
  Matrix centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = static_cast<std::size_t>(rng.uniform_index(n));
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points.row(pick).begin(), points.cols(), centroids.row(c).begin());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
      total += d2[i];
    }
    if (total <= 0.0) {
      // Fewer distinct points than clusters so far; fall back to uniform.
      pick = static_cast<std::size_t>(rng.uniform_index(n));
      continue;
    }
    double target = rng.uniform() * total;
    pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
  }
  return centroids;
}

Restart lloyd(const Matrix& points, Matrix centroids, std::size_t max_iters) {
  const std::size_t n = points.rows();
  const std::size_t k = centroids.rows();
  const std::size_t m = points.cols();

  Restart r;
  r.assignments = assign(points, centroids);
  for (std::size_t it = 0; it < max_iters; ++it) {
    // Update step.
    Matrix sums(k, m);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::size_t>(r.assignments[i]);
      auto src = points.row(i);
      auto dst = sums.row(a);
      for (std::size_t c = 0; c < m; ++c) dst[c] += src[c];
      ++counts[a];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      auto dst = centroids.row(j);
      auto src = sums.row(j);
      for (std::size_t c = 0; c < m; ++c) dst[c] = src[c] / static_cast<double>(counts[j]);
    }
    // Re-seed empty clusters at the point currently worst served.
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = squared_distance(
            points.row(i), centroids.row(static_cast<std::size_t>(r.assignments[i])));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      std::copy_n(points.row(far).begin(), m, centroids.row(j).begin());
      --counts[static_cast<std::size_t>(r.assignments[far])];
      r.assignments[far] = static_cast<int>(j);
      counts[j] = 1;
    }

    auto next = assign(points, centroids);
    ++r.iterations;
    const bool stable = next == r.assignments;
    r.assignments = std::move(next);
    r.trace.push_back(inertia(points, centroids, r.assignments));
    if (stable) break;
  }
  r.centroids = std::move(centroids);
  r.inertia = inertia(points, r.centroids, r.assignments);
  return r;
}

}  // namespace

std::vector<int> assign(const Matrix& points, const Matrix& centroids) {
  require_shape(points.cols() == centroids.cols(), "assign: point/centroid dims differ");
  if (centroids.rows() == 0) throw ArgumentError("assign: no centroids");
  std::vector<int> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      const double d = squared_distance(points.row(i), centroids.row(j));
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    out[i] = best_j;
  }
  return out;
}

double inertia(const Matrix& points, const Matrix& centroids, std::span<const int> assignments) {
  require_shape(assignments.size() == points.rows(), "inertia: assignment count != rows");
  require_shape(points.cols() == centroids.cols(), "inertia: point/centroid dims differ");
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const int a = assignments[i];
    if (a < 0 || static_cast<std::size_t>(a) >= centroids.rows())
      throw ArgumentError("inertia: assignment out of range");
    total += squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(a)));
  }
  return total;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t restarts,
                    std::size_t max_iters, const Rng& rng) {
  if (k == 0) throw ArgumentError("kmeans: k must be at least 1");
  if (points.rows() < k) throw ArgumentError("kmeans: fewer points than clusters");
  if (restarts == 0) throw ArgumentError("kmeans: restarts must be at least 1");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng stream = rng.fork(r);
    Restart run = lloyd(points, seed_plus_plus(points, k, stream), max_iters);
    best.restart_inertias.push_back(run.inertia);
    if (run.inertia < best.inertia) {
      best.centroids = std::move(run.centroids);
      best.assignments = std::move(run.assignments);
      best.inertia = run.inertia;
      best.iterations = run.iterations;
      best.winning_restart = r;
      best.inertia_trace = std::move(run.trace);
    }
  }
  return best;
}

}  // namespace dec
