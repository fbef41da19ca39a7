#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "dec/data.hpp"
#include "dec/errors.hpp"
#include "dec/kmeans.hpp"
#include "support.hpp"

using namespace dec;

TEST_CASE("kmeans: k = n puts every point on its own centroid") {
  Rng rng(1);
  const Matrix pts = dec::testing::random_matrix(6, 3, rng);
  const auto r = kmeans(pts, 6, 5, 100, Rng(2));
  CHECK(r.inertia == 0.0);
  std::vector<int> sorted = r.assignments;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(squared_distance(pts.row(i), r.centroids.row(static_cast<std::size_t>(r.assignments[i]))) == 0.0);
}

TEST_CASE("kmeans: k = 1 gives the mean and total scatter") {
  Rng rng(3);
  const Matrix pts = dec::testing::random_matrix(50, 4, rng);
  const auto r = kmeans(pts, 1, 3, 100, Rng(4));
  const auto mean = column_means(pts);
  double scatter = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i) scatter += squared_distance(pts.row(i), mean);
  for (std::size_t j = 0; j < 4; ++j) CHECK(r.centroids(0, j) == doctest::Approx(mean[j]).epsilon(1e-12));
  CHECK(r.inertia == doctest::Approx(scatter).epsilon(1e-12));
}

TEST_CASE("kmeans recovers well-separated blobs exactly") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto blobs = make_blobs(300, 3, 4, 5.0, 0.1, seed);
    const auto r = kmeans(blobs.features, 3, 20, 300, Rng(seed));
    CHECK(dec::testing::brute_force_accuracy(*blobs.labels, r.assignments) == 1.0);
  }
}

TEST_CASE("kmeans invariants") {
  const auto blobs = make_blobs(240, 4, 3, 6.0, 1.0, 11);
  const auto r = kmeans(blobs.features, 4, 10, 300, Rng(5));

  SUBCASE("inertia equals the recomputed sum of squared distances") {
    double s = 0.0;
    for (std::size_t i = 0; i < blobs.size(); ++i)
      s += squared_distance(blobs.features.row(i),
                            r.centroids.row(static_cast<std::size_t>(r.assignments[i])));
    CHECK(r.inertia == doctest::Approx(s).epsilon(1e-12));
  }
  SUBCASE("inertia is non-increasing across Lloyd iterations") {
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
      CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] * (1 + 1e-12));
  }
  SUBCASE("best restart is no worse than any restart") {
    REQUIRE(r.restart_inertias.size() == 10);
    for (double x : r.restart_inertias) CHECK(r.inertia <= x);
  }
  SUBCASE("row permutation changes nothing but labels") {
    std::vector<std::size_t> perm(blobs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle(1);
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<std::size_t>(shuffle.uniform_index(i + 1))]);
    const auto rp = kmeans(blobs.features.gather_rows(perm), 4, 10, 300, Rng(5));
    CHECK(rp.inertia == doctest::Approx(r.inertia).epsilon(1e-9));
  }
  SUBCASE("deterministic under a fixed generator") {
    const auto again = kmeans(blobs.features, 4, 10, 300, Rng(5));
    CHECK(again.assignments == r.assignments);
    CHECK(again.centroids == r.centroids);
  }
  SUBCASE("every assignment in range") {
    for (int a : r.assignments) CHECK((a >= 0 && a < 4));
  }
}

TEST_CASE("kmeans survives duplicate points that force empty clusters") {
  const Matrix pts{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = kmeans(pts, 3, 2, 50, Rng(seed));
    CHECK(r.centroids.all_finite());
    CHECK(r.inertia == doctest::Approx(0.0));
    for (int a : r.assignments) CHECK((a >= 0 && a < 3));
  }
}

TEST_CASE("kmeans argument errors") {
  CHECK_THROWS_AS(kmeans(Matrix(2, 2), 3, 1, 10, Rng(1)), ArgumentError);
  CHECK_THROWS_AS(kmeans(Matrix(2, 2), 0, 1, 10, Rng(1)), ArgumentError);
}

TEST_CASE("assign") {
  const Matrix centroids{{0.0, 0.0}, {2.0, 0.0}, {5.0, 5.0}};
  SUBCASE("point on a centroid") {
    CHECK(assign(Matrix{{5.0, 5.0}}, centroids) == std::vector<int>{2});
  }
  SUBCASE("tie goes to the lower index") {
    CHECK(assign(Matrix{{1.0, 0.0}}, centroids) == std::vector<int>{0});
  }
  SUBCASE("matches a brute-force distance scan") {
    Rng rng(9);
    const Matrix pts = dec::testing::random_matrix(200, 2, rng, -1.0, 6.0);
    const auto got = assign(pts, centroids);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      std::vector<double> d;
      for (std::size_t j = 0; j < 3; ++j) {
        const double dx = pts(i, 0) - centroids(j, 0);
        const double dy = pts(i, 1) - centroids(j, 1);
        d.push_back(dx * dx + dy * dy);
      }
      CHECK(got[i] == std::min_element(d.begin(), d.end()) - d.begin());
    }
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(assign(Matrix(1, 3), centroids), ShapeError); }
}
