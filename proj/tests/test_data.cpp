#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "dec/data.hpp"
#include "dec/errors.hpp"
#include "dec/kmeans.hpp"
#include "dec/metrics.hpp"
#include "support.hpp"

using namespace dec;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x803);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

// Byte-level reference decoder: walks the buffer by hand, no shared helpers.
std::vector<std::vector<double>> reference_decode(const std::vector<std::uint8_t>& b) {
  auto be = [&](std::size_t o) {
    return (static_cast<std::size_t>(b[o]) << 24) | (static_cast<std::size_t>(b[o + 1]) << 16) |
           (static_cast<std::size_t>(b[o + 2]) << 8) | b[o + 3];
  };
  const std::size_t n = be(4), dim = be(8) * be(12);
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) out[i][j] = b[16 + i * dim + j] / 255.0;
  return out;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("deepcluster-data-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                           static_cast<std::streamsize>(b.size()));
}

Dataset csv(const std::string& text, std::optional<std::size_t> label_col = std::nullopt) {
  std::istringstream in(text);
  return parse_csv(in, label_col, "inline");
}

std::size_t format_error_position(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.position();
  }
  FAIL("expected a format error");
  return 0;
}

}  // namespace

TEST_CASE("IDX images") {
  // Two 2×3 images.
  const std::vector<std::uint8_t> pixels = {0, 255, 51, 102, 153, 204, 1, 2, 3, 4, 5, 6};
  const auto bytes = idx_images(2, 2, 3, pixels);

  SUBCASE("hand-built fixture decodes exactly") {
    const Matrix m = parse_idx_images(bytes, "fixture");
    const auto ref = reference_decode(bytes);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 6);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(m(i, j) == ref[i][j]);
    CHECK(m(0, 1) == 1.0);
    CHECK(m(0, 2) == 0.2);
  }
  SUBCASE("bad magic at offset 0") {
    auto bad = bytes;
    bad[3] = 0x01;
    CHECK(format_error_position([&] { parse_idx_images(bad, "x"); }) == 0);
    CHECK_THROWS_WITH_AS(parse_idx_images(bad, "x"), doctest::Contains("byte offset 0"), FormatError);
  }
  SUBCASE("truncated payload") {
    auto bad = bytes;
    bad.pop_back();
    CHECK(format_error_position([&] { parse_idx_images(bad, "x"); }) == bad.size());
  }
  SUBCASE("truncated header") {
    const std::vector<std::uint8_t> bad(bytes.begin(), bytes.begin() + 10);
    CHECK_THROWS_AS(parse_idx_images(bad, "x"), FormatError);
  }
  SUBCASE("trailing bytes") {
    auto bad = bytes;
    bad.push_back(7);
    CHECK(format_error_position([&] { parse_idx_images(bad, "x"); }) == bytes.size());
  }
  SUBCASE("labels magic is not an image file") {
    CHECK_THROWS_AS(parse_idx_images(idx_labels({1, 2}), "x"), FormatError);
  }
}

TEST_CASE("IDX labels and files") {
  TempDir dir;
  const auto img = dir.path / "images.idx";
  const auto lab = dir.path / "labels.idx";
  write_bytes(img, idx_images(3, 1, 2, {0, 255, 255, 0, 10, 20}));

  SUBCASE("images with labels") {
    write_bytes(lab, idx_labels({7, 0, 3}));
    const auto ds = load_idx(img, lab);
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(*ds.labels == std::vector<int>{7, 0, 3});
  }
  SUBCASE("label count mismatch") {
    write_bytes(lab, idx_labels({7, 0}));
    CHECK_THROWS_AS(load_idx(img, lab), FormatError);
  }
  SUBCASE("images only") {
    const auto ds = load_idx(img);
    CHECK_FALSE(ds.has_labels());
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_idx(dir.path / "nope"), ArgumentError); }
}

TEST_CASE("CSV parsing") {
  SUBCASE("2x2") {
    const auto ds = csv("1,2\n3,4\n");
    CHECK(ds.features == Matrix{{1, 2}, {3, 4}});
    CHECK_FALSE(ds.has_labels());
  }
  SUBCASE("header, label column excluded from features") {
    const auto ds = csv("a,label,b\n1.5,2,-3\n4,0,5e-1\n", 1);
    CHECK(ds.features == Matrix{{1.5, -3.0}, {4.0, 0.5}});
    CHECK(*ds.labels == std::vector<int>{2, 0});
  }
  SUBCASE("no trailing newline, CRLF, blank trailing line") {
    CHECK(csv("1,2\r\n3,4").features == Matrix{{1, 2}, {3, 4}});
    CHECK(csv("1,2\n3,4\n\n").features == Matrix{{1, 2}, {3, 4}});
  }
  SUBCASE("ragged row reports its line") {
    CHECK(format_error_position([] { csv("1,2\n3,4\n5\n"); }) == 3);
    CHECK(format_error_position([] { csv("x,y\n1,2\n3,4,5\n"); }) == 3);
  }
  SUBCASE("non-numeric cell reports its line") {
    CHECK(format_error_position([] { csv("1,2\n3,abc\n"); }) == 2);
    CHECK(format_error_position([] { csv("1,2\n3,nan\n"); }) == 2);
    CHECK_THROWS_WITH_AS(csv("1,2\n,4\n"), doctest::Contains("line 2"), FormatError);
  }
  SUBCASE("bad labels") {
    CHECK_THROWS_AS(csv("1,2\n3,1.5\n", 1), FormatError);
    CHECK_THROWS_AS(csv("1,2\n3,-1\n", 1), FormatError);
    CHECK_THROWS_AS(csv("1,2\n3,4\n", 5), FormatError);
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(csv(""), FormatError); }
}

TEST_CASE("CSV round trip is lossless") {
  Rng rng(5);
  Matrix m = dec::testing::random_matrix(20, 7, rng, -1e3, 1e3);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.1;
  m(2, 2) = 1.0 / 3.0;
  std::vector<int> labels(20);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);

  for (bool header : {false, true}) {
    std::stringstream buf;
    write_csv(buf, m, labels, header);
    const auto back = parse_csv(buf, 7, "rt");
    CHECK(back.features == m);
    CHECK(*back.labels == labels);
  }
  TempDir dir;
  write_csv(dir.path / "m.csv", m);
  CHECK(load_csv(dir.path / "m.csv").features == m);
}

TEST_CASE("normalize") {
  SUBCASE("already normalized") {
    CHECK(normalization_scale(Matrix{{1.0, -1.0}, {1.0, 1.0}}) == 1.0);
  }
  SUBCASE("single point with mean square 4") {
    CHECK(normalization_scale(Matrix{{2.0, -2.0, 2.0}}) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("random matrix post-condition and idempotence") {
    Rng rng(9);
    Dataset ds;
    ds.features = dec::testing::random_matrix(50, 13, rng, -4.0, 9.0);
    const auto once = normalize(ds);
    double total = 0.0;
    for (std::size_t i = 0; i < 50; ++i) total += squared_norm(once.dataset.features.row(i)) / 13.0;
    CHECK(std::abs(total / 50.0 - 1.0) < 1e-12);
    CHECK(normalization_scale(once.dataset.features) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("all-zero data") { CHECK_THROWS_AS(normalization_scale(Matrix(4, 3)), DegenerateDataError); }
}

TEST_CASE("imbalanced_subsample") {
  CHECK(retention_probability(5, 10, 0.1) == doctest::Approx(0.6));
  CHECK(retention_probability(0, 10, 0.1) == doctest::Approx(0.1));
  CHECK(retention_probability(9, 10, 0.1) == doctest::Approx(1.0));

  SUBCASE("r_min 1 keeps everything") {
    const auto ds = make_blobs(200, 4, 3, 5.0, 1.0, 1);
    Rng rng(1);
    const auto out = imbalanced_subsample(ds, 1.0, rng);
    CHECK(out.features == ds.features);
    CHECK(*out.labels == *ds.labels);
  }
  SUBCASE("size ratio on MNIST-sized classes") {
    Dataset ds;
    ds.features = Matrix(70000, 1);
    ds.labels = std::vector<int>(70000);
    for (std::size_t i = 0; i < 70000; ++i) (*ds.labels)[i] = static_cast<int>(i % 10);
    Rng rng(3);
    const auto out = imbalanced_subsample(ds, 0.1, rng);
    std::vector<double> counts(10, 0.0);
    for (int l : *out.labels) counts[static_cast<std::size_t>(l)] += 1;
    const double ratio = counts[9] / counts[0];
    MESSAGE("class-9 / class-0 ratio " << ratio);
    CHECK(ratio == doctest::Approx(10.0).epsilon(0.2));
  }
  SUBCASE("errors") {
    Dataset unlabeled;
    unlabeled.features = Matrix(3, 2);
    Rng rng(1);
    CHECK_THROWS_AS(imbalanced_subsample(unlabeled, 0.5, rng), ArgumentError);
    CHECK_THROWS_AS(retention_probability(0, 10, 0.0), ArgumentError);
  }
}

TEST_CASE("make_blobs") {
  SUBCASE("k = 1") {
    const auto ds = make_blobs(30, 1, 4, 1.0, 1.0, 2);
    for (int l : *ds.labels) CHECK(l == 0);
  }
  SUBCASE("sigma 0 collapses clusters; k-means recovers labels") {
    const auto ds = make_blobs(60, 4, 5, 3.0, 0.0, 4);
    const auto res = kmeans(ds.features, 4, 5, 100, Rng(1));
    CHECK(res.inertia < 1e-20);
    CHECK(clustering_accuracy(*ds.labels, res.assignments) == 1.0);
  }
  SUBCASE("deterministic and separated") {
    const auto a = make_blobs(40, 5, 3, 10.0, 0.5, 8);
    const auto b = make_blobs(40, 5, 3, 10.0, 0.5, 8);
    CHECK(a.features == b.features);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(make_blobs(0, 2, 2, 1.0, 1.0, 0), ArgumentError);
    CHECK_THROWS_AS(make_blobs(10, 2, 2, 0.0, 1.0, 0), ArgumentError);
    CHECK_THROWS_AS(make_blobs(10, 2, 2, 1.0, -1.0, 0), ArgumentError);
  }
}

TEST_CASE("split") {
  const auto ds = make_blobs(100, 3, 2, 4.0, 1.0, 6);
  const auto s = split(ds, {0.9, 42});
  CHECK(s.train.size() == 90);
  CHECK(s.validation.size() == 10);

  std::vector<std::size_t> rows = s.train_rows;
  rows.insert(rows.end(), s.validation_rows.begin(), s.validation_rows.end());
  std::sort(rows.begin(), rows.end());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i] == i);
  for (std::size_t i = 0; i < s.train_rows.size(); ++i) {
    CHECK((*s.train.labels)[i] == (*ds.labels)[s.train_rows[i]]);
    CHECK(s.train.features(i, 1) == ds.features(s.train_rows[i], 1));
  }

  const auto again = split(ds, {0.9, 42});
  CHECK(again.train_rows == s.train_rows);
  CHECK_FALSE(split(ds, {0.9, 43}).train_rows == s.train_rows);

  CHECK_THROWS_AS(split(ds, {0.0, 1}), ArgumentError);
  CHECK_THROWS_AS(split(ds, {1.0, 1}), ArgumentError);

  const auto joined = concatenate(s.train, s.validation);
  CHECK(joined.size() == 100);
}
