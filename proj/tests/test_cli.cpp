#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "commands.hpp"
#include "dec/checkpoint.hpp"
#include "dec/data.hpp"
#include "dec/kmeans.hpp"
#include "dec/metrics.hpp"
#include "pipeline.hpp"
#include "run_config.hpp"

using namespace dec;
using namespace dec::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct Workspace {
  fs::path root;
  fs::path blobs;
  Workspace() {
    root = fs::temp_directory_path() / ("deepcluster-cli-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(root);
    fs::create_directories(root);
    blobs = root / "blobs.csv";
    const auto ds = make_blobs(300, 3, 6, 20.0, 1.0, 11);
    write_csv(blobs, ds.features, ds.labels, true);
  }
  ~Workspace() { fs::remove_all(root); }

  // Small schedule so each CLI test finishes in about a second.
  std::vector<std::string> small(std::vector<std::string> args, const std::string& out) const {
    for (std::string s : std::vector<std::string>{"--data", blobs.string(), "--label-column", "6", "--out", (root / out).string(), "--set",
                          "hidden_dims=32,32,64,4", "--set", "iters_per_layer=200", "--set", "finetune_iters=300",
                          "--set", "lr_initial=0.05", "--set", "batch_size=64", "--set", "kmeans_restarts=5"})
      args.push_back(s);
    return args;
  }
};

}  // namespace

TEST_CASE("paper preset golden values") {
  const RunConfig c = preset_config("paper");
  CHECK(c.hidden_dims == std::vector<std::size_t>{500, 500, 2000, 10});
  CHECK(c.pretrain_for(784).layer_dims == std::vector<std::size_t>{784, 500, 500, 2000, 10});
  CHECK(c.pretrain.dropout_rate == 0.2);
  CHECK(c.pretrain.iters_per_layer == 50000);
  CHECK(c.pretrain.finetune_iters == 100000);
  CHECK(c.pretrain.batch_size == 256);
  CHECK(c.pretrain.lr_initial == 0.1);
  CHECK(c.pretrain.lr_drop_every == 20000);
  CHECK(c.pretrain.lr_drop_factor == 10.0);
  CHECK(c.pretrain.init_stddev == 0.01);
  CHECK(c.dec.learning_rate == 0.01);
  CHECK(c.dec.batch_size == 256);
  CHECK(c.dec.tol_percent == 0.1);
  CHECK(c.kmeans.restarts == 20);

  std::string rendered;
  for (const auto& [k, v] : render_settings(c)) rendered += k + " = " + v + "\n";
  CHECK(rendered.find("hidden_dims = 500,500,2000,10\n") != std::string::npos);
  CHECK(rendered.find("lr_initial = 0.10000000000000001\n") != std::string::npos);
  CHECK(rendered.find("iters_per_layer = 50000\n") != std::string::npos);
  CHECK_THROWS_AS(preset_config("laptop"), ConfigError);
}

TEST_CASE("config text") {
  const auto kv = parse_config_text("# comment\nseed = 4\n\n[config]\nk = 7\n[checksums]\nk = 99\n", "t");
  CHECK(kv.at("seed") == "4");
  CHECK(kv.at("k") == "7");

  RunConfig c = preset_config("desk");
  const RunConfig desk = c;
  for (const auto& [k, v] : render_settings(desk)) apply_setting(c, k, v);
  CHECK(render_settings(c) == render_settings(desk));

  CHECK_THROWS_AS(apply_setting(c, "colour", "red"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "k", "three"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "k_range", "6..2"), ConfigError);
  apply_setting(c, "k_range", "2..5");
  CHECK(c.k_range == std::vector<std::size_t>{2, 3, 4, 5});
  CHECK_THROWS_AS(parse_config_text("no equals sign\n", "t"), ConfigError);
}

TEST_CASE("usage errors exit with 2") {
  Workspace ws;
  auto r = invoke({"pretrain", "--data", (ws.root / "missing.csv").string(), "--out", (ws.root / "r").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.csv") != std::string::npos);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"cluster", "--data", ws.blobs.string(), "--set", "nope=1"}).code == 2);
  CHECK(invoke({"cluster", "--data", ws.blobs.string(), "--preset", "huge"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("malformed data exits with 3") {
  Workspace ws;
  std::ofstream(ws.root / "bad.csv") << "1,2\n3\n";
  const auto r = invoke({"pretrain", "--data", (ws.root / "bad.csv").string(), "--out", (ws.root / "r").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("line 2") != std::string::npos);
  std::ofstream(ws.root / "zero.csv") << "0,0\n0,0\n";
  CHECK(invoke({"pretrain", "--data", (ws.root / "zero.csv").string(), "--out", (ws.root / "r").string()}).code == 3);
}

TEST_CASE("divergent training exits with 4") {
  Workspace ws;
  const auto r = invoke(ws.small({"pretrain", "--set", "init_stddev=1e200"}, "diverge"));
  CHECK(r.code == 4);
}

TEST_CASE("pretrain writes a reproducible checkpoint") {
  Workspace ws;
  REQUIRE(invoke(ws.small({"pretrain", "--seed", "3"}, "a")).code == 0);
  REQUIRE(invoke(ws.small({"pretrain", "--seed", "3"}, "b")).code == 0);
  const auto a = slurp(ws.root / "a" / "checkpoint.bin");
  CHECK(a == slurp(ws.root / "b" / "checkpoint.bin"));
  const auto ckpt = load_checkpoint(ws.root / "a" / "checkpoint.bin");
  REQUIRE(ckpt.autoencoder);
  CHECK(ckpt.autoencoder->layer_dims() == std::vector<std::size_t>{6, 32, 32, 64, 4});
  CHECK(serialize(*ckpt.autoencoder) == std::vector<std::uint8_t>(a.begin(), a.end()));
  CHECK(fs::exists(ws.root / "a" / "manifest.txt"));
  CHECK(line_count(ws.root / "a" / "pretrain_loss.csv") == 1 + 4 * 200 + 300);
}

TEST_CASE("cluster arms") {
  Workspace ws;
  REQUIRE(invoke(ws.small({"pretrain", "--seed", "1"}, "ae")).code == 0);
  const std::string ckpt = (ws.root / "ae" / "checkpoint.bin").string();

  SUBCASE("raw k-means baseline is a pass-through") {
    REQUIRE(invoke(ws.small({"cluster", "--baseline", "kmeans", "--k", "3", "--seed", "9"}, "km")).code == 0);
    const auto got = read_assignments(ws.root / "km" / "assignments.csv");
    const auto data = normalize(load_csv(ws.blobs, 6)).dataset;
    const auto expected = kmeans(data.features, 3, KMeansConfig{5, 300}, Rng(9).fork(kKMeansStream));
    CHECK(got == expected.assignments);
    CHECK_FALSE(fs::exists(ws.root / "km" / "history.jsonl"));
  }
  SUBCASE("full refinement, history and frozen ablation") {
    const auto full = invoke(ws.small({"cluster", "--checkpoint", ckpt, "--k", "3", "--seed", "2"}, "dec"));
    REQUIRE(full.code == 0);
    const auto frozen =
        invoke(ws.small({"cluster", "--checkpoint", ckpt, "--k", "3", "--seed", "2", "--freeze-encoder"}, "frozen"));
    REQUIRE(frozen.code == 0);

    const auto labels = *load_csv(ws.blobs, 6).labels;
    const double acc_full = clustering_accuracy(labels, read_assignments(ws.root / "dec" / "assignments.csv"));
    const double acc_frozen = clustering_accuracy(labels, read_assignments(ws.root / "frozen" / "assignments.csv"));
    CHECK(acc_frozen <= acc_full);

    const auto manifest = parse_config_text(slurp(ws.root / "dec" / "manifest.txt"), "m");
    const auto results = slurp(ws.root / "dec" / "manifest.txt");
    const auto pos = results.find("refreshes = ");
    REQUIRE(pos != std::string::npos);
    const std::size_t refreshes = std::stoul(results.substr(pos + 12));
    CHECK(line_count(ws.root / "dec" / "history.jsonl") >= refreshes);
    CHECK(manifest.at("checkpoint") == ckpt);

    const auto model = load_checkpoint(ws.root / "dec" / "checkpoint.bin");
    CHECK(model.kind == CheckpointKind::ClusteringModel);
  }
  SUBCASE("checkpoint of the wrong width is a config error") {
    const auto other = make_blobs(50, 2, 4, 10.0, 1.0, 1);
    write_csv(ws.root / "narrow.csv", other.features, other.labels, true);
    const auto r = invoke({"cluster", "--data", (ws.root / "narrow.csv").string(), "--label-column", "4", "--checkpoint",
                        ckpt, "--k", "2", "--out", (ws.root / "narrow").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("6-dimensional") != std::string::npos);
  }
  SUBCASE("rerun from the manifest reproduces assignments byte for byte") {
    REQUIRE(invoke(ws.small({"cluster", "--checkpoint", ckpt, "--k", "3", "--seed", "5"}, "first")).code == 0);
    const auto manifest = (ws.root / "first" / "manifest.txt").string();
    REQUIRE(invoke({"cluster", "--config", manifest, "--out", (ws.root / "second").string()}).code == 0);
    CHECK(slurp(ws.root / "first" / "assignments.csv") == slurp(ws.root / "second" / "assignments.csv"));
  }
}

TEST_CASE("evaluate") {
  Workspace ws;
  const auto labels = *load_csv(ws.blobs, 6).labels;
  std::vector<int> perfect(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) perfect[i] = (labels[i] + 1) % 3;
  std::ofstream(ws.root / "perfect.csv") << render_assignments(perfect);

  const auto r = invoke({"evaluate", "--data", ws.blobs.string(), "--label-column", "6", "--assignments",
                      (ws.root / "perfect.csv").string(), "--out", (ws.root / "eval").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ACC 1 ") != std::string::npos);
  CHECK(r.out.find("NMI 1\n") != std::string::npos);

  std::vector<int> noisy = perfect;
  for (std::size_t i = 0; i < noisy.size(); i += 7) noisy[i] = 0;
  const auto report = evaluate(labels, noisy);
  CHECK(report.accuracy == clustering_accuracy(labels, noisy));
  CHECK(report.nmi == nmi(labels, noisy));
  CHECK(report.table.total == labels.size());

  CHECK(invoke({"evaluate", "--data", ws.blobs.string(), "--out", (ws.root / "eval").string(), "--assignments",
             (ws.root / "perfect.csv").string()})
            .code == 2);
}

TEST_CASE("select-k") {
  Workspace ws;
  SUBCASE("single candidate") {
    const auto r = invoke(ws.small({"select-k", "--k-range", "4", "--seed", "1"}, "one"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("recommended k = 4") != std::string::npos);
    CHECK(line_count(ws.root / "one" / "select_k.csv") == 2);
  }
  SUBCASE("one row per candidate") {
    const auto r = invoke(ws.small({"select-k", "--k-range", "2..4", "--seed", "1"}, "three"));
    REQUIRE(r.code == 0);
    CHECK(line_count(ws.root / "three" / "select_k.csv") == 4);
  }
}

TEST_CASE("project") {
  Workspace ws;
  REQUIRE(invoke(ws.small({"cluster", "--k", "3", "--seed", "1"}, "run")).code == 0);
  const auto ckpt = (ws.root / "run" / "checkpoint.bin").string();

  SUBCASE("n rows, three columns, cluster ids from the model") {
    REQUIRE(invoke(ws.small({"project", "--checkpoint", ckpt}, "proj")).code == 0);
    const auto proj = load_csv(ws.root / "proj" / "projection.csv");
    CHECK(proj.size() == 300);
    CHECK(proj.dim() == 3);
    const auto assigned = read_assignments(ws.root / "run" / "assignments.csv");
    for (std::size_t i = 0; i < 300; ++i) CHECK(proj.features(i, 2) == assigned[i]);
  }
  SUBCASE("top-2 explained variance matches the covariance eigenvalues") {
    const auto data = normalize(load_csv(ws.blobs, 6)).dataset;
    const auto model = *load_checkpoint(ckpt).model;
    const auto out = project(data, model.encoder, model.centroids, std::nullopt);
    const Matrix z = model.embed(data.features);
    Eigen::MatrixXd e(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) e(static_cast<long>(i), static_cast<long>(j)) = z(i, j);
    const Eigen::MatrixXd centered = e.rowwise() - e.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(z.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const auto n = solver.eigenvalues().size();
    CHECK(out.projection.explained_variance[0] == doctest::Approx(solver.eigenvalues()(n - 1)).epsilon(1e-9));
    CHECK(out.projection.explained_variance[1] == doctest::Approx(solver.eigenvalues()(n - 2)).epsilon(1e-9));
  }
  SUBCASE("2-D embeddings are only rotated") {
    Rng rng(3);
    std::vector<DenseLayer> encoder = {DenseLayer::gaussian(6, 2, Activation::Identity, 1.0, rng)};
    const auto data = normalize(load_csv(ws.blobs, 6)).dataset;
    const auto out = project(data, encoder, std::nullopt, std::nullopt);
    const Matrix z = apply_chain(encoder, data.features);
    for (std::size_t i = 0; i < 300; i += 3)
      for (std::size_t j = i + 1; j < 300; j += 5)
        CHECK(std::abs(squared_distance(out.projection.coordinates.row(i), out.projection.coordinates.row(j)) -
                       squared_distance(z.row(i), z.row(j))) < 1e-9);
    for (int c : out.clusters) CHECK(c == -1);
  }
}

TEST_CASE("make-blobs") {
  Workspace ws;
  const auto path = (ws.root / "gen" / "b.csv").string();
  REQUIRE(invoke({"make-blobs", "--n", "40", "--k", "4", "--dim", "3", "--seed", "2", "--output", path}).code == 0);
  const auto ds = load_csv(path, 3);
  const auto ref = make_blobs(40, 4, 3, 20.0, 1.0, 2);
  CHECK(ds.features == ref.features);
  CHECK(*ds.labels == *ref.labels);
}
