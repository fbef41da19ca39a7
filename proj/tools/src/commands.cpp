#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dec/checkpoint.hpp"
#include "dec/errors.hpp"
#include "pipeline.hpp"
#include "run_config.hpp"

namespace dec::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr const char* kVersion = "0.1.0";

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string real(double v, int precision = 17) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Flags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> sets;
};

RunConfig resolve(const Flags& flags) {
  std::map<std::string, std::string> file;
  if (!flags.config_file.empty()) file = read_config_file(flags.config_file);
  std::string preset = "desk";
  if (auto it = file.find("preset"); it != file.end()) preset = it->second;
  for (const auto& [key, value] : flags.overrides)
    if (key == "preset") preset = value;

  RunConfig config = preset_config(preset);
  for (const auto& [key, value] : file)
    if (key != "preset") apply_setting(config, key, value);
  for (const auto& [key, value] : flags.overrides)
    if (key != "preset") apply_setting(config, key, value);
  for (const auto& assignment : flags.sets) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
  }
  return config;
}

void add_setting(CLI::App* app, Flags& flags, const std::string& name, const std::string& key,
                 const std::string& help) {
  app->add_option_function<std::string>(
      name, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, help);
}

void add_common(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config_file, "Flat key = value config file (a manifest works too)");
  add_setting(app, flags, "--preset", "preset", "paper | desk");
  add_setting(app, flags, "--seed", "seed", "Run seed");
  add_setting(app, flags, "--data", "data", "Dataset path(s), comma-separated to concatenate");
  add_setting(app, flags, "--format", "format", "auto | csv | idx");
  add_setting(app, flags, "--labels", "labels", "IDX label file(s), one per data file");
  add_setting(app, flags, "--label-column", "label_column", "0-based CSV column holding labels");
  add_setting(app, flags, "--out", "out", "Run directory");
  app->add_flag_function(
      "--no-normalize", [&flags](std::int64_t) { flags.overrides.emplace_back("normalize", "false"); },
      "Skip feature normalization");
  app->add_option("--set", flags.sets, "Override any config key: --set key=value");
}

struct Manifest {
  Manifest(std::string cmd, RunConfig cfg) : command(std::move(cmd)), config(std::move(cfg)) {}

  std::string command;
  RunConfig config;
  std::vector<std::pair<std::string, std::string>> run;
  std::vector<std::pair<std::string, std::string>> decisions;
  std::vector<std::pair<std::string, std::string>> results;
  std::vector<std::pair<std::string, std::string>> checksums;
  std::vector<std::pair<std::string, std::string>> timings;

  std::string render() const {
    std::ostringstream s;
    s << "# deepcluster " << kVersion << " run manifest\n"
      << "# rerun: deepcluster " << command << " --config manifest.txt --out <dir>\n";
    auto section = [&s](const char* name, const std::vector<std::pair<std::string, std::string>>& kv) {
      if (kv.empty()) return;
      s << "\n[" << name << "]\n";
      for (const auto& [k, v] : kv) s << k << " = " << v << "\n";
    };
    section("config", render_settings(config));
    section("run", run);
    section("decisions", decisions);
    section("results", results);
    section("checksums", checksums);
    section("timings", timings);
    return s.str();
  }
};

class RunDir {
 public:
  explicit RunDir(const RunConfig& config) : path_(config.out) {
    if (path_.empty()) throw ConfigError("empty output directory");
    fs::create_directories(path_);
  }

  fs::path file(const std::string& name) const { return path_ / name; }

  void write(Manifest& manifest, const std::string& name, const std::string& text) {
    write_file_atomic(file(name), text);
    manifest.checksums.emplace_back(name, "fnv1a64:" + hex64(file_checksum(file(name))));
  }

  void write_checkpoint(Manifest& manifest, const std::string& name, const auto& object) {
    save_checkpoint(file(name), object);
    manifest.checksums.emplace_back(name, "fnv1a64:" + hex64(file_checksum(file(name))));
  }

  void finish(const Manifest& manifest) { write_file_atomic(file("manifest.txt"), manifest.render()); }

 private:
  fs::path path_;
};

void describe_data(Manifest& m, const LoadedData& data) {
  m.run.emplace_back("points", std::to_string(data.dataset.size()));
  m.run.emplace_back("input_dim", std::to_string(data.dataset.dim()));
  m.run.emplace_back("labels", data.dataset.has_labels() ? "present" : "absent");
  m.decisions.emplace_back("normalization_scale", real(data.scale));
}

std::string dims_text(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "-" : "") + std::to_string(dims[i]);
  return s;
}

StackedAutoencoder load_autoencoder(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint '" + path + "' does not exist");
  auto ckpt = load_checkpoint(path);
  if (!ckpt.autoencoder) throw ConfigError("checkpoint '" + path + "' holds a clustering model, not an autoencoder");
  return std::move(*ckpt.autoencoder);
}

std::string render_pretrain_trace(const PretrainOutcome& p) {
  std::ostringstream s;
  s << std::setprecision(10) << "phase,iteration,loss\n";
  for (std::size_t l = 0; l < p.layer_traces.size(); ++l)
    for (std::size_t i = 0; i < p.layer_traces[l].size(); ++i)
      s << "layer" << l << "," << i << "," << p.layer_traces[l][i] << "\n";
  for (std::size_t i = 0; i < p.finetune_trace.size(); ++i) s << "finetune," << i << "," << p.finetune_trace[i] << "\n";
  return s.str();
}

int cmd_pretrain(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  Manifest m{"pretrain", config};
  RunDir dir(config);
  const auto data = load_data(config);
  describe_data(m, data);
  const auto outcome = pretrain(data.dataset.features, config);
  const double loss = reconstruction_loss(outcome.sae, data.dataset.features);

  dir.write_checkpoint(m, "checkpoint.bin", outcome.sae);
  dir.write(m, "pretrain_loss.csv", render_pretrain_trace(outcome));
  m.run.emplace_back("architecture", dims_text(outcome.sae.layer_dims()));
  m.results.emplace_back("reconstruction_loss", real(loss));
  m.timings.emplace_back("total_seconds", real(seconds_since(start), 4));
  dir.finish(m);

  out << "pretrained " << dims_text(outcome.sae.layer_dims()) << " on " << data.dataset.size()
      << " points, reconstruction loss " << real(loss, 6) << "\n"
      << "wrote " << dir.file("checkpoint.bin").string() << "\n";
  return kExitOk;
}

std::string render_history(const DecHistory& history) {
  std::string s;
  for (const auto& r : history.records) {
    nlohmann::ordered_json j;
    j["refresh"] = r.refresh;
    j["iteration"] = r.iteration;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["changed_fraction"] = r.changed_fraction ? nlohmann::ordered_json(*r.changed_fraction) : nullptr;
    if (r.accuracy) j["accuracy"] = *r.accuracy;
    s += j.dump() + "\n";
  }
  for (const auto& e : history.reseeds) {
    nlohmann::ordered_json j;
    j["event"] = "reseed";
    j["iteration"] = e.iteration;
    j["cluster"] = e.cluster;
    j["point"] = e.point;
    j["mass"] = e.mass;
    s += j.dump() + "\n";
  }
  return s;
}

int cmd_cluster(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  Manifest m{"cluster", config};
  RunDir dir(config);
  const auto data = load_data(config);
  describe_data(m, data);
  m.run.emplace_back("arm", config.baseline == Baseline::None
                                ? (config.freeze_encoder ? "dec-frozen-encoder" : "dec")
                                : to_string(config.baseline));

  std::optional<StackedAutoencoder> sae;
  if (config.baseline != Baseline::KMeans) {
    if (!config.checkpoint.empty()) {
      sae = load_autoencoder(config.checkpoint);
    } else {
      const auto t = Clock::now();
      sae = pretrain(data.dataset.features, config).sae;
      m.timings.emplace_back("pretrain_seconds", real(seconds_since(t), 4));
    }
  }

  const auto t = Clock::now();
  const auto outcome = cluster(data.dataset, sae ? &*sae : nullptr, config);
  m.timings.emplace_back("cluster_seconds", real(seconds_since(t), 4));

  dir.write(m, "assignments.csv", render_assignments(outcome.assignments));
  if (outcome.model) dir.write_checkpoint(m, "checkpoint.bin", *outcome.model);
  if (outcome.history) dir.write(m, "history.jsonl", render_history(*outcome.history));

  m.decisions.emplace_back("kmeans_winning_restart", std::to_string(outcome.kmeans.winning_restart));
  m.decisions.emplace_back("kmeans_inertia", real(outcome.kmeans.inertia));
  if (outcome.history) {
    const auto& h = *outcome.history;
    m.decisions.emplace_back("reseed_count", std::to_string(h.reseeds.size()));
    for (std::size_t i = 0; i < h.reseeds.size(); ++i)
      m.decisions.emplace_back("reseed." + std::to_string(i),
                               "iteration " + std::to_string(h.reseeds[i].iteration) + ", cluster " +
                                   std::to_string(h.reseeds[i].cluster) + ", point " +
                                   std::to_string(h.reseeds[i].point));
    m.results.emplace_back("iterations", std::to_string(h.iterations));
    m.results.emplace_back("refreshes", std::to_string(h.records.size()));
    m.results.emplace_back("converged", h.converged ? "true" : "false");
    m.results.emplace_back("final_loss", real(h.records.back().loss));
  }
  if (outcome.initial_accuracy) m.results.emplace_back("initial_accuracy", real(*outcome.initial_accuracy));
  if (outcome.accuracy) m.results.emplace_back("accuracy", real(*outcome.accuracy));
  if (outcome.nmi) m.results.emplace_back("nmi", real(*outcome.nmi));
  m.timings.emplace_back("total_seconds", real(seconds_since(start), 4));
  dir.finish(m);

  out << "clustered " << data.dataset.size() << " points into k = " << config.k << " ("
      << m.run.back().second << ")\n";
  if (outcome.history)
    out << "refinement: " << outcome.history->iterations << " iterations, "
        << (outcome.history->converged ? "converged" : "hit the iteration cap") << "\n";
  if (outcome.initial_accuracy && config.baseline == Baseline::None)
    out << "AE+k-means ACC " << real(*outcome.initial_accuracy, 4) << "\n";
  if (outcome.accuracy) out << "ACC " << real(*outcome.accuracy, 4) << "  NMI " << real(*outcome.nmi, 4) << "\n";
  out << "wrote " << dir.file("assignments.csv").string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out) {
  if (config.assignments.empty()) throw ConfigError("evaluate needs --assignments");
  Manifest m{"evaluate", config};
  RunDir dir(config);
  const auto data = load_data(config);
  if (!data.dataset.labels) throw ConfigError("evaluate needs labelled data (--label-column or --labels)");
  describe_data(m, data);
  const auto assignments = read_assignments(config.assignments);
  const auto report = evaluate(*data.dataset.labels, assignments);

  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["accuracy"] = report.accuracy;
  j["nmi"] = report.nmi;
  j["labels"] = report.table.row_labels;
  j["clusters"] = report.table.col_labels;
  j["contingency"] = report.table.counts;
  j["total"] = report.table.total;
  nlohmann::ordered_json mapping = nlohmann::ordered_json::array();
  for (auto [cluster, label] : report.mapping.cluster_to_label) mapping.push_back({{"cluster", cluster}, {"label", label}});
  j["mapping"] = mapping;
  dir.write(m, "report.json", j.dump(2) + "\n");
  m.results.emplace_back("accuracy", real(report.accuracy));
  m.results.emplace_back("nmi", real(report.nmi));
  dir.finish(m);

  out << "n " << report.n << "  ACC " << real(report.accuracy, 6) << "  NMI " << real(report.nmi, 6) << "\n";
  out << "contingency (rows: labels, columns: clusters)\n      ";
  for (int c : report.table.col_labels) out << std::setw(7) << c;
  out << "\n";
  for (std::size_t r = 0; r < report.table.row_labels.size(); ++r) {
    out << std::setw(6) << report.table.row_labels[r];
    for (auto count : report.table.counts[r]) out << std::setw(7) << count;
    out << "\n";
  }
  return kExitOk;
}

int cmd_select_k(const RunConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  Manifest m{"select-k", config};
  RunDir dir(config);
  const auto data = load_data(config);
  describe_data(m, data);
  std::optional<StackedAutoencoder> sae;
  if (!config.checkpoint.empty()) sae = load_autoencoder(config.checkpoint);
  const auto outcome = select_k(data.dataset, sae ? &*sae : nullptr, config);

  std::ostringstream table;
  table << std::setprecision(17) << "k,train_loss,validation_loss,generalizability,nmi\n";
  for (const auto& r : outcome.rows) {
    table << r.k << "," << r.train_loss << "," << r.validation_loss << "," << r.generalizability << ",";
    if (r.nmi) table << *r.nmi;
    table << "\n";
  }
  dir.write(m, "select_k.csv", table.str());
  m.run.emplace_back("train_points", std::to_string(outcome.train_size));
  m.run.emplace_back("validation_points", std::to_string(outcome.validation_size));
  m.results.emplace_back("recommended_k", std::to_string(outcome.recommended));
  m.timings.emplace_back("total_seconds", real(seconds_since(start), 4));
  dir.finish(m);

  out << "     k          G        NMI\n";
  for (const auto& r : outcome.rows) {
    out << std::setw(6) << r.k << std::setw(11) << std::fixed << std::setprecision(4) << r.generalizability;
    if (r.nmi) out << std::setw(11) << *r.nmi;
    out << std::defaultfloat << "\n";
  }
  out << "recommended k = " << outcome.recommended << "\n";
  return kExitOk;
}

int cmd_project(const RunConfig& config, std::ostream& out) {
  if (config.checkpoint.empty()) throw ConfigError("project needs --checkpoint");
  if (!fs::exists(config.checkpoint)) throw ConfigError("checkpoint '" + config.checkpoint + "' does not exist");
  Manifest m{"project", config};
  RunDir dir(config);
  const auto data = load_data(config);
  describe_data(m, data);
  const auto ckpt = load_checkpoint(config.checkpoint);
  std::optional<Matrix> centroids;
  if (ckpt.model) centroids = ckpt.model->centroids;
  std::optional<std::vector<int>> assignments;
  if (!config.assignments.empty()) assignments = read_assignments(config.assignments);
  const auto outcome = project(data.dataset, ckpt.encoder(), centroids, assignments);

  std::ostringstream csv;
  csv << std::setprecision(17) << "x,y,cluster\n";
  const auto& c = outcome.projection.coordinates;
  for (std::size_t i = 0; i < c.rows(); ++i)
    csv << c(i, 0) << "," << (c.cols() > 1 ? c(i, 1) : 0.0) << "," << outcome.clusters[i] << "\n";
  dir.write(m, "projection.csv", csv.str());
  for (std::size_t j = 0; j < outcome.projection.explained_variance.size(); ++j)
    m.results.emplace_back("explained_variance." + std::to_string(j), real(outcome.projection.explained_variance[j]));
  dir.finish(m);
  out << "wrote " << dir.file("projection.csv").string() << "\n";
  return kExitOk;
}

struct BlobFlags {
  std::size_t n = 1500, k = 3, dim = 10;
  double separation = 20.0, sigma = 1.0;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_make_blobs(const BlobFlags& f, std::ostream& out) {
  const auto ds = make_blobs(f.n, f.k, f.dim, f.separation, f.sigma, f.seed);
  std::ostringstream csv;
  write_csv(csv, ds.features, ds.labels, true);
  if (const auto parent = fs::path(f.output).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_atomic(f.output, csv.str());
  out << "wrote " << f.n << " points (" << f.k << " blobs, " << f.dim << "-d) to " << f.output
      << "; labels in column " << f.dim << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep embedded clustering: autoencoder pretraining, KL refinement, evaluation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Flags flags;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Greedy denoising pretraining then finetuning");
  auto* cluster_cmd = app.add_subcommand("cluster", "k-means initialization then KL refinement, or a baseline");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "ACC, NMI and contingency table for an assignments file");
  auto* select_cmd = app.add_subcommand("select-k", "Generalizability sweep over candidate cluster counts");
  auto* project_cmd = app.add_subcommand("project", "2-D PCA projection of the embeddings");
  auto* blobs_cmd = app.add_subcommand("make-blobs", "Write a synthetic Gaussian-blob dataset as CSV");

  for (auto* cmd : {pretrain_cmd, cluster_cmd, evaluate_cmd, select_cmd, project_cmd}) add_common(cmd, flags);
  for (auto* cmd : {cluster_cmd, select_cmd, project_cmd})
    add_setting(cmd, flags, "--checkpoint", "checkpoint", "Checkpoint to start from");
  add_setting(cluster_cmd, flags, "--k", "k", "Number of clusters");
  add_setting(cluster_cmd, flags, "--baseline", "baseline", "kmeans | ae-kmeans");
  cluster_cmd->add_flag_function(
      "--freeze-encoder", [&flags](std::int64_t) { flags.overrides.emplace_back("freeze_encoder", "true"); },
      "Update only the centroids during refinement");
  add_setting(select_cmd, flags, "--k-range", "k_range", "Candidates, e.g. 2..6 or 3,5,9");
  for (auto* cmd : {evaluate_cmd, project_cmd})
    add_setting(cmd, flags, "--assignments", "assignments", "index,cluster CSV");

  BlobFlags blobs;
  blobs_cmd->add_option("--n", blobs.n, "Points")->capture_default_str();
  blobs_cmd->add_option("--k", blobs.k, "Blobs")->capture_default_str();
  blobs_cmd->add_option("--dim", blobs.dim, "Dimensions")->capture_default_str();
  blobs_cmd->add_option("--separation", blobs.separation, "Minimum center distance")->capture_default_str();
  blobs_cmd->add_option("--sigma", blobs.sigma, "Per-coordinate standard deviation")->capture_default_str();
  blobs_cmd->add_option("--seed", blobs.seed, "Seed")->capture_default_str();
  blobs_cmd->add_option("--output", blobs.output, "CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (blobs_cmd->parsed()) return cmd_make_blobs(blobs, out);
    const RunConfig config = resolve(flags);
    if (pretrain_cmd->parsed()) return cmd_pretrain(config, out);
    if (cluster_cmd->parsed()) return cmd_cluster(config, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(config, out);
    if (select_cmd->parsed()) return cmd_select_k(config, out);
    if (project_cmd->parsed()) return cmd_project(config, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateDataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateClusterError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dec::cli
