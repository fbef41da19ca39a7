#include "pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dec/errors.hpp"

namespace dec::cli {

namespace {

std::vector<std::string> split_paths(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

bool looks_like_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char magic[4] = {};
  in.read(reinterpret_cast<char*>(magic), 4);
  return in.gcount() == 4 && magic[0] == 0 && magic[1] == 0 && magic[2] == 8 && magic[3] == 3;
}

Dataset load_one(const std::string& path, const std::string& labels, const RunConfig& config) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset '" + path + "' does not exist");
  const bool idx = config.format == "idx" || (config.format == "auto" && looks_like_idx(path));
  if (idx) {
    if (labels.empty()) return load_idx(path);
    if (!std::filesystem::exists(labels)) throw ConfigError("label file '" + labels + "' does not exist");
    return load_idx(path, std::filesystem::path(labels));
  }
  return load_csv(path, config.label_column);
}

}  // namespace

LoadedData load_data(const RunConfig& config) {
  const auto paths = split_paths(config.data);
  if (paths.empty()) throw ConfigError("no dataset given (use --data)");
  const auto label_paths = split_paths(config.labels);
  if (!label_paths.empty() && label_paths.size() != paths.size())
    throw ConfigError("--labels must name one file per --data file");

  Dataset data = load_one(paths[0], label_paths.empty() ? "" : label_paths[0], config);
  for (std::size_t i = 1; i < paths.size(); ++i)
    data = concatenate(data, load_one(paths[i], label_paths.empty() ? "" : label_paths[i], config));
  data.validate();

  LoadedData out;
  if (config.normalize) {
    auto normalized = normalize(std::move(data));
    out.dataset = std::move(normalized.dataset);
    out.scale = normalized.scale;
  } else {
    out.dataset = std::move(data);
  }
  return out;
}

PretrainOutcome pretrain(const Matrix& features, const RunConfig& config) {
  const PretrainConfig pc = config.pretrain_for(features.cols());
  Rng rng = Rng(config.seed).fork(kPretrainStream);
  auto greedy = greedy_pretrain_traced(features, pc, rng);
  auto tuned = finetune(std::move(greedy.sae), features, pc, rng);
  return {std::move(tuned.sae), std::move(greedy.loss_traces), std::move(tuned.loss_trace)};
}

ClusterOutcome cluster(const Dataset& data, const StackedAutoencoder* sae, const RunConfig& config) {
  if (config.k == 0) throw ConfigError("k must be positive");
  if (config.k > data.size())
    throw ConfigError("k = " + std::to_string(config.k) + " exceeds the number of points (" +
                      std::to_string(data.size()) + ")");
  const Rng kmeans_rng = Rng(config.seed).fork(kKMeansStream);

  ClusterOutcome out;
  if (config.baseline == Baseline::KMeans) {
    out.kmeans = kmeans(data.features, config.k, config.kmeans, kmeans_rng);
    out.assignments = out.kmeans.assignments;
  } else {
    if (sae == nullptr) throw ConfigError("this arm needs an autoencoder checkpoint");
    if (sae->input_dim() != data.dim())
      throw ConfigError("checkpoint expects " + std::to_string(sae->input_dim()) +
                        "-dimensional input but the data has " + std::to_string(data.dim()) + " columns");
    auto init = initialize(*sae, data.features, config.k, config.kmeans, kmeans_rng);
    out.kmeans = init.kmeans;
    if (data.labels) out.initial_accuracy = clustering_accuracy(*data.labels, init.kmeans.assignments);
    if (config.baseline == Baseline::AeKMeans) {
      out.assignments = init.kmeans.assignments;
      out.model = std::move(init.model);
    } else {
      DecTrainConfig tc = config.dec;
      tc.freeze_encoder = config.freeze_encoder;
      Rng rng = Rng(config.seed).fork(kRefineStream);
      RefreshObserver observer;
      if (data.labels)
        observer = [&](const RefreshView& view) -> std::optional<double> {
          return clustering_accuracy(*data.labels, view.assignments);
        };
      auto result = train(init.model, data.features, tc, rng, observer);
      out.assignments = std::move(result.assignments);
      out.model = std::move(result.model);
      out.history = std::move(result.history);
    }
  }
  if (data.labels) {
    out.accuracy = clustering_accuracy(*data.labels, out.assignments);
    out.nmi = nmi(*data.labels, out.assignments);
  }
  return out;
}

SelectKOutcome select_k(const Dataset& data, const StackedAutoencoder* sae, const RunConfig& config) {
  if (config.k_range.empty()) throw ConfigError("empty k range");
  const auto parts = split(data, {config.train_fraction, config.seed});

  std::optional<StackedAutoencoder> trained;
  if (sae == nullptr) {
    trained = pretrain(parts.train.features, config).sae;
    sae = &*trained;
  }

  SelectKOutcome out;
  out.train_size = parts.train.size();
  out.validation_size = parts.validation.size();
  std::vector<double> g;
  for (std::size_t k : config.k_range) {
    RunConfig rc = config;
    rc.k = k;
    rc.baseline = Baseline::None;
    const auto fitted = cluster(parts.train, sae, rc);
    SelectKRow row;
    row.k = k;
    row.train_loss = clustering_loss(*fitted.model, parts.train.features) / static_cast<double>(parts.train.size());
    row.validation_loss =
        clustering_loss(*fitted.model, parts.validation.features) / static_cast<double>(parts.validation.size());
    row.generalizability = generalizability(row.train_loss, row.validation_loss);
    if (data.labels) {
      const auto q = soft_assign(fitted.model->embed(data.features), fitted.model->centroids, fitted.model->alpha);
      row.nmi = nmi(*data.labels, hard_assign(q.q));
    }
    g.push_back(row.generalizability);
    out.rows.push_back(row);
  }
  out.recommended = recommend_cluster_count(config.k_range, g);
  return out;
}

ProjectOutcome project(const Dataset& data, const std::vector<DenseLayer>& encoder,
                       const std::optional<Matrix>& centroids,
                       const std::optional<std::vector<int>>& assignments) {
  if (encoder.empty() || encoder.front().in_dim() != data.dim())
    throw ConfigError("checkpoint input width does not match the data (" + std::to_string(data.dim()) +
                      " columns)");
  const Matrix z = apply_chain(encoder, data.features);
  ProjectOutcome out;
  out.projection = pca(z, std::min<std::size_t>(2, z.cols()));
  if (assignments) {
    if (assignments->size() != data.size())
      throw ConfigError("assignments cover " + std::to_string(assignments->size()) + " points, data has " +
                        std::to_string(data.size()));
    out.clusters = *assignments;
  } else if (centroids) {
    out.clusters = hard_assign(soft_assign(z, *centroids, 1.0).q);
  } else {
    out.clusters.assign(data.size(), -1);
  }
  return out;
}

EvaluationReport evaluate(const std::vector<int>& labels, const std::vector<int>& assignments) {
  if (labels.size() != assignments.size())
    throw ConfigError("labels cover " + std::to_string(labels.size()) + " points, assignments cover " +
                      std::to_string(assignments.size()));
  EvaluationReport r;
  r.n = labels.size();
  r.accuracy = clustering_accuracy(labels, assignments);
  r.nmi = nmi(labels, assignments);
  r.table = ContingencyTable::build(labels, assignments);
  r.mapping = best_mapping(r.table);
  return r;
}

std::string render_assignments(const std::vector<int>& assignments) {
  std::string out = "index,cluster\n";
  for (std::size_t i = 0; i < assignments.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(assignments[i]) + "\n";
  return out;
}

std::vector<int> read_assignments(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("assignments file '" + path.string() + "' does not exist");
  const auto table = load_csv(path);
  if (table.dim() != 2)
    throw FormatError(path.string() + ": expected columns index,cluster", FormatError::Position::Line, 1);
  std::vector<int> out(table.size(), -1);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double index = table.features(i, 0);
    const double cluster = table.features(i, 1);
    if (index < 0 || index >= static_cast<double>(out.size()) || index != std::floor(index) || cluster < 0 ||
        cluster != std::floor(cluster) || out[static_cast<std::size_t>(index)] != -1)
      throw FormatError(path.string() + ": bad index or cluster id", FormatError::Position::Line, i + 2);
    out[static_cast<std::size_t>(index)] = static_cast<int>(cluster);
  }
  return out;
}

}  // namespace dec::cli
