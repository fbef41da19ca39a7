#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dec/autoencoder.hpp"
#include "dec/clustering.hpp"
#include "dec/data.hpp"
#include "dec/kmeans.hpp"
#include "dec/metrics.hpp"
#include "dec/pca.hpp"
#include "run_config.hpp"

namespace dec::cli {

// Every phase draws from its own stream of the run seed, so changing one
// phase's schedule leaves the others' random draws untouched.
inline constexpr std::uint64_t kPretrainStream = 1;
inline constexpr std::uint64_t kKMeansStream = 2;
inline constexpr std::uint64_t kRefineStream = 3;

struct LoadedData {
  Dataset dataset;
  double scale = 1.0;  ///< normalization factor applied to the features
};

/// Reads `config.data` (comma-separated paths are concatenated) and
/// normalizes unless disabled.
LoadedData load_data(const RunConfig& config);

struct PretrainOutcome {
  StackedAutoencoder sae;
  std::vector<std::vector<double>> layer_traces;
  std::vector<double> finetune_trace;
};

PretrainOutcome pretrain(const Matrix& features, const RunConfig& config);

struct ClusterOutcome {
  std::vector<int> assignments;
  std::optional<DecModel> model;  ///< absent for the raw k-means baseline
  KMeansResult kmeans;            ///< the baseline itself, or the centroid initialization
  std::optional<DecHistory> history;
  std::optional<double> accuracy;
  std::optional<double> nmi;
  std::optional<double> initial_accuracy;  ///< AE+k-means accuracy before refinement
};

/// Runs the arm selected by `config.baseline`. `sae` is required unless the
/// baseline is raw k-means.
ClusterOutcome cluster(const Dataset& data, const StackedAutoencoder* sae, const RunConfig& config);

struct SelectKRow {
  std::size_t k = 0;
  double train_loss = 0.0;       ///< mean per-point KL on the train split
  double validation_loss = 0.0;  ///< same on the validation split
  double generalizability = 0.0;
  std::optional<double> nmi;     ///< over all points, when labels exist
};

struct SelectKOutcome {
  std::vector<SelectKRow> rows;
  std::size_t recommended = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Trains one model per k on the train split and scores each on both
/// splits. Without `sae` an autoencoder is pretrained on the train split
/// and shared by every k.
SelectKOutcome select_k(const Dataset& data, const StackedAutoencoder* sae, const RunConfig& config);

struct ProjectOutcome {
  Projection projection;
  std::vector<int> clusters;  ///< -1 when no cluster information is available
};

ProjectOutcome project(const Dataset& data, const std::vector<DenseLayer>& encoder,
                       const std::optional<Matrix>& centroids,
                       const std::optional<std::vector<int>>& assignments);

struct EvaluationReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double nmi = 0.0;
  ContingencyTable table;
  AssignmentMapping mapping;
};

EvaluationReport evaluate(const std::vector<int>& labels, const std::vector<int>& assignments);

/// "index,cluster" CSV.
std::string render_assignments(const std::vector<int>& assignments);
std::vector<int> read_assignments(const std::filesystem::path& path);

}  // namespace dec::cli
