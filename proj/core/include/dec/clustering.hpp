#pragma once

// Deep embedded clustering: Student's-t soft assignment, the sharpened
// self-training target, the KL objective with its closed-form gradients,
// and the joint encoder/centroid refinement loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dec/autoencoder.hpp"
#include "dec/kmeans.hpp"
#include "dec/matrix.hpp"
#include "dec/nn.hpp"
#include "dec/rng.hpp"

namespace dec {

/// n × k row-stochastic matrix of cluster membership probabilities.
struct SoftAssignment {
  Matrix q;
};

struct TargetDistribution {
  Matrix p;
  std::vector<double> frequencies;  ///< f_j = Σ_i q_ij
};

struct DecModel {
  std::vector<DenseLayer> encoder;
  Matrix centroids;  ///< k × embedding_dim
  double alpha = 1.0;

  std::size_t cluster_count() const noexcept { return centroids.rows(); }
  std::size_t input_dim() const { return encoder.front().in_dim(); }
  std::size_t embedding_dim() const { return encoder.back().out_dim(); }

  Matrix embed(const Matrix& data) const;
  void validate() const;

  friend bool operator==(const DecModel&, const DecModel&) = default;
};

/// q_ij ∝ (1 + ‖z_i − μ_j‖²/α)^(−(α+1)/2), normalized per row.
SoftAssignment soft_assign(const Matrix& embeddings, const Matrix& centroids, double alpha);

/// p_ij ∝ q_ij² / f_j, normalized per row. Throws DegenerateClusterError if
/// some f_j is not strictly positive.
TargetDistribution target_distribution(const SoftAssignment& q);

/// KL(P‖Q) = Σ_ij p_ij log(p_ij / q_ij), with 0·log 0 = 0. Returns +inf when
/// some q_ij = 0 where p_ij > 0.
double kl_loss(const Matrix& p, const Matrix& q);

/// ∂L/∂z_i for one point with P held constant.
std::vector<double> grad_embedding(std::span<const double> z, const Matrix& centroids,
                                   std::span<const double> p_row, std::span<const double> q_row,
                                   double alpha);

/// ∂L/∂z for every row of `embeddings` (n × z).
Matrix grad_embeddings(const Matrix& embeddings, const Matrix& centroids, const Matrix& p,
                       const Matrix& q, double alpha);

/// ∂L/∂μ (k × z) with P held constant.
Matrix grad_centroids(const Matrix& embeddings, const Matrix& centroids, const Matrix& p,
                      const Matrix& q, double alpha);

/// Row-wise argmax; ties go to the lower index.
std::vector<int> hard_assign(const Matrix& q);

struct DecInit {
  DecModel model;
  KMeansResult kmeans;  ///< the AE+k-means baseline on the embedded data
};

/// Encoder from `sae`, centroids from best-of-restarts k-means on the
/// embedded data.
DecInit initialize(const StackedAutoencoder& sae, const Matrix& data, std::size_t k,
                   const KMeansConfig& kmeans_config, const Rng& rng);
DecModel init_dec(const StackedAutoencoder& sae, const Matrix& data, std::size_t k,
                  const KMeansConfig& kmeans_config, const Rng& rng);

/// How a minibatch gradient is scaled before the SGD step.
enum class GradientScaling {
  BatchMean,   ///< 1/batch: optimizes the per-point mean of L
  DatasetSum,  ///< n/batch: optimizes L summed over the dataset
};

struct DecTrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 256;
  double tol_percent = 0.1;
  /// Iterations between target refreshes; 0 means one epoch, ⌈n/batch⌉.
  std::size_t target_refresh_interval = 0;
  std::size_t max_epochs = 200;
  bool freeze_encoder = false;
  GradientScaling scaling = GradientScaling::BatchMean;
  /// A cluster whose soft mass f_j falls below this is re-seeded.
  double dead_cluster_mass = 1e-6;

  void validate() const;
};

struct RefreshRecord {
  std::size_t refresh = 0;
  std::size_t iteration = 0;
  double epoch = 0.0;
  double loss = 0.0;
  /// Fraction of points whose hard assignment changed since the previous
  /// refresh; empty at the first refresh.
  std::optional<double> changed_fraction;
  std::optional<double> accuracy;
};

struct ReseedEvent {
  std::size_t iteration = 0;
  std::size_t cluster = 0;
  std::size_t point = 0;
  double mass = 0.0;
};

/// Read-only view handed to an observer at every target refresh.
struct RefreshView {
  const RefreshRecord& record;
  const Matrix& q;
  const Matrix& p;
  std::span<const int> assignments;
};

/// Called at every refresh. May return an accuracy figure (computed by the
/// caller from labels the trainer never sees) to be stored in the history.
using RefreshObserver = std::function<std::optional<double>(const RefreshView&)>;

struct DecHistory {
  std::vector<RefreshRecord> records;
  std::vector<ReseedEvent> reseeds;
  std::size_t iterations = 0;
  bool converged = false;
};

struct DecTrainResult {
  DecModel model;
  DecHistory history;
  std::vector<int> assignments;
};

/// Alternates full-dataset target refreshes with minibatch SGD on KL(P‖Q).
/// Stops when fewer than tol_percent % of points change hard assignment
/// between consecutive refreshes, or after max_epochs. With freeze_encoder
/// only the centroids move.
DecTrainResult train(DecModel model, const Matrix& data, const DecTrainConfig& config, Rng& rng,
                     const RefreshObserver& observer = {});

/// KL(P‖Q) on `data`, with P computed from the model's own Q on that data.
double clustering_loss(const DecModel& model, const Matrix& data);

}  // namespace dec
