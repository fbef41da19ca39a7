#include "dec/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dec/errors.hpp"

namespace dec {

namespace {

// Student's-t kernel with α degrees of freedom, unnormalized.
double kernel(double sq_dist, double alpha) {
  if (alpha == 1.0) return 1.0 / (1.0 + sq_dist);
  return std::pow(1.0 + sq_dist / alpha, -(alpha + 1.0) / 2.0);
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("alpha must be positive");
}

void require_distribution_shapes(const Matrix& embeddings, const Matrix& centroids,
                                 const Matrix& p, const Matrix& q) {
  require_shape(embeddings.cols() == centroids.cols(), "embedding dim != centroid dim");
  require_shape(p.rows() == embeddings.rows() && p.cols() == centroids.rows(), "P shape mismatch");
  require_shape(q.rows() == embeddings.rows() && q.cols() == centroids.rows(), "Q shape mismatch");
}

}  // namespace

Matrix DecModel::embed(const Matrix& data) const {
  require_shape(!encoder.empty() && data.cols() == input_dim(), "DecModel: data dim != input dim");
  return apply_chain(encoder, data);
}

void DecModel::validate() const {
  if (encoder.empty()) throw ArgumentError("DecModel: empty encoder");
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    encoder[i].validate();
    if (i > 0)
      require_shape(encoder[i].in_dim() == encoder[i - 1].out_dim(),
                    "DecModel: encoder dims do not connect");
  }
  if (centroids.rows() == 0) throw ArgumentError("DecModel: no centroids");
  require_shape(centroids.cols() == embedding_dim(), "DecModel: centroid dim != embedding dim");
  require_alpha(alpha);
  if (!centroids.all_finite()) throw NumericalError("DecModel: non-finite centroid");
}

SoftAssignment soft_assign(const Matrix& embeddings, const Matrix& centroids, double alpha) {
  require_shape(embeddings.cols() == centroids.cols(), "soft_assign: embedding dim != centroid dim");
  if (centroids.rows() == 0) throw ArgumentError("soft_assign: no centroids");
  require_alpha(alpha);
  const std::size_t n = embeddings.rows();
  const std::size_t k = centroids.rows();
  SoftAssignment out{Matrix(n, k)};
  for (std::size_t i = 0; i < n; ++i) {
    auto z = embeddings.row(i);
    auto row = out.q.row(i);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = kernel(squared_distance(z, centroids.row(j)), alpha);
      total += row[j];
    }
    for (double& v : row) v /= total;
  }
  return out;
}

TargetDistribution target_distribution(const SoftAssignment& soft) {
  const Matrix& q = soft.q;
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  TargetDistribution out{Matrix(n, k), std::vector<double>(k, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    auto row = q.row(i);
    for (std::size_t j = 0; j < k; ++j) out.frequencies[j] += row[j];
  }
  for (std::size_t j = 0; j < k; ++j)
    if (!(out.frequencies[j] > 0.0))
      throw DegenerateClusterError("target_distribution: cluster " + std::to_string(j) +
                                       " has zero soft frequency",
                                   j);
  for (std::size_t i = 0; i < n; ++i) {
    auto qrow = q.row(i);
    auto prow = out.p.row(i);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      prow[j] = qrow[j] * qrow[j] / out.frequencies[j];
      total += prow[j];
    }
    for (double& v : prow) v /= total;
  }
  return out;
}

double kl_loss(const Matrix& p, const Matrix& q) {
  require_shape(p.rows() == q.rows() && p.cols() == q.cols(), "kl_loss: P/Q shape mismatch");
  double total = 0.0;
  auto pv = p.values();
  auto qv = q.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] <= 0.0) continue;
    if (qv[i] <= 0.0) return std::numeric_limits<double>::infinity();
    total += pv[i] * std::log(pv[i] / qv[i]);
  }
  return total;
}

std::vector<double> grad_embedding(std::span<const double> z, const Matrix& centroids,
                                   std::span<const double> p_row, std::span<const double> q_row,
                                   double alpha) {
  require_shape(z.size() == centroids.cols(), "grad_embedding: embedding dim != centroid dim");
  require_shape(p_row.size() == centroids.rows() && q_row.size() == centroids.rows(),
                "grad_embedding: distribution length != k");
  require_alpha(alpha);
  const double c = (alpha + 1.0) / alpha;
  std::vector<double> g(z.size(), 0.0);
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    auto mu = centroids.row(j);
    const double w = c * (p_row[j] - q_row[j]) / (1.0 + squared_distance(z, mu) / alpha);
    for (std::size_t d = 0; d < z.size(); ++d) g[d] += w * (z[d] - mu[d]);
  }
  return g;
}

Matrix grad_embeddings(const Matrix& embeddings, const Matrix& centroids, const Matrix& p,
                       const Matrix& q, double alpha) {
  require_distribution_shapes(embeddings, centroids, p, q);
  Matrix out(embeddings.rows(), embeddings.cols());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    auto g = grad_embedding(embeddings.row(i), centroids, p.row(i), q.row(i), alpha);
    std::copy(g.begin(), g.end(), out.row(i).begin());
  }
  return out;
}

Matrix grad_centroids(const Matrix& embeddings, const Matrix& centroids, const Matrix& p,
                      const Matrix& q, double alpha) {
  require_distribution_shapes(embeddings, centroids, p, q);
  require_alpha(alpha);
  const double c = (alpha + 1.0) / alpha;
  const std::size_t dim = centroids.cols();
  Matrix out(centroids.rows(), dim);
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    auto z = embeddings.row(i);
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      auto mu = centroids.row(j);
      const double w = -c * (p(i, j) - q(i, j)) / (1.0 + squared_distance(z, mu) / alpha);
      auto g = out.row(j);
      for (std::size_t d = 0; d < dim; ++d) g[d] += w * (z[d] - mu[d]);
    }
  }
  return out;
}

std::vector<int> hard_assign(const Matrix& q) {
  std::vector<int> out(q.rows(), 0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto row = q.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

DecInit initialize(const StackedAutoencoder& sae, const Matrix& data, std::size_t k,
                   const KMeansConfig& kmeans_config, const Rng& rng) {
  sae.validate();
  const Matrix z = encode(sae, data);
  DecInit init;
  init.kmeans = kmeans(z, k, kmeans_config, rng);
  init.model.encoder = sae.encoder();
  init.model.centroids = init.kmeans.centroids;
  init.model.alpha = 1.0;
  return init;
}

DecModel init_dec(const StackedAutoencoder& sae, const Matrix& data, std::size_t k,
                  const KMeansConfig& kmeans_config, const Rng& rng) {
  return initialize(sae, data, k, kmeans_config, rng).model;
}

void DecTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("DecTrainConfig: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ArgumentError("DecTrainConfig: momentum must lie in [0, 1)");
  if (batch_size == 0) throw ArgumentError("DecTrainConfig: batch_size must be positive");
  if (!(tol_percent > 0.0)) throw ArgumentError("DecTrainConfig: tol_percent must be positive");
  if (!(dead_cluster_mass >= 0.0))
    throw ArgumentError("DecTrainConfig: dead_cluster_mass must be >= 0");
}

namespace {

// Moves every centroid whose soft mass is below threshold onto the embedded
// point farthest from its nearest centroid. Returns true if any moved.
bool reseed_dead_clusters(Matrix& centroids, const Matrix& z, const Matrix& q, double threshold,
                          std::size_t iteration, std::vector<ReseedEvent>& log) {
  const std::size_t k = centroids.rows();
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) mass[j] += q(i, j);

  bool moved = false;
  std::vector<bool> taken(z.rows(), false);
  for (std::size_t j = 0; j < k; ++j) {
    if (mass[j] >= threshold && mass[j] > 0.0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      if (taken[i]) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c)
        nearest = std::min(nearest, squared_distance(z.row(i), centroids.row(c)));
      if (nearest > far_d) {
        far_d = nearest;
        far = i;
      }
    }
    taken[far] = true;
    std::copy_n(z.row(far).begin(), z.cols(), centroids.row(j).begin());
    log.push_back({iteration, j, far, mass[j]});
    moved = true;
  }
  return moved;
}

void scale_in_place(Matrix& m, double s) {
  for (double& v : m.values()) v *= s;
}

}  // namespace

DecTrainResult train(DecModel model, const Matrix& data, const DecTrainConfig& config, Rng& rng,
                     const RefreshObserver& observer) {
  model.validate();
  config.validate();
  if (data.rows() == 0) throw ArgumentError("train: empty dataset");
  require_shape(data.cols() == model.input_dim(), "train: data dim != encoder input dim");

  const std::size_t n = data.rows();
  const std::size_t batch = config.batch_size;
  const std::size_t epoch_iters = (n + batch - 1) / batch;
  const std::size_t refresh_every =
      config.target_refresh_interval == 0 ? epoch_iters : config.target_refresh_interval;
  const std::size_t max_iters = config.max_epochs * epoch_iters;
  const double scale = config.scaling == GradientScaling::BatchMean
                           ? 1.0 / static_cast<double>(batch)
                           : static_cast<double>(n) / static_cast<double>(batch);

  const SgdHyper hyper{config.learning_rate, config.momentum, 0.0};
  OptimizerState encoder_opt(hyper);
  OptimizerState centroid_opt(hyper);

  DecTrainResult result;
  std::vector<int> previous;
  std::size_t iteration = 0;
  for (std::size_t refresh = 0;; ++refresh) {
    // Target refresh over the full dataset.
    const Matrix z_all = model.embed(data);
    if (!z_all.all_finite() || !model.centroids.all_finite())
      throw NumericalError("train: non-finite embedding or centroid at iteration " +
                           std::to_string(iteration));
    SoftAssignment q = soft_assign(z_all, model.centroids, model.alpha);
    if (reseed_dead_clusters(model.centroids, z_all, q.q, config.dead_cluster_mass, iteration,
                             result.history.reseeds))
      q = soft_assign(z_all, model.centroids, model.alpha);
    const TargetDistribution target = target_distribution(q);
    std::vector<int> current = hard_assign(q.q);

    RefreshRecord record;
    record.refresh = refresh;
    record.iteration = iteration;
    record.epoch = static_cast<double>(iteration) / static_cast<double>(epoch_iters);
    record.loss = kl_loss(target.p, q.q);
    if (!std::isfinite(record.loss))
      throw NumericalError("train: non-finite KL loss at iteration " + std::to_string(iteration));
    std::size_t changed = 0;
    if (!previous.empty()) {
      for (std::size_t i = 0; i < n; ++i) changed += previous[i] != current[i];
      record.changed_fraction = static_cast<double>(changed) / static_cast<double>(n);
    }
    if (observer) record.accuracy = observer(RefreshView{record, q.q, target.p, current});
    result.history.records.push_back(record);

    const bool converged =
        record.changed_fraction && *record.changed_fraction < config.tol_percent / 100.0;
    if (converged || iteration >= max_iters) {
      result.history.converged = converged;
      result.assignments = std::move(current);
      break;
    }
    previous = std::move(current);

    // Minibatch SGD with P held fixed until the next refresh.
    for (std::size_t step = 0; step < refresh_every && iteration < max_iters; ++step, ++iteration) {
      std::vector<std::size_t> idx(batch);
      for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(n));
      const Matrix p_batch = target.p.gather_rows(idx);

      ChainTrace trace;
      Matrix z_batch;
      if (config.freeze_encoder) {
        z_batch = z_all.gather_rows(idx);
      } else {
        trace = forward_chain(model.encoder, data.gather_rows(idx));
        z_batch = trace.output();
      }
      const SoftAssignment q_batch = soft_assign(z_batch, model.centroids, model.alpha);

      Matrix g_mu = grad_centroids(z_batch, model.centroids, p_batch, q_batch.q, model.alpha);
      scale_in_place(g_mu, scale);
      if (!config.freeze_encoder) {
        Matrix g_z = grad_embeddings(z_batch, model.centroids, p_batch, q_batch.q, model.alpha);
        scale_in_place(g_z, scale);
        const ChainGradients g_theta = backward_chain(model.encoder, trace, g_z);
        auto params = parameter_blocks(model.encoder);
        auto grads = gradient_blocks(g_theta);
        encoder_opt.step(params, grads);
      }
      sgd_step(model.centroids.values(), g_mu.values(), centroid_opt);
    }
  }
  result.history.iterations = iteration;
  if (!model.centroids.all_finite()) throw NumericalError("train: non-finite centroids");
  result.model = std::move(model);
  return result;
}

double clustering_loss(const DecModel& model, const Matrix& data) {
  const SoftAssignment q = soft_assign(model.embed(data), model.centroids, model.alpha);
  return kl_loss(target_distribution(q).p, q.q);
}

}  // namespace dec
