#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dec/matrix.hpp"
#include "dec/nn.hpp"
#include "dec/rng.hpp"

namespace dec {

/// Hyperparameters for greedy layer-wise pretraining and end-to-end
/// finetuning. Defaults are the full-scale values; see `desk()` for a
/// reduced schedule that runs in seconds.
struct PretrainConfig {
  std::vector<std::size_t> layer_dims;  ///< input dim first, embedding dim last
  double dropout_rate = 0.2;
  std::size_t iters_per_layer = 50000;
  std::size_t finetune_iters = 100000;
  std::size_t batch_size = 256;
  double lr_initial = 0.1;
  std::size_t lr_drop_every = 20000;
  double lr_drop_factor = 10.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double init_stddev = 0.01;

  /// d-500-500-2000-10, 50k iterations per layer, 100k finetune.
  static PretrainConfig paper(std::size_t input_dim);
  /// d-64-64-256-10 with a short schedule for small synthetic data: 1000
  /// iterations per layer, 2000 finetune, batch 128, lr 0.05.
  static PretrainConfig desk(std::size_t input_dim);

  /// Learning rate in effect at a 0-based iteration of one training phase.
  double learning_rate_at(std::size_t iteration) const;

  void validate() const;
};

/// One denoising autoencoder: encode then decode, each side optionally
/// corrupted by dropout during its own training.
struct DenoisingPair {
  DenseLayer encode;
  DenseLayer decode;
  double input_dropout_rate = 0.0;
  double hidden_dropout_rate = 0.0;

  /// Builds pair `index` of a stack with `pair_count` pairs. Activations are
  /// ReLU except the decoder of the first pair and the encoder of the last.
  static DenoisingPair make(std::size_t in_dim, std::size_t out_dim, std::size_t index,
                            std::size_t pair_count, const PretrainConfig& config, Rng& rng);

  void validate() const;
};

struct PairTrainResult {
  DenoisingPair pair;
  std::vector<double> loss_trace;  ///< per-iteration minibatch loss
};

/// Mean over the batch of per-sample squared reconstruction error.
double reconstruction_loss(const Matrix& target, const Matrix& reconstruction);

/// Trains one pair by minibatch SGD on ||x - y||^2 with the step schedule
/// from `config`. Minibatches are drawn uniformly with replacement.
PairTrainResult pretrain_layer(DenoisingPair pair, const Matrix& inputs,
                               const PretrainConfig& config, Rng& rng);

class StackedAutoencoder {
 public:
  StackedAutoencoder() = default;
  StackedAutoencoder(std::vector<DenseLayer> encoder, std::vector<DenseLayer> decoder);

  /// Encoders in training order, decoders in reverse training order.
  static StackedAutoencoder from_pairs(std::vector<DenoisingPair> pairs);

  const std::vector<DenseLayer>& encoder() const noexcept { return encoder_; }
  const std::vector<DenseLayer>& decoder() const noexcept { return decoder_; }
  std::vector<DenseLayer>& encoder() noexcept { return encoder_; }
  std::vector<DenseLayer>& decoder() noexcept { return decoder_; }

  std::vector<std::size_t> layer_dims() const;
  std::size_t input_dim() const { return encoder_.front().in_dim(); }
  std::size_t embedding_dim() const { return encoder_.back().out_dim(); }

  /// Encoder followed by decoder, as one chain.
  std::vector<DenseLayer> chain() const;

  /// Checks mirrored dimensions and the activation rule. Throws ShapeError /
  /// ArgumentError on violation.
  void validate() const;

  friend bool operator==(const StackedAutoencoder&, const StackedAutoencoder&) = default;

 private:
  std::vector<DenseLayer> encoder_;
  std::vector<DenseLayer> decoder_;
};

/// The activation rule for a stack of `pair_count` pairs.
Activation encoder_activation(std::size_t pair, std::size_t pair_count) noexcept;
Activation decoder_activation(std::size_t pair, std::size_t pair_count) noexcept;

struct GreedyResult {
  StackedAutoencoder sae;
  std::vector<std::vector<double>> loss_traces;  ///< one per pair
};

/// Trains pairs in sequence, each on the clean (dropout-free) codes of the
/// previous encoder, then assembles the deep autoencoder.
GreedyResult greedy_pretrain_traced(const Matrix& data, const PretrainConfig& config, Rng& rng);
StackedAutoencoder greedy_pretrain(const Matrix& data, const PretrainConfig& config, Rng& rng);

struct FinetuneResult {
  StackedAutoencoder sae;
  std::vector<double> loss_trace;
};

/// End-to-end reconstruction training with dropout disabled.
FinetuneResult finetune(StackedAutoencoder sae, const Matrix& data, const PretrainConfig& config,
                        Rng& rng);

/// Deterministic pass through the encoder layers only.
Matrix encode(const StackedAutoencoder& sae, const Matrix& data);
Matrix reconstruct(const StackedAutoencoder& sae, const Matrix& data);
double reconstruction_loss(const StackedAutoencoder& sae, const Matrix& data);

}  // namespace dec
