#include "dec/autoencoder.hpp"

#include <cmath>
#include <string>

#include "dec/errors.hpp"

namespace dec {

namespace {

Matrix sample_batch(const Matrix& data, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(data.rows()));
  return data.gather_rows(idx);
}

// d/dy of the batch-mean squared error.
Matrix reconstruction_grad(const Matrix& target, const Matrix& reconstruction) {
  Matrix g(target.rows(), target.cols());
  const double scale = 2.0 / static_cast<double>(target.rows());
  auto gv = g.values();
  auto t = target.values();
  auto y = reconstruction.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = scale * (y[i] - t[i]);
  return g;
}

void check_finite(double loss, const char* phase, std::size_t iteration) {
  if (!std::isfinite(loss))
    throw NumericalError(std::string(phase) + ": non-finite reconstruction loss at iteration " +
                         std::to_string(iteration));
}

}  // namespace

PretrainConfig PretrainConfig::paper(std::size_t input_dim) {
  PretrainConfig c;
  c.layer_dims = {input_dim, 500, 500, 2000, 10};
  return c;
}

PretrainConfig PretrainConfig::desk(std::size_t input_dim) {
  PretrainConfig c;
  c.layer_dims = {input_dim, 64, 64, 256, 10};
  c.iters_per_layer = 1000;
  c.finetune_iters = 2000;
  c.batch_size = 128;
  c.lr_initial = 0.05;
  c.lr_drop_every = 800;
  return c;
}

double PretrainConfig::learning_rate_at(std::size_t iteration) const {
  if (lr_drop_every == 0) return lr_initial;
  const auto drops = static_cast<double>(iteration / lr_drop_every);
  return lr_initial / std::pow(lr_drop_factor, drops);
}

void PretrainConfig::validate() const {
  if (layer_dims.size() < 2) throw ArgumentError("PretrainConfig: need at least two layer dims");
  for (auto d : layer_dims)
    if (d == 0) throw ArgumentError("PretrainConfig: layer dims must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ArgumentError("PretrainConfig: dropout_rate must lie in [0, 1)");
  if (batch_size == 0) throw ArgumentError("PretrainConfig: batch_size must be positive");
  if (!(lr_initial > 0.0)) throw ArgumentError("PretrainConfig: lr_initial must be positive");
  if (!(lr_drop_factor > 0.0)) throw ArgumentError("PretrainConfig: lr_drop_factor must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ArgumentError("PretrainConfig: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ArgumentError("PretrainConfig: weight_decay must be >= 0");
  if (!(init_stddev > 0.0)) throw ArgumentError("PretrainConfig: init_stddev must be positive");
}

Activation encoder_activation(std::size_t pair, std::size_t pair_count) noexcept {
  return pair + 1 == pair_count ? Activation::Identity : Activation::ReLU;
}

Activation decoder_activation(std::size_t pair, std::size_t /*pair_count*/) noexcept {
  return pair == 0 ? Activation::Identity : Activation::ReLU;
}

DenoisingPair DenoisingPair::make(std::size_t in_dim, std::size_t out_dim, std::size_t index,
                                  std::size_t pair_count, const PretrainConfig& config, Rng& rng) {
  DenoisingPair pair;
  pair.encode = DenseLayer::gaussian(in_dim, out_dim, encoder_activation(index, pair_count),
                                     config.init_stddev, rng);
  pair.decode = DenseLayer::gaussian(out_dim, in_dim, decoder_activation(index, pair_count),
                                     config.init_stddev, rng);
  pair.input_dropout_rate = config.dropout_rate;
  pair.hidden_dropout_rate = config.dropout_rate;
  return pair;
}

void DenoisingPair::validate() const {
  encode.validate();
  decode.validate();
  require_shape(decode.out_dim() == encode.in_dim() && decode.in_dim() == encode.out_dim(),
                "DenoisingPair: decoder does not mirror encoder");
}

double reconstruction_loss(const Matrix& target, const Matrix& reconstruction) {
  require_shape(target.rows() == reconstruction.rows() && target.cols() == reconstruction.cols(),
                "reconstruction_loss: shape mismatch");
  if (target.rows() == 0) return 0.0;
  double total = 0.0;
  auto t = target.values();
  auto y = reconstruction.values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = t[i] - y[i];
    total += d * d;
  }
  return total / static_cast<double>(target.rows());
}

PairTrainResult pretrain_layer(DenoisingPair pair, const Matrix& inputs,
                               const PretrainConfig& config, Rng& rng) {
  pair.validate();
  if (inputs.rows() == 0) throw ArgumentError("pretrain_layer: empty dataset");
  require_shape(inputs.cols() == pair.encode.in_dim(), "pretrain_layer: input dim mismatch");

  PairTrainResult result;
  result.loss_trace.reserve(config.iters_per_layer);
  OptimizerState opt({config.lr_initial, config.momentum, config.weight_decay});
  DenseLayer* layers[2] = {&pair.encode, &pair.decode};

  for (std::size_t it = 0; it < config.iters_per_layer; ++it) {
    const Matrix x = sample_batch(inputs, config.batch_size, rng);
    const Matrix in_mask = dropout_mask(x.rows(), x.cols(), pair.input_dropout_rate, rng);
    const Matrix x_tilde = hadamard(x, in_mask);
    const Matrix h = forward(pair.encode, x_tilde);
    const Matrix h_mask = dropout_mask(h.rows(), h.cols(), pair.hidden_dropout_rate, rng);
    const Matrix h_tilde = hadamard(h, h_mask);
    const Matrix y = forward(pair.decode, h_tilde);

    const double loss = reconstruction_loss(x, y);
    check_finite(loss, "pretrain_layer", it);
    result.loss_trace.push_back(loss);

    auto g_dec = backward(pair.decode, h_tilde, y, reconstruction_grad(x, y));
    auto g_enc = backward(pair.encode, x_tilde, h, hadamard(g_dec.input, h_mask));

    opt.hyper().learning_rate = config.learning_rate_at(it);
    const std::span<double> params[4] = {layers[0]->weights.values(), layers[0]->bias,
                                         layers[1]->weights.values(), layers[1]->bias};
    const std::span<const double> grads[4] = {g_enc.weights.values(), g_enc.bias,
                                              g_dec.weights.values(), g_dec.bias};
    opt.step(params, grads);
  }
  result.pair = std::move(pair);
  return result;
}

StackedAutoencoder::StackedAutoencoder(std::vector<DenseLayer> encoder,
                                       std::vector<DenseLayer> decoder)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  validate();
}

StackedAutoencoder StackedAutoencoder::from_pairs(std::vector<DenoisingPair> pairs) {
  std::vector<DenseLayer> enc;
  std::vector<DenseLayer> dec;
  for (auto& p : pairs) enc.push_back(std::move(p.encode));
  for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) dec.push_back(std::move(it->decode));
  return StackedAutoencoder(std::move(enc), std::move(dec));
}

std::vector<std::size_t> StackedAutoencoder::layer_dims() const {
  std::vector<std::size_t> dims;
  if (encoder_.empty()) return dims;
  dims.push_back(encoder_.front().in_dim());
  for (const auto& l : encoder_) dims.push_back(l.out_dim());
  return dims;
}

std::vector<DenseLayer> StackedAutoencoder::chain() const {
  std::vector<DenseLayer> all = encoder_;
  all.insert(all.end(), decoder_.begin(), decoder_.end());
  return all;
}

void StackedAutoencoder::validate() const {
  if (encoder_.empty()) throw ArgumentError("StackedAutoencoder: no layers");
  require_shape(encoder_.size() == decoder_.size(),
                "StackedAutoencoder: encoder/decoder layer counts differ");
  const std::size_t n = encoder_.size();
  for (std::size_t i = 0; i < n; ++i) {
    encoder_[i].validate();
    decoder_[i].validate();
    if (i > 0)
      require_shape(encoder_[i].in_dim() == encoder_[i - 1].out_dim(),
                    "StackedAutoencoder: encoder chain dims do not connect");
    // decoder_[i] inverts encoder_[n-1-i]
    const auto& e = encoder_[n - 1 - i];
    require_shape(decoder_[i].in_dim() == e.out_dim() && decoder_[i].out_dim() == e.in_dim(),
                  "StackedAutoencoder: decoder dims are not the mirror of encoder dims");
    if (encoder_[i].activation != encoder_activation(i, n) ||
        decoder_[n - 1 - i].activation != decoder_activation(i, n))
      throw ArgumentError("StackedAutoencoder: activation rule violated at pair " +
                          std::to_string(i));
  }
}

GreedyResult greedy_pretrain_traced(const Matrix& data, const PretrainConfig& config, Rng& rng) {
  config.validate();
  if (data.rows() == 0) throw ArgumentError("greedy_pretrain: empty dataset");
  require_shape(data.cols() == config.layer_dims.front(), "greedy_pretrain: data dim != layer_dims[0]");

  const std::size_t pair_count = config.layer_dims.size() - 1;
  std::vector<DenoisingPair> pairs;
  GreedyResult result;
  Matrix inputs = data;
  for (std::size_t i = 0; i < pair_count; ++i) {
    Rng stage = rng.fork(i);
    auto pair = DenoisingPair::make(config.layer_dims[i], config.layer_dims[i + 1], i, pair_count,
                                    config, stage);
    auto trained = pretrain_layer(std::move(pair), inputs, config, stage);
    if (i + 1 < pair_count) inputs = forward(trained.pair.encode, inputs);
    result.loss_traces.push_back(std::move(trained.loss_trace));
    pairs.push_back(std::move(trained.pair));
  }
  // Advance the caller's generator so subsequent draws differ from the stages.
  rng.next_u64();
  result.sae = StackedAutoencoder::from_pairs(std::move(pairs));
  return result;
}

StackedAutoencoder greedy_pretrain(const Matrix& data, const PretrainConfig& config, Rng& rng) {
  return greedy_pretrain_traced(data, config, rng).sae;
}

FinetuneResult finetune(StackedAutoencoder sae, const Matrix& data, const PretrainConfig& config,
                        Rng& rng) {
  sae.validate();
  require_shape(data.cols() == sae.input_dim(), "finetune: data dim != autoencoder input dim");
  FinetuneResult result;
  if (config.finetune_iters == 0) {
    result.sae = std::move(sae);
    return result;
  }
  if (data.rows() == 0) throw ArgumentError("finetune: empty dataset");

  std::vector<DenseLayer> layers = sae.chain();
  const std::size_t depth = sae.encoder().size();
  OptimizerState opt({config.lr_initial, config.momentum, config.weight_decay});
  result.loss_trace.reserve(config.finetune_iters);

  for (std::size_t it = 0; it < config.finetune_iters; ++it) {
    const Matrix x = sample_batch(data, config.batch_size, rng);
    const ChainTrace trace = forward_chain(layers, x);
    const double loss = reconstruction_loss(x, trace.output());
    check_finite(loss, "finetune", it);
    result.loss_trace.push_back(loss);

    const ChainGradients grads = backward_chain(layers, trace, reconstruction_grad(x, trace.output()));
    opt.hyper().learning_rate = config.learning_rate_at(it);
    auto params = parameter_blocks(layers);
    auto gblocks = gradient_blocks(grads);
    opt.step(params, gblocks);
  }

  std::vector<DenseLayer> enc(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(depth));
  std::vector<DenseLayer> dec(layers.begin() + static_cast<std::ptrdiff_t>(depth), layers.end());
  result.sae = StackedAutoencoder(std::move(enc), std::move(dec));
  return result;
}

Matrix encode(const StackedAutoencoder& sae, const Matrix& data) {
  require_shape(!sae.encoder().empty() && data.cols() == sae.input_dim(),
                "encode: data dim != autoencoder input dim");
  return apply_chain(sae.encoder(), data);
}

Matrix reconstruct(const StackedAutoencoder& sae, const Matrix& data) {
  require_shape(!sae.encoder().empty() && data.cols() == sae.input_dim(),
                "reconstruct: data dim != autoencoder input dim");
  return apply_chain(sae.decoder(), apply_chain(sae.encoder(), data));
}

double reconstruction_loss(const StackedAutoencoder& sae, const Matrix& data) {
  return reconstruction_loss(data, reconstruct(sae, data));
}

}  // namespace dec
