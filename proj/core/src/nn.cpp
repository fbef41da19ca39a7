#include "dec/nn.hpp"

#include <string>

#include "dec/errors.hpp"

namespace dec {

std::string_view to_string(Activation a) noexcept {
  return a == Activation::ReLU ? "relu" : "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "identity") return Activation::Identity;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

DenseLayer DenseLayer::gaussian(std::size_t in_dim, std::size_t out_dim, Activation activation,
                                double stddev, Rng& rng) {
  if (in_dim == 0 || out_dim == 0) throw ArgumentError("DenseLayer: dimensions must be positive");
  DenseLayer layer{Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0), activation};
  for (double& w : layer.weights.values()) w = rng.normal(0.0, stddev);
  return layer;
}

void DenseLayer::validate() const {
  require_shape(bias.size() == weights.rows(), "DenseLayer: bias length != out_dim");
}

Matrix forward(const DenseLayer& layer, const Matrix& input) {
  require_shape(input.cols() == layer.in_dim(), "forward: input columns != layer in_dim");
  Matrix out = multiply_transposed(input, layer.weights);
  const std::size_t m = layer.out_dim();
  auto v = out.values();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = v.data() + r * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += layer.bias[j];
    if (layer.activation == Activation::ReLU)
      for (std::size_t j = 0; j < m; ++j) row[j] = row[j] > 0.0 ? row[j] : 0.0;
  }
  return out;
}

LayerGradients backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_output) {
  return backward(layer, input, forward(layer, input), grad_output);
}

LayerGradients backward(const DenseLayer& layer, const Matrix& input, const Matrix& output,
                        const Matrix& grad_output) {
  require_shape(input.cols() == layer.in_dim(), "backward: input columns != layer in_dim");
  require_shape(grad_output.rows() == input.rows() && grad_output.cols() == layer.out_dim(),
                "backward: grad_output shape mismatch");
  require_shape(output.rows() == grad_output.rows() && output.cols() == grad_output.cols(),
                "backward: output shape mismatch");

  // Gradient w.r.t. the pre-activation.
  Matrix delta = grad_output;
  if (layer.activation == Activation::ReLU) {
    auto d = delta.values();
    auto o = output.values();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!(o[i] > 0.0)) d[i] = 0.0;
  }

  LayerGradients g;
  g.weights = transpose_multiply(delta, input);
  g.input = multiply(delta, layer.weights);
  g.bias.assign(layer.out_dim(), 0.0);
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    auto row = delta.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) g.bias[j] += row[j];
  }
  return g;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must lie in [0, 1)");
  Matrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Matrix dropout(const Matrix& input, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return input;
  return hadamard(input, dropout_mask(input.rows(), input.cols(), rate, rng));
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

void OptimizerState::step(std::span<const std::span<double>> params,
                          std::span<const std::span<const double>> grads) {
  require_shape(params.size() == grads.size(), "sgd_step: parameter/gradient block counts differ");
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const auto& p : params) velocity_.emplace_back(p.size(), 0.0);
  }
  require_shape(velocity_.size() == params.size(), "sgd_step: parameter block count changed");

  const double lr = hyper_.learning_rate;
  const double mu = hyper_.momentum;
  const double wd = hyper_.weight_decay;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& v = velocity_[b];
    require_shape(p.size() == g.size() && p.size() == v.size(),
                  "sgd_step: block shape differs from momentum buffer");
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] - lr * (g[i] + wd * p[i]);
      p[i] += v[i];
    }
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state) {
  const std::span<double> p[1] = {params};
  const std::span<const double> g[1] = {grads};
  state.step(p, g);
}

ChainTrace forward_chain(std::span<const DenseLayer> layers, const Matrix& input) {
  ChainTrace trace;
  trace.activations.reserve(layers.size() + 1);
  trace.activations.push_back(input);
  for (const auto& layer : layers) trace.activations.push_back(forward(layer, trace.activations.back()));
  return trace;
}

Matrix apply_chain(std::span<const DenseLayer> layers, const Matrix& input) {
  Matrix x = input;
  for (const auto& layer : layers) x = forward(layer, x);
  return x;
}

ChainGradients backward_chain(std::span<const DenseLayer> layers, const ChainTrace& trace,
                              const Matrix& grad_output) {
  require_shape(trace.activations.size() == layers.size() + 1, "backward_chain: trace length");
  ChainGradients out;
  out.weights.resize(layers.size());
  out.bias.resize(layers.size());
  Matrix grad = grad_output;
  for (std::size_t i = layers.size(); i-- > 0;) {
    auto g = backward(layers[i], trace.activations[i], trace.activations[i + 1], grad);
    out.weights[i] = std::move(g.weights);
    out.bias[i] = std::move(g.bias);
    grad = std::move(g.input);
  }
  out.input = std::move(grad);
  return out;
}

std::vector<std::span<double>> parameter_blocks(std::span<DenseLayer> layers) {
  std::vector<std::span<double>> blocks;
  blocks.reserve(2 * layers.size());
  for (auto& layer : layers) {
    blocks.push_back(layer.weights.values());
    blocks.push_back(layer.bias);
  }
  return blocks;
}

std::vector<std::span<const double>> gradient_blocks(const ChainGradients& grads) {
  std::vector<std::span<const double>> blocks;
  blocks.reserve(2 * grads.weights.size());
  for (std::size_t i = 0; i < grads.weights.size(); ++i) {
    blocks.push_back(grads.weights[i].values());
    blocks.push_back(grads.bias[i]);
  }
  return blocks;
}

}  // namespace dec
