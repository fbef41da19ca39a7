#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dec/matrix.hpp"
#include "dec/rng.hpp"

namespace dec {

enum class Activation { ReLU, Identity };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

/// Fully connected layer: y = g(x Wᵀ + b), weights stored out_dim × in_dim.
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;
  Activation activation = Activation::ReLU;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }

  /// Zero-mean Gaussian weights with the given std, zero bias.
  static DenseLayer gaussian(std::size_t in_dim, std::size_t out_dim, Activation activation,
                             double stddev, Rng& rng);

  /// Throws ShapeError if bias length does not match out_dim.
  void validate() const;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

Matrix forward(const DenseLayer& layer, const Matrix& input);

struct LayerGradients {
  Matrix input;
  Matrix weights;
  std::vector<double> bias;
};

/// Gradients of a scalar loss through one layer given dL/d(output).
/// The ReLU subgradient at 0 is taken to be 0.
LayerGradients backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_output);

/// Same as above but reuses the forward output instead of recomputing it.
LayerGradients backward(const DenseLayer& layer, const Matrix& input, const Matrix& output,
                        const Matrix& grad_output);

/// Inverted-dropout scale mask: each entry is 0 with probability `rate`,
/// otherwise 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

/// Zeroes each entry independently with probability `rate` and scales the
/// survivors by 1/(1-rate). rate == 0 returns the input unchanged.
Matrix dropout(const Matrix& input, double rate, Rng& rng);

/// Elementwise product; shapes must match.
Matrix hadamard(const Matrix& a, const Matrix& b);

struct SgdHyper {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// Momentum buffers for a fixed list of parameter blocks. The buffers are
/// shaped on the first step and must match on every step afterwards.
class OptimizerState {
 public:
  OptimizerState() = default;
  explicit OptimizerState(SgdHyper hyper) : hyper_(hyper) {}

  SgdHyper& hyper() noexcept { return hyper_; }
  const SgdHyper& hyper() const noexcept { return hyper_; }
  const std::vector<std::vector<double>>& velocity() const noexcept { return velocity_; }

  /// v <- momentum*v - lr*(g + wd*p);  p <- p + v
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

 private:
  SgdHyper hyper_;
  std::vector<std::vector<double>> velocity_;
};

/// Single-block convenience form of OptimizerState::step.
void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state);

/// Forward pass through a chain keeping every intermediate activation:
/// activations[0] is the input, activations[i+1] the output of layer i.
struct ChainTrace {
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

ChainTrace forward_chain(std::span<const DenseLayer> layers, const Matrix& input);

/// Output of a chain without keeping intermediates.
Matrix apply_chain(std::span<const DenseLayer> layers, const Matrix& input);

struct ChainGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;
  Matrix input;
};

ChainGradients backward_chain(std::span<const DenseLayer> layers, const ChainTrace& trace,
                              const Matrix& grad_output);

/// Parameter blocks as [W0, b0, W1, b1, ...].
std::vector<std::span<double>> parameter_blocks(std::span<DenseLayer> layers);
std::vector<std::span<const double>> gradient_blocks(const ChainGradients& grads);

}  // namespace dec
