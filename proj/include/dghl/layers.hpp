#pragma once

// Forward and backward passes for the layers used by the generator network.
// Activations are laid out as [batch x channels x length]; rank-2 inputs
// [channels x length] are treated as a batch of one and keep their rank.

#include <vector>

#include "dghl/tensor.hpp"

namespace dghl {

enum class Mode { kTrain, kEval };

struct LayerGrad {
  Tensor grad_input;
  std::vector<Tensor> grad_params;  // one entry per learnable parameter, layer order
};

std::size_t conv1d_transpose_output_length(std::size_t length, std::size_t kernel_size,
                                           std::size_t stride, std::size_t padding);

/// Transposed 1-D convolution (the adjoint of a strided convolution).
/// kernel: [C_in x C_out x K], bias: [C_out].
/// L_out = (L - 1) * stride - 2 * padding + K.
Tensor conv1d_transpose_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                                std::size_t stride, std::size_t padding);

/// grad_params = {grad_kernel, grad_bias}; left empty when want_param_grads is false.
LayerGrad conv1d_transpose_backward(const Tensor& input, const Tensor& kernel, std::size_t stride,
                                    std::size_t padding, const Tensor& grad_output,
                                    bool want_param_grads = true);

/// Per-channel statistics that a batch-norm forward pass normalised with.
struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased (divides by count)
  std::size_t count = 0;    // elements per channel (B * L)
};

struct BatchNormOutput {
  Tensor output;
  BatchStats stats;  // batch statistics in train mode, running statistics in eval mode
};

/// Batch normalisation over (B, L) per channel. Pure: running statistics are
/// only read here; see update_running_stats.
BatchNormOutput batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                  const Tensor& running_mean, const Tensor& running_var, Mode mode,
                                  double eps);

/// Exponential moving average: r <- (1 - momentum) r + momentum * batch.
/// The running variance tracks the unbiased batch variance.
void update_running_stats(const BatchStats& stats, double momentum, Tensor& running_mean,
                          Tensor& running_var);

/// grad_params = {grad_gamma, grad_beta}.
LayerGrad batchnorm_backward(const Tensor& input, const Tensor& gamma, const BatchStats& stats,
                             Mode mode, double eps, const Tensor& grad_output);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

}  // namespace dghl
