#pragma once

// Top-down transposed-convolution generator. Each sub-window's state vector
// (length S, temporal length 1) is projected to f_0 x 4, then K upsampling
// layers double the temporal length while halving filters; the last layer
// emits the m features. Batch-norm + ReLU sit between layers, the output
// layer is linear.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dghl/hierarchy.hpp"
#include "dghl/layers.hpp"
#include "dghl/tensor.hpp"

namespace dghl {

struct GeneratorArch {
  std::size_t n_features = 1;
  std::size_t sub_window_len = 64;
  std::size_t filter_multiplier = 32;
  std::size_t max_filters = 256;
  std::size_t state_dim = 25;

  void validate() const;
  std::size_t upsampling_layers() const;      // K, with sub_window_len = 4 * 2^K
  std::vector<std::size_t> filters() const;   // output channels of layers 0..K

  bool operator==(const GeneratorArch&) const = default;
};

struct LayerParams {
  Tensor kernel;  // [C_in x C_out x K]
  Tensor bias;    // [C_out]
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool batch_norm = false;
  bool relu = false;
  Tensor gamma, beta, running_mean, running_var;  // [C_out] when batch_norm
};

struct GeneratorParams {
  GeneratorArch arch;
  std::vector<LayerParams> layers;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t state_dim() const { return layers.front().kernel.dim(0); }
  std::size_t n_features() const { return layers.back().kernel.dim(1); }
  std::size_t output_len() const;  // temporal length for a length-1 input

  // Checks that layer shapes chain from state_dim x 1 to m x output_len.
  void validate() const;

  // Learnable tensors in a fixed order: per layer kernel, bias, [gamma, beta].
  std::vector<Tensor*> learnable();
  std::vector<const Tensor*> learnable() const;
  std::vector<std::string> learnable_names() const;
};

/// Standard stack for `arch`, weights ~ N(0, 0.02^2), biases 0, gamma 1, beta 0.
GeneratorParams build_generator(const GeneratorArch& arch, std::uint64_t seed);

struct LayerTape {
  Tensor input;
  Tensor conv_out;
  BatchStats stats;
  Tensor bn_out;
};

struct GeneratorTape {
  Mode mode = Mode::kEval;
  std::vector<LayerTape> layers;
};

/// states: [B x S]. Returns [B x m x output_len]. The tape is filled when given.
Tensor generator_forward(const GeneratorParams& params, const Tensor& states, Mode mode,
                         GeneratorTape* tape = nullptr);

struct GeneratorGrad {
  Tensor grad_states;               // [B x S]
  std::vector<Tensor> grad_params;  // matches learnable() order; empty if not requested
};

GeneratorGrad generator_backward_batch(const GeneratorParams& params, const GeneratorTape& tape,
                                       const Tensor& grad_output, bool want_param_grads);

/// Batch-norm running statistics update from a train-mode tape.
void update_running_stats(GeneratorParams& params, const GeneratorTape& tape);

// ---- window level -------------------------------------------------------

Tensor generate_sub_window(std::span<const double> state, const GeneratorParams& params,
                           Mode mode);

/// [m x s_w]: sub-window outputs concatenated in time.
Tensor generate_window(const LatentState& z, const GeneratorParams& params,
                       const HierarchySpec& spec, Mode mode);

/// Several windows pushed through the network as one batch (in train mode
/// they share batch-norm statistics).
struct WindowPass {
  std::vector<Tensor> outputs;  // one [m x s_w] per window
  GeneratorTape tape;
};

WindowPass forward_windows(std::span<const LatentState> latents, const GeneratorParams& params,
                           const HierarchySpec& spec, Mode mode);

struct WindowGrad {
  std::vector<LatentState> grad_latents;  // tied vectors receive the sum over sub-windows
  std::vector<Tensor> grad_params;
};

WindowGrad backward_windows(const WindowPass& pass, std::span<const LatentState> latents,
                            const GeneratorParams& params, const HierarchySpec& spec,
                            std::span<const Tensor> grad_outputs, bool want_param_grads);

/// Single-window gradient of <grad_output, generate_window(z)>.
WindowGrad generator_backward(const LatentState& z, const GeneratorParams& params,
                              const HierarchySpec& spec, const Tensor& grad_output, Mode mode);

// ---- checkpoints ---------------------------------------------------------

void write_generator(std::ostream& out, const GeneratorParams& params);
GeneratorParams read_generator(std::istream& in);

}  // namespace dghl
