#pragma once

// Short-run Langevin dynamics over the hierarchical latent space:
//   Z <- Z + s_z * grad log p(Z | Y_obs) + sqrt(2 s_z) * eps,
//   grad log p(Z | Y_obs) = (1 / sigma_z^2) J^T mask(Y - f(Z)) - Z.
// No rejection step. With noise disabled the iteration is gradient ascent on
// the log-posterior and converges to the MAP latent.

#include <cstdint>
#include <span>

#include "dghl/generator.hpp"
#include "dghl/hierarchy.hpp"
#include "dghl/rng.hpp"
#include "dghl/series.hpp"

namespace dghl {

struct LangevinConfig {
  std::size_t n_steps = 25;
  double step_size = 0.001;  // s_z
  double sigma = 0.025;      // sigma_z
  bool noise = true;

  void validate() const;
};

/// grad_Z log p(Z | Y) restricted to observed entries.
LatentState posterior_grad(const LatentState& z, const Tensor& y, const Mask& mask,
                           const GeneratorParams& params, const HierarchySpec& spec,
                           const LangevinConfig& cfg, Mode mode = Mode::kEval);

/// -log p(Z, Y_obs) up to a constant: ||mask(Y - f(Z))||^2 / (2 sigma^2) + ||Z||^2 / 2.
double neg_log_joint(const LatentState& z, const Tensor& y, const Mask& mask,
                     const GeneratorParams& params, const HierarchySpec& spec,
                     const LangevinConfig& cfg, Mode mode = Mode::kEval);

/// Runs exactly cfg.n_steps iterations from z_init. Throws NumericError with the
/// step index when Z stops being finite.
LatentState langevin_infer(const Tensor& y, const Mask& mask, const GeneratorParams& params,
                           const HierarchySpec& spec, const LangevinConfig& cfg, Rng& rng,
                           LatentState z_init, Mode mode = Mode::kEval);

/// Advances several chains together, one forward/backward pass per step over the
/// whole batch. In train mode the chains share batch-norm statistics. rngs[i]
/// drives chain i.
void langevin_batch(std::span<const Tensor> ys, std::span<const Mask> masks,
                    std::span<LatentState> zs, const GeneratorParams& params,
                    const HierarchySpec& spec, const LangevinConfig& cfg, std::span<Rng> rngs,
                    Mode mode);

/// Residual (Y - f) with unobserved entries set to exactly 0.
Tensor masked_residual(const Tensor& y, const Tensor& reconstruction, const Mask& mask);

}  // namespace dghl
