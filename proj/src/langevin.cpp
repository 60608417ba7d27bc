#include "dghl/langevin.hpp"

#include <cmath>

#include "dghl/error.hpp"

namespace dghl {

void LangevinConfig::validate() const {
  if (n_steps < 1) throw ValidationError("langevin: n_steps must be >= 1");
  if (!(step_size > 0.0)) throw ValidationError("langevin: step size must be > 0");
  if (!(sigma > 0.0)) throw ValidationError("langevin: sigma must be > 0");
}

Tensor masked_residual(const Tensor& y, const Tensor& reconstruction, const Mask& mask) {
  require_same_shape(y, reconstruction, "masked_residual");
  if (mask.rows() != y.dim(0) || mask.cols() != y.dim(1)) {
    throw ShapeError("masked_residual: mask " + std::to_string(mask.rows()) + "x" +
                     std::to_string(mask.cols()) + " vs window " + to_string(y.shape()));
  }
  Tensor r(y.shape());
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = mask.flat(k) ? y[k] - reconstruction[k] : 0.0;
  }
  return r;
}

LatentState posterior_grad(const LatentState& z, const Tensor& y, const Mask& mask,
                           const GeneratorParams& params, const HierarchySpec& spec,
                           const LangevinConfig& cfg, Mode mode) {
  const WindowPass pass = forward_windows(std::span(&z, 1), params, spec, mode);
  Tensor r = masked_residual(y, pass.outputs.front(), mask);
  r *= 1.0 / (cfg.sigma * cfg.sigma);
  WindowGrad wg = backward_windows(pass, std::span(&z, 1), params, spec, std::span(&r, 1), false);
  LatentState grad = std::move(wg.grad_latents.front());
  auto g = grad.values();
  auto zv = z.values();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= zv[k];
  return grad;
}

double neg_log_joint(const LatentState& z, const Tensor& y, const Mask& mask,
                     const GeneratorParams& params, const HierarchySpec& spec,
                     const LangevinConfig& cfg, Mode mode) {
  const Tensor f = generate_window(z, params, spec, mode);
  const Tensor r = masked_residual(y, f, mask);
  return squared_norm(r) / (2.0 * cfg.sigma * cfg.sigma) + 0.5 * z.squared_norm();
}

void langevin_batch(std::span<const Tensor> ys, std::span<const Mask> masks,
                    std::span<LatentState> zs, const GeneratorParams& params,
                    const HierarchySpec& spec, const LangevinConfig& cfg, std::span<Rng> rngs,
                    Mode mode) {
  cfg.validate();
  if (ys.size() != zs.size() || masks.size() != zs.size() ||
      (cfg.noise && rngs.size() != zs.size())) {
    throw ShapeError("langevin_batch: windows, masks, latents and rngs must have equal counts");
  }
  const double inv_var = 1.0 / (cfg.sigma * cfg.sigma);
  const double noise_scale = std::sqrt(2.0 * cfg.step_size);
  std::vector<Tensor> grads(zs.size());
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    const WindowPass pass = forward_windows(zs, params, spec, mode);
    for (std::size_t w = 0; w < zs.size(); ++w) {
      grads[w] = masked_residual(ys[w], pass.outputs[w], masks[w]);
      grads[w] *= inv_var;
    }
    const WindowGrad wg = backward_windows(pass, zs, params, spec, grads, false);
    for (std::size_t w = 0; w < zs.size(); ++w) {
      auto z = zs[w].values();
      auto g = wg.grad_latents[w].values();
      for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] += cfg.step_size * (g[k] - z[k]);
        if (cfg.noise) z[k] += noise_scale * rngs[w].normal();
      }
      if (!all_finite(z)) {
        throw NumericError("langevin: latent of chain " + std::to_string(w) +
                           " became non-finite at step " + std::to_string(step));
      }
    }
  }
}

LatentState langevin_infer(const Tensor& y, const Mask& mask, const GeneratorParams& params,
                           const HierarchySpec& spec, const LangevinConfig& cfg, Rng& rng,
                           LatentState z_init, Mode mode) {
  if (!(z_init.layout() == latent_layout(spec))) {
    throw ShapeError("langevin_infer: initial latent does not conform to the hierarchy");
  }
  langevin_batch(std::span(&y, 1), std::span(&mask, 1), std::span(&z_init, 1), params, spec, cfg,
                 std::span(&rng, 1), mode);
  return z_init;
}

}  // namespace dghl
