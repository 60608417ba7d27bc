#include "dghl/robustness.hpp"

#include "dghl/detector.hpp"
#include "dghl/error.hpp"
#include "dghl/rng.hpp"

namespace dghl {

void OcclusionSpec::validate() const {
  if (segments < 1) throw ValidationError("occlusion: r must be >= 1");
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("occlusion: p must lie in [0, 1]");
  }
}

Mask make_occlusion_mask(std::size_t m, std::size_t length, const OcclusionSpec& spec) {
  spec.validate();
  if (length < spec.segments) {
    throw ValidationError("occlusion: series of length " + std::to_string(length) +
                          " cannot be split into " + std::to_string(spec.segments) + " segments");
  }
  Rng rng(derive_seed(spec.seed, Stream::kOcclusion));
  const std::size_t seg_len = length / spec.segments;
  Mask mask(m, length, true);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t s = 0; s < spec.segments; ++s) {
      if (!(rng.uniform() < spec.probability)) continue;
      const std::size_t begin = s * seg_len;
      const std::size_t end = s + 1 == spec.segments ? length : begin + seg_len;
      for (std::size_t t = begin; t < end; ++t) mask.set(i, t, false);
    }
  }
  return mask;
}

SeriesFrame occlude(const SeriesFrame& frame, const OcclusionSpec& spec) {
  SeriesFrame out = frame;
  out.mask &= make_occlusion_mask(frame.n_features(), frame.length(), spec);
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    if (!out.mask.flat(k)) out.values[k] = 0.0;
  }
  return out;
}

Tensor forecast_with_mask(const Tensor& window, const Mask& mask, const GeneratorParams& params,
                          const HierarchySpec& spec, const LangevinConfig& cfg,
                          std::uint64_t seed, std::size_t window_index) {
  return infer_window(window, mask, params, spec, cfg, seed, window_index).reconstruction;
}

Tensor forecast(const Tensor& window, std::size_t observed_len, const GeneratorParams& params,
                const HierarchySpec& spec, const LangevinConfig& cfg, std::uint64_t seed,
                std::size_t window_index) {
  if (window.rank() != 2 || window.dim(1) != spec.window_len()) {
    throw ShapeError("forecast: window " + to_string(window.shape()) + " but s_w is " +
                     std::to_string(spec.window_len()));
  }
  if (observed_len == 0 || observed_len >= spec.window_len()) {
    throw ValidationError("forecast: observed length must lie in (0, " +
                          std::to_string(spec.window_len()) + ")");
  }
  Mask mask(window.dim(0), window.dim(1), false);
  for (std::size_t i = 0; i < window.dim(0); ++i) {
    for (std::size_t t = 0; t < observed_len; ++t) mask.set(i, t, true);
  }
  return forecast_with_mask(window, mask, params, spec, cfg, seed, window_index);
}

std::vector<Tensor> interpolate_latents(const LatentState& z_a, const LatentState& z_b,
                                        std::span<const double> alphas,
                                        const GeneratorParams& params, const HierarchySpec& spec) {
  if (!(z_a.layout() == z_b.layout())) {
    throw ShapeError("interpolate_latents: endpoints have different layouts");
  }
  std::vector<Tensor> out;
  for (double alpha : alphas) {
    LatentState z(z_a.layout());
    auto dst = z.values();
    auto a = z_a.values();
    auto b = z_b.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = (1.0 - alpha) * a[k] + alpha * b[k];
    out.push_back(generate_window(z, params, spec, Mode::kEval));
  }
  return out;
}

}  // namespace dghl
