#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dghl/generator.hpp"
#include "dghl/hierarchy.hpp"
#include "dghl/langevin.hpp"
#include "dghl/series.hpp"

namespace dghl {

struct OcclusionSpec {
  std::size_t segments = 5;  // r
  double probability = 0.0;  // p
  std::uint64_t seed = 1;

  void validate() const;
};

/// m x T mask (false = occluded). The series is split into r segments of
/// floor(T / r) (the last one takes the remainder); every (feature, segment)
/// cell is occluded independently with probability p.
Mask make_occlusion_mask(std::size_t m, std::size_t length, const OcclusionSpec& spec);

/// Copy of `frame` with the occlusion mask applied on top of its own mask.
SeriesFrame occlude(const SeriesFrame& frame, const OcclusionSpec& spec);

/// Infers latents from the masked window and generates the whole window.
Tensor forecast_with_mask(const Tensor& window, const Mask& mask, const GeneratorParams& params,
                          const HierarchySpec& spec, const LangevinConfig& cfg,
                          std::uint64_t seed, std::size_t window_index);

/// Only columns [0, observed_len) are visible to inference; the returned
/// window's columns [observed_len, s_w) are the forecast.
Tensor forecast(const Tensor& window, std::size_t observed_len, const GeneratorParams& params,
                const HierarchySpec& spec, const LangevinConfig& cfg, std::uint64_t seed,
                std::size_t window_index);

/// Windows generated from (1 - alpha) * z_a + alpha * z_b. Alphas outside
/// [0, 1] extrapolate.
std::vector<Tensor> interpolate_latents(const LatentState& z_a, const LatentState& z_b,
                                        std::span<const double> alphas,
                                        const GeneratorParams& params, const HierarchySpec& spec);

}  // namespace dghl
