#pragma once

// Online anomaly detection: each test window is reconstructed from its MAP
// latent (noiseless Langevin from a fresh prior draw), overlapping windows are
// averaged, and the per-timestamp score is the mean squared residual over the
// observed, selected features.

#include <cstdint>
#include <span>
#include <vector>

#include "dghl/generator.hpp"
#include "dghl/hierarchy.hpp"
#include "dghl/langevin.hpp"
#include "dghl/series.hpp"
#include "dghl/windowing.hpp"

namespace dghl {

struct ScoreSeries {
  std::vector<double> scores;          // s_t
  Tensor per_feature;                  // [m x T] contributions; 0 where not scored
  std::vector<std::size_t> coverage;   // windows covering t
  std::vector<std::size_t> n_scored;   // features entering the mean at t
};

struct DetectConfig {
  WindowingSpec windowing;
  LangevinConfig langevin{500, 0.001, 0.025, false};
  std::vector<std::size_t> channels;  // features entering the score; empty = all
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct WindowInference {
  LatentState latent;
  Tensor reconstruction;  // [m x s_w]
};

/// MAP inference for one window. The initial latent is a prior draw from the
/// detect stream of `seed` at `window_index`; the detection path and the
/// forecasting path share this routine.
WindowInference infer_window(const Tensor& y, const Mask& mask, const GeneratorParams& params,
                             const HierarchySpec& spec, const LangevinConfig& cfg,
                             std::uint64_t seed, std::size_t window_index);

/// Per-timestamp scores from an (already averaged) reconstruction.
ScoreSeries score_reconstruction(const SeriesFrame& series, const Tensor& reconstruction,
                                 std::vector<std::size_t> coverage,
                                 std::span<const std::size_t> channels);

struct StreamResult {
  Tensor reconstruction;  // [m x T]
  ScoreSeries scores;
  std::vector<LatentState> latents;  // one per window
};

StreamResult reconstruct_stream(const SeriesFrame& series, const GeneratorParams& params,
                                const HierarchySpec& spec, const DetectConfig& cfg);

/// Divisors used for each block: population std of all raw scores in earlier
/// blocks (the first block uses its own), floored at 1e-8.
std::vector<double> normalization_divisors(std::span<const double> raw,
                                           std::span<const ScoreBlock> blocks);

/// Causal per-window scaling of raw scores (and per-feature contributions).
ScoreSeries normalize_scores(const ScoreSeries& raw, const WindowingSpec& windowing);

}  // namespace dghl
