#include "dghl/detector.hpp"

#include <algorithm>
#include <cmath>

#include "dghl/error.hpp"
#include "dghl/parallel.hpp"

namespace dghl {

namespace {
constexpr double kStdFloor = 1e-8;
}

WindowInference infer_window(const Tensor& y, const Mask& mask, const GeneratorParams& params,
                             const HierarchySpec& spec, const LangevinConfig& cfg,
                             std::uint64_t seed, std::size_t window_index) {
  Rng rng(derive_seed(seed, Stream::kDetect, {window_index}));
  LatentState z(latent_layout(spec));
  rng.fill_normal(z.values());
  WindowInference out;
  out.latent = langevin_infer(y, mask, params, spec, cfg, rng, std::move(z), Mode::kEval);
  out.reconstruction = generate_window(out.latent, params, spec, Mode::kEval);
  return out;
}

ScoreSeries score_reconstruction(const SeriesFrame& series, const Tensor& reconstruction,
                                 std::vector<std::size_t> coverage,
                                 std::span<const std::size_t> channels) {
  require_same_shape(series.values, reconstruction, "score_reconstruction");
  const std::size_t m = series.n_features();
  const std::size_t len = series.length();
  if (coverage.size() != len) throw ShapeError("score_reconstruction: coverage length mismatch");

  std::vector<std::size_t> selected(channels.begin(), channels.end());
  if (selected.empty()) {
    for (std::size_t i = 0; i < m; ++i) selected.push_back(i);
  }
  for (std::size_t i : selected) {
    if (i >= m) {
      throw ValidationError("channel selector: feature " + std::to_string(i) + " out of range (" +
                            std::to_string(m) + " features)");
    }
  }

  ScoreSeries out;
  out.scores.assign(len, 0.0);
  out.per_feature = Tensor({m, len});
  out.n_scored.assign(len, 0);
  for (std::size_t t = 0; t < len; ++t) {
    if (coverage[t] == 0) continue;
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i : selected) {
      if (!series.mask(i, t)) continue;
      const double r = series.values.at(i, t) - reconstruction.at(i, t);
      out.per_feature.at(i, t) = r * r;
      acc += r * r;
      ++n;
    }
    out.n_scored[t] = n;
    out.scores[t] = n > 0 ? acc / static_cast<double>(n) : 0.0;
  }
  out.coverage = std::move(coverage);
  return out;
}

StreamResult reconstruct_stream(const SeriesFrame& series, const GeneratorParams& params,
                                const HierarchySpec& spec, const DetectConfig& cfg) {
  series.validate();
  if (series.n_features() != params.n_features()) {
    throw ShapeError("detect: series '" + series.entity_id + "' has " +
                     std::to_string(series.n_features()) + " features, model expects " +
                     std::to_string(params.n_features()));
  }
  if (cfg.windowing.window_len != spec.window_len()) {
    throw ValidationError("detect: window length " + std::to_string(cfg.windowing.window_len) +
                          " differs from hierarchy window " + std::to_string(spec.window_len()));
  }
  cfg.langevin.validate();
  const std::vector<SeriesWindow> windows = make_windows(series, cfg.windowing);

  std::vector<WindowInference> inferred(windows.size());
  parallel_for(windows.size(), cfg.workers, [&](std::size_t k) {
    inferred[k] = infer_window(windows[k].values, windows[k].mask, params, spec, cfg.langevin,
                               cfg.seed, k);
  });

  const std::size_t m = series.n_features();
  const std::size_t len = series.length();
  StreamResult out;
  out.reconstruction = Tensor({m, len});
  std::vector<std::size_t> coverage(len, 0);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const SeriesWindow& w = windows[k];
    for (std::size_t c = w.pad; c < w.values.dim(1); ++c) {
      const std::size_t t = w.start + (c - w.pad);
      coverage[t] += 1;
      for (std::size_t i = 0; i < m; ++i) {
        out.reconstruction.at(i, t) += inferred[k].reconstruction.at(i, c);
      }
    }
  }
  for (std::size_t t = 0; t < len; ++t) {
    if (coverage[t] <= 1) continue;
    for (std::size_t i = 0; i < m; ++i) out.reconstruction.at(i, t) /= static_cast<double>(coverage[t]);
  }
  out.scores = score_reconstruction(series, out.reconstruction, std::move(coverage), cfg.channels);
  for (WindowInference& wi : inferred) out.latents.push_back(std::move(wi.latent));
  return out;
}

std::vector<double> normalization_divisors(std::span<const double> raw,
                                           std::span<const ScoreBlock> blocks) {
  if (blocks.empty()) throw ValidationError("normalize_scores: no score windows");
  std::vector<double> divisors;
  // Welford accumulators over all earlier blocks.
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    double std_dev = 0.0;
    if (k == 0) {
      double c = 0.0, mu = 0.0, s = 0.0;
      for (std::size_t t = blocks[0].begin; t < blocks[0].end; ++t) {
        c += 1.0;
        const double d = raw[t] - mu;
        mu += d / c;
        s += d * (raw[t] - mu);
      }
      std_dev = c > 0.0 ? std::sqrt(s / c) : 0.0;
    } else {
      std_dev = count > 0.0 ? std::sqrt(m2 / count) : 0.0;
    }
    divisors.push_back(std::max(std_dev, kStdFloor));
    for (std::size_t t = blocks[k].begin; t < blocks[k].end; ++t) {
      count += 1.0;
      const double d = raw[t] - mean;
      mean += d / count;
      m2 += d * (raw[t] - mean);
    }
  }
  return divisors;
}

ScoreSeries normalize_scores(const ScoreSeries& raw, const WindowingSpec& windowing) {
  const std::vector<ScoreBlock> blocks = score_blocks(raw.scores.size(), windowing);
  const std::vector<double> divisors = normalization_divisors(raw.scores, blocks);
  ScoreSeries out = raw;
  const std::size_t m = raw.per_feature.rank() == 2 ? raw.per_feature.dim(0) : 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t t = blocks[k].begin; t < blocks[k].end; ++t) {
      out.scores[t] /= divisors[k];
      for (std::size_t i = 0; i < m; ++i) out.per_feature.at(i, t) /= divisors[k];
    }
  }
  return out;
}

}  // namespace dghl
