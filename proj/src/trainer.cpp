#include "dghl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "binio.hpp"
#include "dghl/error.hpp"

namespace dghl {

void TrainConfig::validate() const {
  if (iterations < 1) throw ValidationError("train: iterations must be >= 1");
  if (batch_size < 1) throw ValidationError("train: batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw ValidationError("train: lr_decay must lie in (0, 1]");
  }
  langevin.validate();
}

double learning_rate_at(const TrainConfig& cfg, std::size_t iteration) {
  double lr = cfg.learning_rate;
  for (std::size_t k = 1; k <= cfg.n_decays; ++k) {
    const std::size_t at = (k * cfg.iterations + cfg.n_decays) / (cfg.n_decays + 1);
    if (iteration >= at) lr *= cfg.lr_decay;
  }
  return lr;
}

namespace {

constexpr char kCheckpointMagic[9] = "DGHLCKP1";

// Distinct uniform indices; order is the draw order.
std::vector<std::size_t> sample_batch(Rng& rng, std::size_t n, std::size_t b) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const std::size_t take = std::min(n, b);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainingRun abp_train(std::span<const SeriesWindow> windows, const HierarchySpec& spec,
                      const GeneratorArch& arch, const TrainConfig& cfg,
                      const TrainerState* resume) {
  cfg.validate();
  spec.validate();
  if (windows.empty()) throw ValidationError("train: no training windows");
  for (const SeriesWindow& w : windows) {
    if (w.values.dim(1) != spec.window_len() || w.values.dim(0) != arch.n_features) {
      throw ShapeError("train: window shape " + to_string(w.values.shape()) + " expected [" +
                       std::to_string(arch.n_features) + " x " +
                       std::to_string(spec.window_len()) + "]");
    }
  }

  TrainerState state;
  if (resume) {
    state = *resume;
    if (state.latents.size() != windows.size()) {
      throw ValidationError("train: checkpoint has " + std::to_string(state.latents.size()) +
                            " latent chains for " + std::to_string(windows.size()) + " windows");
    }
  } else {
    state.params = build_generator(arch, cfg.seed);
    state.latents = init_latents(spec, windows.size(), cfg.seed);
    state.adam = AdamState::zeros_like(std::as_const(state.params).learnable());
    state.batch_rng = Rng(derive_seed(cfg.seed, Stream::kBatch));
  }
  const std::vector<std::string> names = state.params.learnable_names();

  std::vector<Mask> masks;
  masks.reserve(windows.size());
  for (const SeriesWindow& w : windows) {
    masks.push_back(cfg.masks_enabled ? w.mask : Mask(w.mask.rows(), w.mask.cols(), true));
  }

  TrainingRun run;
  const auto t0 = std::chrono::steady_clock::now();
  const double inv_var = 1.0 / (cfg.langevin.sigma * cfg.langevin.sigma);

  for (std::size_t it = state.iteration; it < cfg.iterations; ++it) {
    const std::vector<std::size_t> batch =
        sample_batch(state.batch_rng, windows.size(), cfg.batch_size);
    const std::size_t b = batch.size();

    std::vector<Tensor> ys;
    std::vector<Mask> bm;
    std::vector<LatentState> zs;
    std::vector<Rng> rngs;
    for (std::size_t idx : batch) {
      ys.push_back(windows[idx].values);
      bm.push_back(masks[idx]);
      zs.push_back(state.latents[idx]);
      rngs.emplace_back(derive_seed(cfg.seed, Stream::kLangevin, {it, idx}));
    }

    // Inferential back-propagation.
    const auto t_inf = std::chrono::steady_clock::now();
    langevin_batch(ys, bm, zs, state.params, spec, cfg.langevin, rngs, Mode::kTrain);
    for (std::size_t k = 0; k < b; ++k) state.latents[batch[k]] = zs[k];
    run.times.inference_seconds += seconds_since(t_inf);

    // Learning back-propagation.
    const auto t_learn = std::chrono::steady_clock::now();
    const WindowPass pass = forward_windows(zs, state.params, spec, Mode::kTrain);
    std::vector<Tensor> grads(b);
    double sq = 0.0;
    double observed = 0.0;
    double prior = 0.0;
    for (std::size_t k = 0; k < b; ++k) {
      Tensor r = masked_residual(ys[k], pass.outputs[k], bm[k]);
      const double window_sq = squared_norm(r);
      if (!std::isfinite(window_sq)) {
        throw NumericError("train: non-finite loss at iteration " + std::to_string(it) +
                           ", window " + std::to_string(batch[k]));
      }
      sq += window_sq;
      observed += static_cast<double>(bm[k].count_observed());
      prior += zs[k].squared_norm();
      r *= -inv_var / static_cast<double>(b);
      grads[k] = std::move(r);
    }
    const double recon = (observed > 0.0 ? sq / observed : 0.0) * 0.5 * inv_var;
    const double loss = recon + 0.5 * prior / static_cast<double>(b);
    if (!std::isfinite(loss)) {
      throw NumericError("train: non-finite loss at iteration " + std::to_string(it) +
                         ", window " + std::to_string(batch.front()));
    }
    WindowGrad wg = backward_windows(pass, zs, state.params, spec, grads, true);
    update_running_stats(state.params, pass.tape);
    const double lr = learning_rate_at(cfg, it);
    adam_step(state.params.learnable(), wg.grad_params, state.adam, lr, names);
    run.times.learning_seconds += seconds_since(t_learn);

    state.history.push_back({it, loss, recon, lr, seconds_since(t0)});
    state.iteration = it + 1;
    if (cfg.checkpoint_every > 0 && cfg.on_checkpoint && state.iteration % cfg.checkpoint_every == 0) {
      cfg.on_checkpoint(state);
    }
  }

  run.params = std::move(state.params);
  run.latents = std::move(state.latents);
  run.history = std::move(state.history);
  return run;
}

void write_trainer_state(std::ostream& out, const TrainerState& state) {
  binio::write_magic(out, kCheckpointMagic);
  binio::write_u64(out, state.iteration);
  write_generator(out, state.params);
  write_latents(out, state.latents);
  binio::write_u64(out, static_cast<std::uint64_t>(state.adam.step_count));
  binio::write_u64(out, state.adam.first_moment.size());
  for (std::size_t i = 0; i < state.adam.first_moment.size(); ++i) {
    binio::write_u64(out, state.adam.first_moment[i].size());
    binio::write_f64s(out, state.adam.first_moment[i].data());
    binio::write_f64s(out, state.adam.second_moment[i].data());
  }
  binio::write_string(out, state.batch_rng.serialize());
  binio::write_u64(out, state.history.size());
  for (const LossRecord& r : state.history) {
    binio::write_u64(out, r.iteration);
    binio::write_f64(out, r.loss);
    binio::write_f64(out, r.reconstruction);
    binio::write_f64(out, r.lr);
    binio::write_f64(out, r.seconds);
  }
}

TrainerState read_trainer_state(std::istream& in) {
  binio::read_magic(in, kCheckpointMagic, "trainer checkpoint");
  TrainerState state;
  state.iteration = binio::read_u64(in, "trainer checkpoint");
  state.params = read_generator(in);
  state.latents = read_latents(in);
  state.adam = AdamState::zeros_like(std::as_const(state.params).learnable());
  state.adam.step_count = static_cast<std::int64_t>(binio::read_u64(in, "adam state"));
  const std::uint64_t n = binio::read_u64(in, "adam state");
  if (n != state.adam.first_moment.size()) {
    throw ParseError("trainer checkpoint: optimizer state does not match generator");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (binio::read_u64(in, "adam state") != state.adam.first_moment[i].size()) {
      throw ParseError("trainer checkpoint: optimizer moment size mismatch");
    }
    binio::read_f64s(in, state.adam.first_moment[i].data(), "adam state");
    binio::read_f64s(in, state.adam.second_moment[i].data(), "adam state");
  }
  state.batch_rng = Rng::deserialize(binio::read_string(in, "rng state"));
  const std::uint64_t h = binio::read_u64(in, "loss history");
  for (std::uint64_t i = 0; i < h; ++i) {
    LossRecord r;
    r.iteration = binio::read_u64(in, "loss history");
    r.loss = binio::read_f64(in, "loss history");
    r.reconstruction = binio::read_f64(in, "loss history");
    r.lr = binio::read_f64(in, "loss history");
    r.seconds = binio::read_f64(in, "loss history");
    state.history.push_back(r);
  }
  return state;
}

}  // namespace dghl
