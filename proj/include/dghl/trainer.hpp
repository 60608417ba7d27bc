#pragma once

// Mini-batch alternating back-propagation. Every training window owns a
// persistent latent chain initialised once from the prior. Each iteration
// (1) advances the chains of a random mini-batch with noisy short-run
// Langevin dynamics and (2) takes one Adam step on the generator using the
// observed-entry reconstruction gradient averaged over the batch.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "dghl/adam.hpp"
#include "dghl/generator.hpp"
#include "dghl/hierarchy.hpp"
#include "dghl/langevin.hpp"
#include "dghl/rng.hpp"
#include "dghl/windowing.hpp"

namespace dghl {

struct TrainerState;

struct TrainConfig {
  std::size_t iterations = 1000;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  double lr_decay = 0.8;
  std::size_t n_decays = 3;
  LangevinConfig langevin{25, 0.001, 0.025, true};
  bool masks_enabled = true;
  std::uint64_t seed = 1;

  // Called with the full trainer state after every `checkpoint_every` iterations.
  std::size_t checkpoint_every = 0;
  std::function<void(const TrainerState&)> on_checkpoint;

  void validate() const;
};

/// Learning rate used at 0-based iteration t: decays by lr_decay at
/// ceil(k * T / (n_decays + 1)) for k = 1..n_decays.
double learning_rate_at(const TrainConfig& cfg, std::size_t iteration);

struct LossRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double reconstruction = 0.0;  // masked MSE / (2 sigma^2) part of loss
  double lr = 0.0;
  double seconds = 0.0;  // wall clock since the start of training
};

struct PhaseTimes {
  double inference_seconds = 0.0;
  double learning_seconds = 0.0;
};

struct TrainingRun {
  GeneratorParams params;
  std::vector<LatentState> latents;
  std::vector<LossRecord> history;
  PhaseTimes times;
};

/// Everything needed to continue a run bit-identically.
struct TrainerState {
  std::size_t iteration = 0;  // iterations completed
  GeneratorParams params;
  std::vector<LatentState> latents;
  AdamState adam;
  Rng batch_rng{0};
  std::vector<LossRecord> history;
};

void write_trainer_state(std::ostream& out, const TrainerState& state);
TrainerState read_trainer_state(std::istream& in);

/// Batch loss reported in the history: masked MSE / (2 sigma^2) + mean ||Z||^2 / 2.
TrainingRun abp_train(std::span<const SeriesWindow> windows, const HierarchySpec& spec,
                      const GeneratorArch& arch, const TrainConfig& cfg,
                      const TrainerState* resume = nullptr);

}  // namespace dghl
