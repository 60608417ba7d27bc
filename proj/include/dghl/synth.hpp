#pragma once

#include <cstdint>
#include <vector>

#include "dghl/series.hpp"

namespace dghl {

enum class AnomalyKind { kSpike, kLevelShift };

struct InjectedAnomaly {
  AnomalyKind kind;
  std::size_t feature;
  std::size_t begin;  // [begin, end) in test timestamps
  std::size_t end;
  double offset;      // added value
};

/// Multi-sine benchmark: every feature mixes a few shared sinusoidal sources
/// plus Gaussian noise. Anomalies are injected into the test split only, each
/// in its own slot of the series so label intervals never touch.
struct SynthSpec {
  std::size_t n_features = 5;
  std::size_t train_len = 10000;
  std::size_t test_len = 5000;
  std::vector<double> periods = {50.0, 90.0, 160.0};  // shared sources
  double min_amplitude = 0.5;
  double max_amplitude = 1.5;
  double noise_std = 0.1;
  std::size_t n_spikes = 10;
  std::size_t n_level_shifts = 10;
  double spike_magnitude = 10.0;  // in units of the feature's clean std
  std::size_t spike_max_len = 3;
  double shift_magnitude = 3.0;   // in units of the feature's clean std
  std::size_t shift_min_len = 30;
  std::size_t shift_max_len = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthData {
  SeriesFrame train;
  SeriesFrame test;             // labelled
  Tensor test_clean;            // test values before injection
  std::vector<double> feature_std;  // per-feature std of the noise-free train signal
  std::vector<InjectedAnomaly> anomalies;
};

SynthData synth_generate(const SynthSpec& spec);

}  // namespace dghl
