#include "dghl/synth.hpp"

#include <cmath>
#include <numbers>

#include "dghl/error.hpp"
#include "dghl/rng.hpp"

namespace dghl {

void SynthSpec::validate() const {
  if (n_features < 1 || train_len < 1 || test_len < 1) {
    throw ValidationError("synth: features and lengths must be >= 1");
  }
  if (periods.empty()) throw ValidationError("synth: at least one source period required");
  for (double p : periods) {
    if (!(p > 0.0)) throw ValidationError("synth: periods must be positive");
  }
  if (!(noise_std >= 0.0)) throw ValidationError("synth: noise std must be >= 0");
  if (spike_max_len < 1 || shift_min_len < 1 || shift_max_len < shift_min_len) {
    throw ValidationError("synth: invalid anomaly lengths");
  }
  const std::size_t n = n_spikes + n_level_shifts;
  if (n > 0) {
    const std::size_t slot = test_len / n;
    if (slot < std::max(spike_max_len, shift_max_len) + 2) {
      throw ValidationError("synth: test split too short for " + std::to_string(n) +
                            " disjoint anomalies");
    }
  }
}

SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, Stream::kSynth));
  const std::size_t m = spec.n_features;
  const std::size_t k_src = spec.periods.size();

  std::vector<double> amplitude(m * k_src);
  std::vector<double> phase(m * k_src);
  for (std::size_t i = 0; i < m * k_src; ++i) {
    amplitude[i] = spec.min_amplitude + (spec.max_amplitude - spec.min_amplitude) * rng.uniform();
    phase[i] = 2.0 * std::numbers::pi * rng.uniform();
  }
  auto clean_value = [&](std::size_t i, std::size_t t) {
    double v = 0.0;
    for (std::size_t k = 0; k < k_src; ++k) {
      v += amplitude[i * k_src + k] *
           std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.periods[k] +
                    phase[i * k_src + k]);
    }
    return v;
  };

  SynthData out;
  Tensor train({m, spec.train_len});
  Tensor test({m, spec.test_len});
  out.feature_std.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < spec.train_len; ++t) {
      const double v = clean_value(i, t);
      sum += v;
      sum_sq += v * v;
      train.at(i, t) = v + spec.noise_std * rng.normal();
    }
    const double n = static_cast<double>(spec.train_len);
    out.feature_std[i] = std::sqrt(std::max(sum_sq / n - (sum / n) * (sum / n), 0.0));
    for (std::size_t t = 0; t < spec.test_len; ++t) {
      test.at(i, t) = clean_value(i, spec.train_len + t) + spec.noise_std * rng.normal();
    }
  }
  out.test_clean = test;

  // One anomaly per slot, kinds shuffled across slots.
  const std::size_t n_anom = spec.n_spikes + spec.n_level_shifts;
  std::vector<AnomalyKind> kinds(spec.n_spikes, AnomalyKind::kSpike);
  kinds.insert(kinds.end(), spec.n_level_shifts, AnomalyKind::kLevelShift);
  for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[rng.index(i)]);

  std::vector<bool> labels(spec.test_len, false);
  const std::size_t slot = n_anom > 0 ? spec.test_len / n_anom : 0;
  for (std::size_t a = 0; a < n_anom; ++a) {
    InjectedAnomaly an;
    an.kind = kinds[a];
    an.feature = rng.index(m);
    const std::size_t len =
        an.kind == AnomalyKind::kSpike
            ? 1 + rng.index(spec.spike_max_len)
            : spec.shift_min_len + rng.index(spec.shift_max_len - spec.shift_min_len + 1);
    // Keep one clean timestamp on either side inside the slot.
    const std::size_t slot_begin = a * slot;
    an.begin = slot_begin + 1 + rng.index(slot - len - 1);
    an.end = an.begin + len;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double magnitude =
        an.kind == AnomalyKind::kSpike ? spec.spike_magnitude : spec.shift_magnitude;
    an.offset = sign * magnitude * out.feature_std[an.feature];
    for (std::size_t t = an.begin; t < an.end; ++t) {
      test.at(an.feature, t) += an.offset;
      labels[t] = true;
    }
    out.anomalies.push_back(an);
  }

  out.train = SeriesFrame::from_values(std::move(train), "synth");
  out.test = SeriesFrame::from_values(std::move(test), "synth");
  out.test.labels = std::move(labels);
  for (std::size_t i = 0; i < m; ++i) {
    out.train.feature_names.push_back("f" + std::to_string(i));
  }
  out.test.feature_names = out.train.feature_names;
  return out;
}

}  // namespace dghl
