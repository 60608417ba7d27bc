#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>

namespace dghl {

// Named random streams split off one master seed.
enum class Stream : std::uint64_t {
  kInit = 1,
  kLangevin = 2,
  kBatch = 3,
  kOcclusion = 4,
  kDetect = 5,
  kSynth = 6,
};

/// Deterministic seed derived from a master seed, a stream tag, and any number
/// of indices (iteration, window id, ...). SplitMix64 mixing.
std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                          std::initializer_list<std::uint64_t> indices = {});

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  void fill_normal(std::span<double> out, double stddev = 1.0) {
    for (double& v : out) v = stddev * normal_(engine_);
  }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dghl
