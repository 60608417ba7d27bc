#pragma once

// Hierarchical latent factor space. A window is split into a_L sub-windows;
// on level l, one latent vector of size d_l is shared by a_l consecutive
// sub-windows, so level l holds a_L / a_l vectors.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace dghl {

struct HierarchySpec {
  std::vector<std::size_t> tying;        // a_1..a_L
  std::vector<std::size_t> latent_dims;  // d_1..d_L
  std::size_t sub_window_len = 64;

  // Throws ValidationError listing the violated invariant.
  void validate() const;

  std::size_t levels() const { return tying.size(); }
  std::size_t sub_windows() const { return tying.back(); }
  std::size_t window_len() const { return tying.back() * sub_window_len; }
  std::size_t state_dim() const;

  bool operator==(const HierarchySpec&) const = default;
};

struct LatentLayout {
  std::vector<std::size_t> counts;   // vectors per level
  std::vector<std::size_t> dims;     // size of each vector per level
  std::vector<std::size_t> offsets;  // start of each level in the flat store
  std::size_t total = 0;

  bool operator==(const LatentLayout&) const = default;
};

LatentLayout latent_layout(const HierarchySpec& spec);

/// All latent vectors of one window, stored level-major in one flat array so
/// the sampler can treat them as a single coordinate vector.
class LatentState {
 public:
  LatentState() = default;
  explicit LatentState(LatentLayout layout);
  LatentState(LatentLayout layout, std::vector<double> values);

  const LatentLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> vec(std::size_t level, std::size_t index);
  std::span<const double> vec(std::size_t level, std::size_t index) const;

  double squared_norm() const;

  bool operator==(const LatentState&) const = default;

 private:
  LatentLayout layout_;
  std::vector<double> values_;
};

/// s_j: concatenation over levels 1..L of z^l at index floor(j / a_l).
std::vector<double> state_vector(const LatentState& z, std::size_t j, const HierarchySpec& spec);

/// Standard-normal prior draws; window i uses its own stream derived from seed.
std::vector<LatentState> init_latents(const HierarchySpec& spec, std::size_t n_windows,
                                      std::uint64_t seed);

/// Flat binary record: magic, level counts/dims header, float64 payload.
void write_latents(std::ostream& out, std::span<const LatentState> states);
std::vector<LatentState> read_latents(std::istream& in);

}  // namespace dghl
