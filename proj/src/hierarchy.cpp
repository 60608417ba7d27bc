#include "dghl/hierarchy.hpp"

#include <numeric>
#include <string>

#include "binio.hpp"
#include "dghl/error.hpp"
#include "dghl/rng.hpp"

namespace dghl {

void HierarchySpec::validate() const {
  if (tying.empty()) throw ValidationError("hierarchy: at least one level required");
  if (tying.size() != latent_dims.size()) {
    throw ValidationError("hierarchy: " + std::to_string(tying.size()) + " tying factors but " +
                          std::to_string(latent_dims.size()) + " latent dims");
  }
  if (tying.front() < 1) throw ValidationError("hierarchy: a_1 must be >= 1");
  for (std::size_t l = 0; l < tying.size(); ++l) {
    if (l > 0 && tying[l] < tying[l - 1]) {
      throw ValidationError("hierarchy: tying factors must be non-decreasing");
    }
    if (tying.back() % tying[l] != 0) {
      throw ValidationError("hierarchy: a_" + std::to_string(l + 1) + "=" +
                            std::to_string(tying[l]) + " does not divide a_L=" +
                            std::to_string(tying.back()));
    }
    if (latent_dims[l] < 1) {
      throw ValidationError("hierarchy: latent dim of level " + std::to_string(l + 1) +
                            " must be >= 1");
    }
  }
  if (sub_window_len < 1) throw ValidationError("hierarchy: sub_window_len must be >= 1");
}

std::size_t HierarchySpec::state_dim() const {
  return std::accumulate(latent_dims.begin(), latent_dims.end(), std::size_t{0});
}

LatentLayout latent_layout(const HierarchySpec& spec) {
  spec.validate();
  LatentLayout layout;
  for (std::size_t l = 0; l < spec.levels(); ++l) {
    layout.counts.push_back(spec.sub_windows() / spec.tying[l]);
    layout.dims.push_back(spec.latent_dims[l]);
    layout.offsets.push_back(layout.total);
    layout.total += layout.counts.back() * layout.dims.back();
  }
  return layout;
}

LatentState::LatentState(LatentLayout layout)
    : layout_(std::move(layout)), values_(layout_.total, 0.0) {}

LatentState::LatentState(LatentLayout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.total) {
    throw ShapeError("latent state: " + std::to_string(values_.size()) +
                     " values for a layout of " + std::to_string(layout_.total));
  }
}

std::span<double> LatentState::vec(std::size_t level, std::size_t index) {
  if (level >= layout_.counts.size() || index >= layout_.counts[level]) {
    throw std::out_of_range("latent vector (" + std::to_string(level) + ", " +
                            std::to_string(index) + ") out of range");
  }
  return std::span<double>(values_).subspan(
      layout_.offsets[level] + index * layout_.dims[level], layout_.dims[level]);
}

std::span<const double> LatentState::vec(std::size_t level, std::size_t index) const {
  return const_cast<LatentState*>(this)->vec(level, index);
}

double LatentState::squared_norm() const {
  double acc = 0.0;
  for (double v : values_) acc += v * v;
  return acc;
}

std::vector<double> state_vector(const LatentState& z, std::size_t j, const HierarchySpec& spec) {
  if (j >= spec.sub_windows()) {
    throw std::out_of_range("state_vector: sub-window " + std::to_string(j) + " not in [0, " +
                            std::to_string(spec.sub_windows()) + ")");
  }
  std::vector<double> s;
  s.reserve(spec.state_dim());
  for (std::size_t l = 0; l < spec.levels(); ++l) {
    const auto v = z.vec(l, j / spec.tying[l]);
    s.insert(s.end(), v.begin(), v.end());
  }
  return s;
}

std::vector<LatentState> init_latents(const HierarchySpec& spec, std::size_t n_windows,
                                      std::uint64_t seed) {
  const LatentLayout layout = latent_layout(spec);
  std::vector<LatentState> out;
  out.reserve(n_windows);
  for (std::size_t i = 0; i < n_windows; ++i) {
    LatentState z(layout);
    Rng rng(derive_seed(seed, Stream::kInit, {i}));
    rng.fill_normal(z.values());
    out.push_back(std::move(z));
  }
  return out;
}

namespace {
constexpr char kLatentMagic[9] = "DGHLLAT1";
}

void write_latents(std::ostream& out, std::span<const LatentState> states) {
  binio::write_magic(out, kLatentMagic);
  const LatentLayout layout = states.empty() ? LatentLayout{} : states.front().layout();
  binio::write_u64(out, layout.counts.size());
  for (std::size_t l = 0; l < layout.counts.size(); ++l) {
    binio::write_u64(out, layout.counts[l]);
    binio::write_u64(out, layout.dims[l]);
  }
  binio::write_u64(out, states.size());
  for (const LatentState& z : states) {
    if (!(z.layout() == layout)) throw ShapeError("write_latents: mixed latent layouts");
    binio::write_f64s(out, z.values());
  }
}

std::vector<LatentState> read_latents(std::istream& in) {
  binio::read_magic(in, kLatentMagic, "latent file");
  LatentLayout layout;
  const std::uint64_t levels = binio::read_u64(in, "latent header");
  if (levels > 64) throw ParseError("latent file: implausible level count");
  for (std::uint64_t l = 0; l < levels; ++l) {
    layout.counts.push_back(binio::read_u64(in, "latent header"));
    layout.dims.push_back(binio::read_u64(in, "latent header"));
    layout.offsets.push_back(layout.total);
    layout.total += layout.counts.back() * layout.dims.back();
  }
  const std::uint64_t n = binio::read_u64(in, "latent header");
  std::vector<LatentState> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<double> values(layout.total);
    binio::read_f64s(in, values, "latent payload");
    out.emplace_back(layout, std::move(values));
  }
  return out;
}

}  // namespace dghl
