#include "dghl/generator.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "binio.hpp"
#include "dghl/error.hpp"
#include "dghl/rng.hpp"

namespace dghl {

namespace {
constexpr std::size_t kBaseLength = 4;
constexpr std::size_t kKernelSize = 4;
constexpr double kInitStd = 0.02;
}  // namespace

void GeneratorArch::validate() const {
  if (n_features < 1) throw ValidationError("generator arch: n_features must be >= 1");
  if (state_dim < 1) throw ValidationError("generator arch: state_dim must be >= 1");
  if (filter_multiplier < 1) throw ValidationError("generator arch: filter_multiplier must be >= 1");
  if (max_filters < 1) throw ValidationError("generator arch: max_filters must be >= 1");
  const bool pow2 = sub_window_len >= 8 && (sub_window_len & (sub_window_len - 1)) == 0;
  if (!pow2) {
    throw ValidationError("generator arch: sub_window_len must be a power of two >= 8, got " +
                          std::to_string(sub_window_len));
  }
}

std::size_t GeneratorArch::upsampling_layers() const {
  std::size_t k = 0;
  for (std::size_t len = kBaseLength; len < sub_window_len; len *= 2) ++k;
  return k;
}

std::vector<std::size_t> GeneratorArch::filters() const {
  const std::size_t k = upsampling_layers();
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < k; ++l) {
    out.push_back(std::min(filter_multiplier << (k - 1 - l), max_filters));
  }
  out.push_back(n_features);
  return out;
}

std::size_t GeneratorParams::output_len() const {
  std::size_t len = 1;
  for (const LayerParams& layer : layers) {
    len = conv1d_transpose_output_length(len, layer.kernel.dim(2), layer.stride, layer.padding);
  }
  return len;
}

void GeneratorParams::validate() const {
  if (layers.empty()) throw ValidationError("generator: no layers");
  std::size_t channels = layers.front().kernel.rank() == 3 ? layers.front().kernel.dim(0) : 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerParams& layer = layers[i];
    const std::string where = "generator layer " + std::to_string(i);
    if (layer.kernel.rank() != 3 || layer.kernel.dim(0) != channels) {
      throw ShapeError(where + ": kernel " + to_string(layer.kernel.shape()) + " expects " +
                       std::to_string(channels) + " input channels");
    }
    const std::size_t c_out = layer.kernel.dim(1);
    if (layer.bias.size() != c_out) throw ShapeError(where + ": bias size mismatch");
    if (layer.batch_norm) {
      for (const Tensor* t : {&layer.gamma, &layer.beta, &layer.running_mean, &layer.running_var}) {
        if (t->size() != c_out) throw ShapeError(where + ": batch-norm parameter size mismatch");
      }
    }
    channels = c_out;
  }
  (void)output_len();
}

std::vector<Tensor*> GeneratorParams::learnable() {
  std::vector<Tensor*> out;
  for (LayerParams& layer : layers) {
    out.push_back(&layer.kernel);
    out.push_back(&layer.bias);
    if (layer.batch_norm) {
      out.push_back(&layer.gamma);
      out.push_back(&layer.beta);
    }
  }
  return out;
}

std::vector<const Tensor*> GeneratorParams::learnable() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<GeneratorParams*>(this)->learnable()) out.push_back(t);
  return out;
}

std::vector<std::string> GeneratorParams::learnable_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    out.push_back(prefix + "kernel");
    out.push_back(prefix + "bias");
    if (layers[i].batch_norm) {
      out.push_back(prefix + "gamma");
      out.push_back(prefix + "beta");
    }
  }
  return out;
}

GeneratorParams build_generator(const GeneratorArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(derive_seed(seed, Stream::kInit));
  const std::vector<std::size_t> filters = arch.filters();

  GeneratorParams params;
  params.arch = arch;
  std::size_t c_in = arch.state_dim;
  for (std::size_t l = 0; l < filters.size(); ++l) {
    const bool last = l + 1 == filters.size();
    LayerParams layer;
    layer.kernel = Tensor({c_in, filters[l], kKernelSize});
    rng.fill_normal(layer.kernel.data(), kInitStd);
    layer.bias = Tensor({filters[l]});
    layer.stride = l == 0 ? 1 : 2;
    layer.padding = l == 0 ? 0 : 1;
    layer.batch_norm = !last;
    layer.relu = !last;
    if (layer.batch_norm) {
      layer.gamma = Tensor({filters[l]}, 1.0);
      layer.beta = Tensor({filters[l]});
      layer.running_mean = Tensor({filters[l]});
      layer.running_var = Tensor({filters[l]}, 1.0);
    }
    params.layers.push_back(std::move(layer));
    c_in = filters[l];
  }
  params.validate();
  return params;
}

Tensor generator_forward(const GeneratorParams& params, const Tensor& states, Mode mode,
                         GeneratorTape* tape) {
  if (states.rank() != 2 || states.dim(1) != params.state_dim()) {
    throw ShapeError("generator_forward: states " + to_string(states.shape()) +
                     " but generator expects [B x " + std::to_string(params.state_dim()) + "]");
  }
  if (tape) {
    tape->mode = mode;
    tape->layers.assign(params.layers.size(), {});
  }
  Tensor x = states.reshaped({states.dim(0), states.dim(1), 1});
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LayerParams& layer = params.layers[i];
    Tensor y = conv1d_transpose_forward(x, layer.kernel, layer.bias, layer.stride, layer.padding);
    LayerTape* lt = tape ? &tape->layers[i] : nullptr;
    if (lt) lt->input = std::move(x);
    if (layer.batch_norm) {
      BatchNormOutput bn = batchnorm_forward(y, layer.gamma, layer.beta, layer.running_mean,
                                             layer.running_var, mode, params.bn_eps);
      if (lt) {
        lt->conv_out = std::move(y);
        lt->stats = std::move(bn.stats);
      }
      y = std::move(bn.output);
    }
    if (layer.relu) {
      Tensor activated = relu_forward(y);
      if (lt) lt->bn_out = std::move(y);
      y = std::move(activated);
    }
    x = std::move(y);
  }
  return x;
}

GeneratorGrad generator_backward_batch(const GeneratorParams& params, const GeneratorTape& tape,
                                       const Tensor& grad_output, bool want_param_grads) {
  if (tape.layers.size() != params.layers.size()) {
    throw ShapeError("generator_backward: tape does not match generator depth");
  }
  std::vector<std::vector<Tensor>> per_layer(params.layers.size());
  Tensor g = grad_output;
  for (std::size_t n = params.layers.size(); n-- > 0;) {
    const LayerParams& layer = params.layers[n];
    const LayerTape& lt = tape.layers[n];
    if (layer.relu) g = relu_backward(lt.bn_out, g);
    std::vector<Tensor> bn_grads;
    if (layer.batch_norm) {
      LayerGrad bg = batchnorm_backward(lt.conv_out, layer.gamma, lt.stats, tape.mode,
                                        params.bn_eps, g);
      g = std::move(bg.grad_input);
      bn_grads = std::move(bg.grad_params);
    }
    LayerGrad cg = conv1d_transpose_backward(lt.input, layer.kernel, layer.stride, layer.padding,
                                             g, want_param_grads);
    g = std::move(cg.grad_input);
    if (want_param_grads) {
      per_layer[n] = std::move(cg.grad_params);
      for (Tensor& t : bn_grads) per_layer[n].push_back(std::move(t));
    }
  }
  GeneratorGrad out;
  out.grad_states = g.reshaped({g.dim(0), g.dim(1)});
  if (want_param_grads) {
    for (auto& grads : per_layer) {
      for (Tensor& t : grads) out.grad_params.push_back(std::move(t));
    }
  }
  return out;
}

void update_running_stats(GeneratorParams& params, const GeneratorTape& tape) {
  if (tape.mode != Mode::kTrain) return;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    LayerParams& layer = params.layers[i];
    if (!layer.batch_norm) continue;
    update_running_stats(tape.layers[i].stats, params.bn_momentum, layer.running_mean,
                         layer.running_var);
  }
}

Tensor generate_sub_window(std::span<const double> state, const GeneratorParams& params,
                           Mode mode) {
  if (state.size() != params.state_dim()) {
    throw ShapeError("generate_sub_window: state has " + std::to_string(state.size()) +
                     " entries, generator expects " + std::to_string(params.state_dim()));
  }
  Tensor s({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  Tensor out = generator_forward(params, s, mode);
  return out.reshaped({out.dim(1), out.dim(2)});
}

namespace {

void check_window_geometry(const GeneratorParams& params, const HierarchySpec& spec) {
  if (params.state_dim() != spec.state_dim()) {
    throw ShapeError("generator state_dim " + std::to_string(params.state_dim()) +
                     " does not match hierarchy state_dim " + std::to_string(spec.state_dim()));
  }
  if (params.output_len() != spec.sub_window_len) {
    throw ShapeError("generator output length " + std::to_string(params.output_len()) +
                     " does not match sub_window_len " + std::to_string(spec.sub_window_len));
  }
}

}  // namespace

WindowPass forward_windows(std::span<const LatentState> latents, const GeneratorParams& params,
                           const HierarchySpec& spec, Mode mode) {
  check_window_geometry(params, spec);
  const std::size_t subs = spec.sub_windows();
  const std::size_t dim = spec.state_dim();
  const std::size_t sub_len = spec.sub_window_len;
  const std::size_t m = params.n_features();

  Tensor states({latents.size() * subs, dim});
  for (std::size_t w = 0; w < latents.size(); ++w) {
    if (!(latents[w].layout() == latent_layout(spec))) {
      throw ShapeError("forward_windows: latent " + std::to_string(w) +
                       " does not conform to the hierarchy");
    }
    for (std::size_t j = 0; j < subs; ++j) {
      const std::vector<double> s = state_vector(latents[w], j, spec);
      std::copy(s.begin(), s.end(), states.data().begin() + (w * subs + j) * dim);
    }
  }

  WindowPass pass;
  const Tensor batch = generator_forward(params, states, mode, &pass.tape);
  for (std::size_t w = 0; w < latents.size(); ++w) {
    Tensor window({m, subs * sub_len});
    for (std::size_t j = 0; j < subs; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < sub_len; ++t) {
          window.at(i, j * sub_len + t) = batch.at(w * subs + j, i, t);
        }
      }
    }
    pass.outputs.push_back(std::move(window));
  }
  return pass;
}

WindowGrad backward_windows(const WindowPass& pass, std::span<const LatentState> latents,
                            const GeneratorParams& params, const HierarchySpec& spec,
                            std::span<const Tensor> grad_outputs, bool want_param_grads) {
  if (grad_outputs.size() != latents.size() || pass.outputs.size() != latents.size()) {
    throw ShapeError("backward_windows: window count mismatch");
  }
  const std::size_t subs = spec.sub_windows();
  const std::size_t sub_len = spec.sub_window_len;
  const std::size_t m = params.n_features();

  Tensor g({latents.size() * subs, m, sub_len});
  for (std::size_t w = 0; w < latents.size(); ++w) {
    require_same_shape(grad_outputs[w], pass.outputs[w], "backward_windows grad_output");
    for (std::size_t j = 0; j < subs; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < sub_len; ++t) {
          g.at(w * subs + j, i, t) = grad_outputs[w].at(i, j * sub_len + t);
        }
      }
    }
  }

  GeneratorGrad gg = generator_backward_batch(params, pass.tape, g, want_param_grads);
  WindowGrad out;
  out.grad_params = std::move(gg.grad_params);
  const std::size_t dim = spec.state_dim();
  for (std::size_t w = 0; w < latents.size(); ++w) {
    LatentState grad(latents[w].layout());
    for (std::size_t j = 0; j < subs; ++j) {
      std::size_t offset = 0;
      for (std::size_t l = 0; l < spec.levels(); ++l) {
        auto target = grad.vec(l, j / spec.tying[l]);
        for (std::size_t k = 0; k < target.size(); ++k) {
          target[k] += gg.grad_states[(w * subs + j) * dim + offset + k];
        }
        offset += target.size();
      }
    }
    out.grad_latents.push_back(std::move(grad));
  }
  return out;
}

Tensor generate_window(const LatentState& z, const GeneratorParams& params,
                       const HierarchySpec& spec, Mode mode) {
  WindowPass pass = forward_windows(std::span(&z, 1), params, spec, mode);
  return std::move(pass.outputs.front());
}

WindowGrad generator_backward(const LatentState& z, const GeneratorParams& params,
                              const HierarchySpec& spec, const Tensor& grad_output, Mode mode) {
  const WindowPass pass = forward_windows(std::span(&z, 1), params, spec, mode);
  return backward_windows(pass, std::span(&z, 1), params, spec, std::span(&grad_output, 1), true);
}

// ---- checkpoints ---------------------------------------------------------

namespace {
constexpr char kGeneratorMagic[9] = "DGHLGEN1";
constexpr std::uint64_t kGeneratorVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t) {
  binio::write_u64(out, t.rank());
  for (std::size_t d : t.shape()) binio::write_u64(out, d);
  binio::write_f64s(out, t.data());
}

Tensor read_tensor(std::istream& in) {
  const std::uint64_t rank = binio::read_u64(in, "generator tensor");
  if (rank > 8) throw ParseError("generator file: implausible tensor rank");
  Shape shape;
  for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(binio::read_u64(in, "generator tensor"));
  if (shape_size(shape) > (std::size_t{1} << 28)) {
    throw ParseError("generator file: implausible tensor size");
  }
  Tensor t(shape);
  binio::read_f64s(in, t.data(), "generator tensor");
  return t;
}
}  // namespace

void write_generator(std::ostream& out, const GeneratorParams& params) {
  binio::write_magic(out, kGeneratorMagic);
  binio::write_u64(out, kGeneratorVersion);
  const GeneratorArch& a = params.arch;
  for (std::size_t v : {a.n_features, a.sub_window_len, a.filter_multiplier, a.max_filters,
                        a.state_dim}) {
    binio::write_u64(out, v);
  }
  binio::write_f64(out, params.bn_momentum);
  binio::write_f64(out, params.bn_eps);
  binio::write_u64(out, params.layers.size());
  for (const LayerParams& layer : params.layers) {
    binio::write_u64(out, layer.stride);
    binio::write_u64(out, layer.padding);
    binio::write_u64(out, (layer.batch_norm ? 1u : 0u) | (layer.relu ? 2u : 0u));
    write_tensor(out, layer.kernel);
    write_tensor(out, layer.bias);
    if (layer.batch_norm) {
      write_tensor(out, layer.gamma);
      write_tensor(out, layer.beta);
      write_tensor(out, layer.running_mean);
      write_tensor(out, layer.running_var);
    }
  }
}

GeneratorParams read_generator(std::istream& in) {
  binio::read_magic(in, kGeneratorMagic, "generator file");
  const std::uint64_t version = binio::read_u64(in, "generator header");
  if (version != kGeneratorVersion) {
    throw ParseError("generator file: unsupported version " + std::to_string(version));
  }
  GeneratorParams params;
  GeneratorArch& a = params.arch;
  for (std::size_t* v : {&a.n_features, &a.sub_window_len, &a.filter_multiplier, &a.max_filters,
                         &a.state_dim}) {
    *v = binio::read_u64(in, "generator header");
  }
  params.bn_momentum = binio::read_f64(in, "generator header");
  params.bn_eps = binio::read_f64(in, "generator header");
  const std::uint64_t n_layers = binio::read_u64(in, "generator header");
  if (n_layers > 64) throw ParseError("generator file: implausible layer count");
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    LayerParams layer;
    layer.stride = binio::read_u64(in, "generator layer");
    layer.padding = binio::read_u64(in, "generator layer");
    const std::uint64_t flags = binio::read_u64(in, "generator layer");
    layer.batch_norm = flags & 1u;
    layer.relu = flags & 2u;
    layer.kernel = read_tensor(in);
    layer.bias = read_tensor(in);
    if (layer.batch_norm) {
      layer.gamma = read_tensor(in);
      layer.beta = read_tensor(in);
      layer.running_mean = read_tensor(in);
      layer.running_var = read_tensor(in);
    }
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

}  // namespace dghl
