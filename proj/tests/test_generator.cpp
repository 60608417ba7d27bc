#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dghl/error.hpp"
#include "dghl/generator.hpp"
#include "oracles.hpp"

using namespace dghl;

namespace {

// Replaces the tiny default init by O(1) values so finite differences are well scaled.
void randomize(GeneratorParams& p, std::uint64_t seed) {
  for (LayerParams& layer : p.layers) {
    layer.kernel = oracle::random_tensor(layer.kernel.shape(), seed++, 0.5);
    layer.bias = oracle::random_tensor(layer.bias.shape(), seed++, 0.3);
    if (layer.batch_norm) {
      layer.gamma = oracle::random_tensor(layer.gamma.shape(), seed++, 1.0);
      layer.beta = oracle::random_tensor(layer.beta.shape(), seed++, 0.3);
      layer.running_mean = oracle::random_tensor(layer.running_mean.shape(), seed++, 0.3);
      auto rv = oracle::random_vector(layer.running_var.size(), seed++);
      for (std::size_t c = 0; c < rv.size(); ++c) layer.running_var[c] = 0.5 + rv[c] * rv[c];
    }
  }
}

LatentState random_latent(const HierarchySpec& spec, std::uint64_t seed) {
  return LatentState(latent_layout(spec), oracle::random_vector(latent_layout(spec).total, seed));
}

GeneratorArch small_arch(std::size_t m, std::size_t sub_len, std::size_t state_dim) {
  GeneratorArch a;
  a.n_features = m;
  a.sub_window_len = sub_len;
  a.filter_multiplier = 2;
  a.max_filters = 4;
  a.state_dim = state_dim;
  return a;
}

}  // namespace

TEST_CASE("default architecture filter and temporal paths") {
  GeneratorArch arch;
  arch.n_features = 38;
  arch.sub_window_len = 64;
  arch.filter_multiplier = 32;
  arch.max_filters = 256;
  arch.state_dim = 25;
  CHECK(arch.upsampling_layers() == 4);
  CHECK(arch.filters() == std::vector<std::size_t>{256, 128, 64, 32, 38});
  const GeneratorParams p = build_generator(arch, 1);
  REQUIRE(p.layers.size() == 5);
  CHECK(p.layers[0].kernel.shape() == Shape{25, 256, 4});
  CHECK(p.layers[4].kernel.shape() == Shape{32, 38, 4});
  GeneratorTape tape;
  const Tensor out = generator_forward(p, Tensor({1, 25}), Mode::kEval, &tape);
  std::vector<std::size_t> lengths;
  for (std::size_t l = 1; l < tape.layers.size(); ++l) lengths.push_back(tape.layers[l].input.dim(2));
  lengths.push_back(out.dim(2));
  CHECK(lengths == std::vector<std::size_t>{4, 8, 16, 32, 64});
  CHECK(out.shape() == Shape{1, 38, 64});
  CHECK(p.layers[0].stride == 1);
  CHECK(p.layers[0].padding == 0);
  CHECK(p.layers[1].stride == 2);
  CHECK(p.layers[1].padding == 1);
  CHECK(p.layers[3].batch_norm);
  CHECK(p.layers[3].relu);
  CHECK_FALSE(p.layers[4].batch_norm);
  CHECK_FALSE(p.layers[4].relu);
}

TEST_CASE("smallest stack") {
  GeneratorArch arch = small_arch(1, 8, 3);
  arch.filter_multiplier = 1;
  const GeneratorParams p = build_generator(arch, 2);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.output_len() == 8);
  CHECK(generate_sub_window(std::vector<double>(3, 0.1), p, Mode::kEval).shape() == Shape{1, 8});
}

TEST_CASE("build_generator initialisation") {
  GeneratorArch arch;
  arch.n_features = 5;
  const GeneratorParams a = build_generator(arch, 11);
  const GeneratorParams b = build_generator(arch, 11);
  const GeneratorParams c = build_generator(arch, 12);
  CHECK(a.learnable().size() == b.learnable().size());
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    identical = identical && a.layers[i].kernel == b.layers[i].kernel;
    differs = differs || a.layers[i].kernel != c.layers[i].kernel;
  }
  CHECK(identical);
  CHECK(differs);

  double n = 0.0, sum = 0.0, sum_sq = 0.0;
  for (const LayerParams& layer : a.layers) {
    for (double v : layer.kernel.data()) {
      n += 1;
      sum += v;
      sum_sq += v * v;
    }
    CHECK(max_abs(layer.bias) == 0.0);
    if (layer.batch_norm) {
      CHECK(layer.gamma == Tensor(layer.gamma.shape(), 1.0));
      CHECK(max_abs(layer.beta) == 0.0);
      CHECK(max_abs(layer.running_mean) == 0.0);
      CHECK(layer.running_var == Tensor(layer.running_var.shape(), 1.0));
    }
  }
  CHECK(std::abs(sum / n) < 1e-3);
  CHECK(std::sqrt(sum_sq / n) == doctest::Approx(0.02).epsilon(0.02));
}

TEST_CASE("invalid architectures") {
  GeneratorArch arch = small_arch(2, 12, 3);
  CHECK_THROWS_AS(build_generator(arch, 1), ValidationError);
  arch.sub_window_len = 4;
  CHECK_THROWS_AS(build_generator(arch, 1), ValidationError);
  arch.sub_window_len = 8;
  arch.n_features = 0;
  CHECK_THROWS_AS(build_generator(arch, 1), ValidationError);
}

TEST_CASE("generate_sub_window") {
  GeneratorParams p = build_generator(small_arch(2, 16, 3), 3);
  SUBCASE("zero weights and state give a zero block") {
    for (Tensor* t : p.learnable()) t->fill(0.0);
    for (LayerParams& layer : p.layers)
      if (layer.batch_norm) layer.gamma.fill(0.0);
    const Tensor out = generate_sub_window(std::vector<double>(3, 0.0), p, Mode::kEval);
    CHECK(out.shape() == Shape{2, 16});
    CHECK(max_abs(out) == 0.0);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(generate_sub_window(std::vector<double>(4, 0.0), p, Mode::kEval), ShapeError);
  }
  SUBCASE("single linear layer equals a dense matrix product") {
    const Tensor kernel = oracle::random_tensor({3, 2, 5}, 30);
    const Tensor bias = oracle::random_tensor({2}, 31);
    const GeneratorParams lin = oracle::linear_generator(kernel, bias);
    const std::vector<double> s = oracle::random_vector(3, 32);
    const Tensor out = generate_sub_window(s, lin, Mode::kEval);
    const std::vector<double> w = oracle::linear_generator_matrix(kernel);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t t = 0; t < 5; ++t) {
        double expect = bias[i];
        for (std::size_t j = 0; j < 3; ++j) expect += w[(i * 5 + t) * 3 + j] * s[j];
        CHECK(out.at(i, t) == doctest::Approx(expect).epsilon(1e-14));
      }
  }
}

TEST_CASE("generate_window shape and locality") {
  GeneratorArch arch;
  arch.n_features = 3;
  const HierarchySpec spec{{1, 4}, {20, 5}, 64};
  GeneratorParams p = build_generator(arch, 4);
  randomize(p, 40);
  const LatentState z = random_latent(spec, 41);
  const Tensor base = generate_window(z, p, spec, Mode::kEval);
  CHECK(base.shape() == Shape{3, 256});

  LatentState z2 = z;
  z2.vec(0, 2)[0] += 0.5;
  const Tensor pert = generate_window(z2, p, spec, Mode::kEval);
  for (std::size_t t = 0; t < 256; ++t) {
    double diff = 0.0;
    for (std::size_t i = 0; i < 3; ++i) diff += std::abs(pert.at(i, t) - base.at(i, t));
    if (t >= 128 && t < 192) continue;
    CHECK(diff == 0.0);
  }
  double inside = 0.0;
  for (std::size_t t = 128; t < 192; ++t)
    for (std::size_t i = 0; i < 3; ++i) inside += std::abs(pert.at(i, t) - base.at(i, t));
  CHECK(inside > 0.0);

  SUBCASE("single level reduces to generate_sub_window") {
    const HierarchySpec flat{{1}, {25}, 64};
    const LatentState zf = random_latent(flat, 42);
    CHECK(generate_window(zf, p, flat, Mode::kEval) == generate_sub_window(zf.values(), p, Mode::kEval));
  }
  SUBCASE("geometry mismatch") {
    const HierarchySpec wrong{{1, 4}, {20, 4}, 64};
    CHECK_THROWS_AS(generate_window(random_latent(wrong, 1), p, wrong, Mode::kEval), ShapeError);
  }
}

TEST_CASE("generator_backward") {
  const HierarchySpec spec{{1, 2}, {2, 2}, 16};
  GeneratorParams p = build_generator(small_arch(3, 16, 4), 5);
  randomize(p, 50);

  SUBCASE("zero upstream gradient") {
    const WindowGrad g = generator_backward(random_latent(spec, 51), p, spec, Tensor({3, 32}), Mode::kEval);
    CHECK(g.grad_latents[0].squared_norm() == 0.0);
    for (const Tensor& t : g.grad_params) CHECK(max_abs(t) == 0.0);
  }

  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    CAPTURE(static_cast<int>(mode));
    LatentState z = random_latent(spec, 52);
    const Tensor weights = oracle::random_tensor({3, 32}, 53);
    auto loss = [&] { return oracle::weighted_sum(weights, generate_window(z, p, spec, mode)); };
    const WindowGrad g = generator_backward(z, p, spec, weights, mode);
    CHECK(oracle::max_relative_error(g.grad_latents[0].values(), oracle::finite_difference(z.values(), loss)) < 1e-4);
    const auto params = p.learnable();
    REQUIRE(g.grad_params.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      CAPTURE(i);
      CHECK(oracle::max_relative_error(g.grad_params[i].data(), oracle::finite_difference(params[i]->data(), loss)) < 1e-4);
    }
  }
}

TEST_CASE("tied latent gradient equals the sum over untied duplicates") {
  // Untied oracle: every sub-window gets its own copy of the state vector and
  // the batch backward returns one gradient row per copy.
  const HierarchySpec tied{{1, 2}, {2, 3}, 8};
  GeneratorParams p = build_generator(small_arch(2, 8, 5), 6);
  randomize(p, 60);
  for (Mode mode : {Mode::kEval, Mode::kTrain}) {
    CAPTURE(static_cast<int>(mode));
    const LatentState z = random_latent(tied, 61);
    Tensor states({2, 5});
    for (std::size_t j = 0; j < 2; ++j) {
      const std::vector<double> s = state_vector(z, j, tied);
      for (std::size_t c = 0; c < 5; ++c) states.at(j, c) = s[c];
    }
    GeneratorTape tape;
    const Tensor copies = generator_forward(p, states, mode, &tape);
    const Tensor g_out = oracle::random_tensor({2, 16}, 62);
    Tensor g_copies({2, 2, 8});
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 0; t < 8; ++t) g_copies.at(j, i, t) = g_out.at(i, j * 8 + t);
    const GeneratorGrad gu = generator_backward_batch(p, tape, g_copies, false);
    const WindowGrad gt = generator_backward(z, p, tied, g_out, mode);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(gt.grad_latents[0].vec(1, 0)[c] == gu.grad_states.at(0, 2 + c) + gu.grad_states.at(1, 2 + c));
    }
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t c = 0; c < 2; ++c) CHECK(gt.grad_latents[0].vec(0, j)[c] == gu.grad_states.at(j, c));
    (void)copies;
  }
}

TEST_CASE("running statistics follow the train-mode tape") {
  const HierarchySpec spec{{1, 2}, {2, 2}, 8};
  GeneratorParams p = build_generator(small_arch(2, 8, 4), 7);
  const std::vector<LatentState> zs = {random_latent(spec, 70), random_latent(spec, 71)};
  const GeneratorParams before = p;
  const WindowPass eval_pass = forward_windows(zs, p, spec, Mode::kEval);
  update_running_stats(p, eval_pass.tape);
  CHECK(p.layers[0].running_mean == before.layers[0].running_mean);

  const WindowPass pass = forward_windows(zs, p, spec, Mode::kTrain);
  update_running_stats(p, pass.tape);
  const BatchStats& st = pass.tape.layers[0].stats;
  CHECK(st.count == 4 * 4);  // 2 windows x 2 sub-windows x length 4
  for (std::size_t c = 0; c < st.mean.size(); ++c) {
    CHECK(p.layers[0].running_mean[c] == doctest::Approx(0.1 * st.mean[c]).epsilon(1e-12));
    const double unbiased = st.var[c] * 16.0 / 15.0;
    CHECK(p.layers[0].running_var[c] == doctest::Approx(0.9 + 0.1 * unbiased).epsilon(1e-12));
  }
}

TEST_CASE("generator checkpoint round trip") {
  GeneratorArch arch;
  arch.n_features = 4;
  GeneratorParams p = build_generator(arch, 8);
  randomize(p, 80);
  std::stringstream buf;
  write_generator(buf, p);
  const GeneratorParams back = read_generator(buf);
  CHECK(back.arch == p.arch);
  REQUIRE(back.layers.size() == p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    CHECK(back.layers[i].kernel == p.layers[i].kernel);
    CHECK(back.layers[i].bias == p.layers[i].bias);
    CHECK(back.layers[i].running_var == p.layers[i].running_var);
    CHECK(back.layers[i].stride == p.layers[i].stride);
    CHECK(back.layers[i].relu == p.layers[i].relu);
  }
  CHECK(back.bn_eps == p.bn_eps);

  std::stringstream bad("DGHLGENX and more bytes");
  CHECK_THROWS_AS(read_generator(bad), ParseError);
  const std::string full = [&] {
    std::stringstream s;
    write_generator(s, p);
    return s.str();
  }();
  std::stringstream cut(full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(read_generator(cut), ParseError);
}
