#include <doctest.h>

#include <cmath>
#include <limits>

#include "dghl/error.hpp"
#include "dghl/langevin.hpp"
#include "oracles.hpp"

using namespace dghl;

namespace {

GeneratorParams nonlinear_generator(std::size_t m, std::size_t sub_len, std::size_t state_dim,
                                    std::uint64_t seed) {
  GeneratorArch arch;
  arch.n_features = m;
  arch.sub_window_len = sub_len;
  arch.filter_multiplier = 4;
  arch.max_filters = 8;
  arch.state_dim = state_dim;
  GeneratorParams p = build_generator(arch, seed);
  for (LayerParams& layer : p.layers) layer.kernel *= 10.0;  // O(1) outputs
  return p;
}

LatentState random_latent(const HierarchySpec& spec, std::uint64_t seed) {
  return LatentState(latent_layout(spec), oracle::random_vector(latent_layout(spec).total, seed));
}

}  // namespace

TEST_CASE("langevin config validation") {
  CHECK_THROWS_AS((LangevinConfig{0, 0.001, 0.025, true}.validate()), ValidationError);
  CHECK_THROWS_AS((LangevinConfig{1, 0.0, 0.025, true}.validate()), ValidationError);
  CHECK_THROWS_AS((LangevinConfig{1, 0.001, -1.0, true}.validate()), ValidationError);
  CHECK_NOTHROW((LangevinConfig{}.validate()));
}

TEST_CASE("posterior gradient") {
  const HierarchySpec spec{{1, 2}, {3, 2}, 8};
  const GeneratorParams p = nonlinear_generator(2, 8, 5, 1);
  const LangevinConfig cfg{1, 0.001, 0.025, false};
  const LatentState z = random_latent(spec, 2);

  SUBCASE("exact fit leaves only the prior term") {
    const Tensor y = generate_window(z, p, spec, Mode::kEval);
    const LatentState g = posterior_grad(z, y, Mask(2, 16, true), p, spec, cfg);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.values()[k] == -z.values()[k]);
  }
  SUBCASE("fully occluded window") {
    Tensor y = oracle::random_tensor({2, 16}, 3, 100.0);
    y[5] = std::numeric_limits<double>::quiet_NaN();
    const LatentState g = posterior_grad(z, y, Mask(2, 16, false), p, spec, cfg);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.values()[k] == -z.values()[k]);
  }
  SUBCASE("linear generator matches the dense formula") {
    const oracle::LinearCase lc = oracle::make_linear_case(3, 6, 4, 4);
    const Tensor y = oracle::random_tensor({3, 6}, 5);
    Mask mask(3, 6, true);
    mask.set(1, 2, false);
    mask.set(0, 5, false);
    const LatentState zl = random_latent(lc.spec, 6);
    const LatentState g = posterior_grad(zl, y, mask, lc.params, lc.spec, cfg);
    const std::size_t n = lc.m * lc.len;
    std::vector<double> r(n);
    for (std::size_t row = 0; row < n; ++row) {
      double f = 0.0;
      for (std::size_t j = 0; j < lc.s; ++j) f += lc.w[row * lc.s + j] * zl.values()[j];
      r[row] = mask.flat(row) ? y[row] - f : 0.0;
    }
    for (std::size_t j = 0; j < lc.s; ++j) {
      double expect = -zl.values()[j];
      for (std::size_t row = 0; row < n; ++row) expect += lc.w[row * lc.s + j] * r[row] / (0.025 * 0.025);
      CHECK(g.values()[j] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("pure prior flow contracts geometrically") {
  const HierarchySpec spec{{1, 2}, {3, 2}, 8};
  GeneratorParams p = nonlinear_generator(2, 8, 5, 7);
  for (Tensor* t : p.learnable()) t->fill(0.0);
  const LatentState z0 = random_latent(spec, 8);
  Rng rng(1);
  const LatentState z = langevin_infer(Tensor({2, 16}), Mask(2, 16, true), p, spec,
                                       {100, 0.001, 0.025, false}, rng, z0);
  const double factor = std::pow(1.0 - 0.001, 100);
  for (std::size_t k = 0; k < z.size(); ++k) {
    CHECK(z.values()[k] == doctest::Approx(z0.values()[k] * factor).epsilon(1e-12));
  }
}

TEST_CASE("noiseless Langevin reaches the ridge solution") {
  const oracle::LinearCase lc = oracle::make_linear_case(2, 16, 6, 9);
  const Tensor y = oracle::random_tensor({2, 16}, 10);
  const double sigma = 0.025;
  // (W^T W + sigma^2 I) z = W^T y
  std::vector<double> a(lc.s * lc.s, 0.0), rhs(lc.s, 0.0);
  for (std::size_t i = 0; i < lc.s; ++i) {
    for (std::size_t j = 0; j < lc.s; ++j)
      for (std::size_t row = 0; row < 32; ++row) a[i * lc.s + j] += lc.w[row * lc.s + i] * lc.w[row * lc.s + j];
    a[i * lc.s + i] += sigma * sigma;
    for (std::size_t row = 0; row < 32; ++row) rhs[i] += lc.w[row * lc.s + i] * y[row];
  }
  const std::vector<double> ridge = oracle::solve(a, rhs);
  Rng rng(3);
  const LatentState z = langevin_infer(y, Mask(2, 16, true), lc.params, lc.spec,
                                       {500, 0.001, sigma, false}, rng, random_latent(lc.spec, 11));
  double err = 0.0, norm = 0.0;
  for (std::size_t j = 0; j < lc.s; ++j) {
    err += (z.values()[j] - ridge[j]) * (z.values()[j] - ridge[j]);
    norm += ridge[j] * ridge[j];
  }
  CHECK(std::sqrt(err / norm) < 1e-3);
}

TEST_CASE("noiseless iterations decrease the negative log posterior") {
  const oracle::LinearCase lc = oracle::make_linear_case(2, 16, 6, 12);
  const Tensor y = oracle::random_tensor({2, 16}, 13);
  const LangevinConfig one{1, 0.001, 0.025, false};
  const Mask mask(2, 16, true);
  LatentState z = random_latent(lc.spec, 14);
  Rng rng(0);
  double prev = neg_log_joint(z, y, mask, lc.params, lc.spec, one);
  for (int step = 0; step < 200; ++step) {
    z = langevin_infer(y, mask, lc.params, lc.spec, one, rng, z);
    const double cur = neg_log_joint(z, y, mask, lc.params, lc.spec, one);
    // Non-increasing up to rounding once the iterate has converged.
    CHECK(cur <= prev * (1.0 + 1e-12));
    prev = cur;
  }
}

TEST_CASE("noisy step equals noiseless step plus the injected noise") {
  const HierarchySpec spec{{1, 2}, {3, 2}, 8};
  const GeneratorParams p = nonlinear_generator(2, 8, 5, 15);
  const Tensor y = oracle::random_tensor({2, 16}, 16);
  const LatentState z0 = random_latent(spec, 17);
  Rng noisy_rng(99), clean_rng(99), eps_rng(99);
  const LatentState noisy = langevin_infer(y, Mask(2, 16, true), p, spec, {1, 0.001, 0.025, true}, noisy_rng, z0);
  const LatentState clean = langevin_infer(y, Mask(2, 16, true), p, spec, {1, 0.001, 0.025, false}, clean_rng, z0);
  const double scale = std::sqrt(2.0 * 0.001);
  for (std::size_t k = 0; k < z0.size(); ++k) {
    const double eps = eps_rng.normal();
    CHECK(noisy.values()[k] - clean.values()[k] == doctest::Approx(scale * eps).epsilon(1e-10));
  }
}

TEST_CASE("langevin determinism and masked invariance") {
  const HierarchySpec spec{{1, 2}, {3, 2}, 8};
  const GeneratorParams p = nonlinear_generator(2, 8, 5, 18);
  const LangevinConfig cfg{25, 0.001, 0.025, true};
  Tensor y = oracle::random_tensor({2, 16}, 19);
  Mask mask(2, 16, true);
  for (std::size_t t = 3; t < 9; ++t) mask.set(1, t, false);
  mask.set(0, 0, false);
  const LatentState z0 = random_latent(spec, 20);

  Rng r1(5), r2(5);
  const LatentState a = langevin_infer(y, mask, p, spec, cfg, r1, z0);
  const LatentState b = langevin_infer(y, mask, p, spec, cfg, r2, z0);
  CHECK(a == b);

  const double junk[] = {1e300, -7.5, std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::infinity()};
  for (double v : junk) {
    Tensor y2 = y;
    for (std::size_t t = 3; t < 9; ++t) y2.at(1, t) = v;
    y2.at(0, 0) = -v;
    Rng r3(5);
    CHECK(langevin_infer(y2, mask, p, spec, cfg, r3, z0) == a);
  }
}

TEST_CASE("divergence is reported with the step index") {
  const oracle::LinearCase lc = oracle::make_linear_case(2, 16, 6, 21);
  const Tensor y = oracle::random_tensor({2, 16}, 22);
  Rng rng(1);
  try {
    langevin_infer(y, Mask(2, 16, true), lc.params, lc.spec, {2000, 0.5, 0.025, false}, rng,
                   random_latent(lc.spec, 23));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("batched eval chains match independent chains") {
  const HierarchySpec spec{{1, 2}, {3, 2}, 8};
  const GeneratorParams p = nonlinear_generator(2, 8, 5, 24);
  const LangevinConfig cfg{10, 0.001, 0.025, true};
  std::vector<Tensor> ys = {oracle::random_tensor({2, 16}, 25), oracle::random_tensor({2, 16}, 26)};
  std::vector<Mask> masks(2, Mask(2, 16, true));
  std::vector<LatentState> zs = {random_latent(spec, 27), random_latent(spec, 28)};
  const std::vector<LatentState> init = zs;
  std::vector<Rng> rngs = {Rng(1), Rng(2)};
  langevin_batch(ys, masks, zs, p, spec, cfg, rngs, Mode::kEval);
  for (std::size_t w = 0; w < 2; ++w) {
    Rng rng(w + 1);
    const LatentState solo = langevin_infer(ys[w], masks[w], p, spec, cfg, rng, init[w]);
    CHECK(oracle::max_relative_error(zs[w].values(), solo.values()) < 1e-12);
  }
}
