#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dghl/tensor.hpp"

namespace dghl {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step_count = 0;

  // Zero moments shaped like `params`.
  static AdamState zeros_like(std::span<const Tensor* const> params);
};

/// One bias-corrected Adam update (minimisation): p <- p - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws NumericError naming the parameter when a gradient is not finite; in that
/// case nothing is modified.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double lr, std::span<const std::string> names = {}, const AdamHyper& hyper = {});

}  // namespace dghl
