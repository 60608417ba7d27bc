#include "dghl/adam.hpp"

#include <cmath>

#include "dghl/error.hpp"

namespace dghl {

AdamState AdamState::zeros_like(std::span<const Tensor* const> params) {
  AdamState state;
  for (const Tensor* p : params) {
    state.first_moment.emplace_back(p->shape());
    state.second_moment.emplace_back(p->shape());
  }
  return state;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double lr, std::span<const std::string> names, const AdamHyper& hyper) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.first_moment.size()) + " moment tensors");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], grads[i], "adam_step param/grad");
    require_same_shape(*params[i], state.first_moment[i], "adam_step param/moment");
    require_same_shape(*params[i], state.second_moment[i], "adam_step param/moment");
    if (!all_finite(grads[i].data())) {
      const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
      throw NumericError("adam_step: non-finite gradient for parameter " + name);
    }
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

}  // namespace dghl
