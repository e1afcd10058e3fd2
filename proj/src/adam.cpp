#include "persim/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace persim {

AdamState make_adam_state(const Mlp& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  state.first_moment = make_gradients(params);
  state.second_moment = make_gradients(params);
  return state;
}

void adam_step(Mlp& params, const GradientSet& grads, AdamState& state) {
  if (!grads.shape_matches(params) || !state.first_moment.shape_matches(params))
    throw std::invalid_argument("adam_step: gradient/state shape does not match parameters");
  if (!grads.is_finite())
    throw std::runtime_error("adam_step: non-finite gradient entries at step " +
                             std::to_string(state.step_count + 1));

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const real correction1 = 1 - std::pow(c.beta1, static_cast<real>(state.step_count));
  const real correction2 = 1 - std::pow(c.beta2, static_cast<real>(state.step_count));

  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](real& p, real& m, real& v, real g) {
      m = c.beta1 * m + (1 - c.beta1) * g;
      v = c.beta2 * v + (1 - c.beta2) * g * g;
      const real m_hat = m / correction1;
      const real v_hat = v / correction2;
      p -= c.step_size * m_hat / (std::sqrt(v_hat) + c.epsilon);
    };
    Layer& layer = params.layers[l];
    LayerGradient& m = state.first_moment.layers[l];
    LayerGradient& v = state.second_moment.layers[l];
    const LayerGradient& g = grads.layers[l];
    for (size_t i = 0; i < layer.weights.data.size(); ++i)
      update(layer.weights.data[i], m.weights.data[i], v.weights.data[i], g.weights.data[i]);
    for (size_t i = 0; i < layer.bias.size(); ++i)
      update(layer.bias[i], m.bias[i], v.bias[i], g.bias[i]);
  }
}

}  // namespace persim
