#pragma once

#include "persim/mlp.hpp"

namespace persim {

struct AdamConfig {
  real step_size = 1e-3;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real epsilon = 1e-8;
};

// Bias-corrected adaptive-moment optimizer state for one Mlp.
struct AdamState {
  AdamConfig config;
  GradientSet first_moment;
  GradientSet second_moment;
  long step_count = 0;
};

AdamState make_adam_state(const Mlp& params, const AdamConfig& config);

// One update in place. Throws on shape mismatch and on non-finite gradient
// entries; a silent NaN here would poison the whole training run.
void adam_step(Mlp& params, const GradientSet& grads, AdamState& state);

}  // namespace persim
