#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "persim/adam.hpp"

using namespace persim;

namespace {

Mlp scalar_param(real value) {
  Mlp net;
  Layer layer;
  layer.weights = Matrix(1, 1);
  layer.weights(0, 0) = value;
  layer.bias = {0};
  layer.activation = Activation::Linear;
  net.layers.push_back(layer);
  return net;
}

GradientSet scalar_grad(const Mlp& net, real weight_grad) {
  GradientSet g = make_gradients(net);
  g.layers[0].weights(0, 0) = weight_grad;
  return g;
}

}  // namespace

TEST_CASE("zero gradients leave parameters unchanged while moments decay") {
  // fresh state: both moments are zero, the update direction is exactly zero
  Mlp net = scalar_param(real(1.25));
  AdamState state = make_adam_state(net, {});
  const GradientSet zero = make_gradients(net);
  adam_step(net, zero, state);
  CHECK(net.layers[0].weights(0, 0) == real(1.25));
  CHECK(net.layers[0].bias[0] == 0.0);
  CHECK(state.step_count == 1);

  // preloaded moments decay by their beta factors on a zero gradient
  state.first_moment.layers[0].weights(0, 0) = real(0.5);
  state.second_moment.layers[0].weights(0, 0) = real(0.25);
  adam_step(net, zero, state);
  CHECK(state.first_moment.layers[0].weights(0, 0) == doctest::Approx(0.9 * 0.5));
  CHECK(state.second_moment.layers[0].weights(0, 0) == doctest::Approx(0.999 * 0.25));
  CHECK(state.step_count == 2);
}

TEST_CASE("constant gradient moves the parameter against its sign") {
  Mlp net = scalar_param(0);
  AdamState state = make_adam_state(net, {.step_size = real(0.01)});
  for (int i = 0; i < 50; ++i) adam_step(net, scalar_grad(net, real(2.5)), state);
  CHECK(net.layers[0].weights(0, 0) < 0);

  Mlp net2 = scalar_param(0);
  AdamState state2 = make_adam_state(net2, {.step_size = real(0.01)});
  for (int i = 0; i < 50; ++i) adam_step(net2, scalar_grad(net2, real(-2.5)), state2);
  CHECK(net2.layers[0].weights(0, 0) > 0);
}

TEST_CASE("trajectory matches an independent scalar reference to 1e-12") {
  Mlp net = scalar_param(real(0.7));
  const AdamConfig cfg{.step_size = real(3e-3), .beta1 = real(0.9), .beta2 = real(0.999),
                       .epsilon = real(1e-8)};
  AdamState state = make_adam_state(net, cfg);
  oracles::ScalarAdam reference{cfg.step_size, cfg.beta1, cfg.beta2, cfg.epsilon};

  double ref_param = 0.7;
  RngStream rng = derive_stream(9, "grad-sequence");
  for (int i = 0; i < 200; ++i) {
    const double g = rng.uniform(-1, 1);
    adam_step(net, scalar_grad(net, static_cast<real>(g)), state);
    ref_param = reference.step(ref_param, g);
    CHECK(std::fabs(net.layers[0].weights(0, 0) - ref_param) < 1e-12);
  }
}

TEST_CASE("shape mismatch and non-finite gradients are rejected") {
  Mlp net = scalar_param(0);
  AdamState state = make_adam_state(net, {});

  RngStream rng = derive_stream(1, "other");
  Mlp bigger = mlp_init(std::vector<int>{2, 2}, std::vector<Activation>{Activation::Linear},
                        WeightInit::StandardNormal, rng);
  const GradientSet wrong_shape = make_gradients(bigger);
  CHECK_THROWS_AS(adam_step(net, wrong_shape, state), std::invalid_argument);

  GradientSet nan_grad = make_gradients(net);
  nan_grad.layers[0].weights(0, 0) = std::numeric_limits<real>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(net, nan_grad, state), std::runtime_error);
}
