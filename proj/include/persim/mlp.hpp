#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "persim/common.hpp"
#include "persim/rng.hpp"

namespace persim {

enum class Activation { Gaussian, Tanh, Rectifier, Linear };

const char* activation_name(Activation a);
Activation activation_from_name(std::string_view name);

// gaussian: exp(-z^2), range (0,1]; derivative -2z exp(-z^2)
real activate(Activation a, real z);
real activation_derivative(Activation a, real z);

struct Layer {
  Matrix weights;  // out x in
  Vec bias;        // out
  Activation activation = Activation::Linear;

  int in_dim() const { return weights.cols; }
  int out_dim() const { return weights.rows; }
};

// Dense feed-forward network. Adjacent layers chain: layers[i].in_dim() ==
// layers[i-1].out_dim().
struct Mlp {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  long parameter_count() const;
};

// StandardNormal: N(0,1) on every weight and bias (the synthetic reward
// extractors). ScaledUniform: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) on weights
// and biases, the usual dense-layer default for trainable policies.
enum class WeightInit { StandardNormal, ScaledUniform, Zero };

// layer_sizes = [input_dim, width_1, ..., width_L]; activations has one tag
// per layer. Draw order is frozen: per layer input-to-output, weights in
// row-major order, then the bias vector. Biases use the same distribution as
// weights. Changing this order breaks seed portability of every environment.
Mlp mlp_init(std::span<const int> layer_sizes, std::span<const Activation> activations,
             WeightInit init, RngStream& rng);

// Per-layer pre-activations and outputs retained by a forward pass; exactly
// what mlp_backward needs. Reusable across calls to avoid reallocation.
struct ForwardCache {
  Vec input;
  std::vector<Vec> pre_activations;
  std::vector<Vec> outputs;
};

Vec mlp_forward(const Mlp& net, std::span<const real> x, ForwardCache* cache = nullptr);

struct LayerGradient {
  Matrix weights;
  Vec bias;
};

// Weight/bias gradients, shape-congruent with an Mlp.
struct GradientSet {
  std::vector<LayerGradient> layers;

  void set_zero();
  void add_scaled(const GradientSet& other, real scale);
  void scale(real s);
  real squared_norm() const;
  bool is_finite() const;
  bool shape_matches(const Mlp& net) const;
};

GradientSet make_gradients(const Mlp& net);

// Exact reverse-mode gradients of <output_grad, mlp_forward(net, x)> with
// respect to every weight and bias. `cache` must come from a forward pass of
// this same net.
GradientSet mlp_backward(const Mlp& net, const ForwardCache& cache,
                         std::span<const real> output_grad);

// Accumulating variant for training loops: adds scale * gradients into `into`.
void mlp_backward_accumulate(const Mlp& net, const ForwardCache& cache,
                             std::span<const real> output_grad, real scale, GradientSet& into);

}  // namespace persim
