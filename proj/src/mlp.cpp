#include "persim/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace persim {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Gaussian: return "gaussian";
    case Activation::Tanh: return "tanh";
    case Activation::Rectifier: return "rectifier";
    case Activation::Linear: return "linear";
  }
  return "?";
}

Activation activation_from_name(std::string_view name) {
  if (name == "gaussian") return Activation::Gaussian;
  if (name == "tanh") return Activation::Tanh;
  if (name == "rectifier") return Activation::Rectifier;
  if (name == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation tag: " + std::string(name));
}

real activate(Activation a, real z) {
  switch (a) {
    case Activation::Gaussian: return std::exp(-z * z);
    case Activation::Tanh: return std::tanh(z);
    case Activation::Rectifier: return z > 0 ? z : 0;
    case Activation::Linear: return z;
  }
  return z;
}

real activation_derivative(Activation a, real z) {
  switch (a) {
    case Activation::Gaussian: return -2 * z * std::exp(-z * z);
    case Activation::Tanh: {
      const real t = std::tanh(z);
      return 1 - t * t;
    }
    case Activation::Rectifier: return z > 0 ? 1 : 0;
    case Activation::Linear: return 1;
  }
  return 1;
}

long Mlp::parameter_count() const {
  long n = 0;
  for (const Layer& l : layers)
    n += static_cast<long>(l.weights.rows) * l.weights.cols + static_cast<long>(l.bias.size());
  return n;
}

Mlp mlp_init(std::span<const int> layer_sizes, std::span<const Activation> activations,
             WeightInit init, RngStream& rng) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp_init: need at least one layer");
  if (activations.size() != layer_sizes.size() - 1)
    throw std::invalid_argument("mlp_init: one activation tag per layer required");
  for (int w : layer_sizes)
    if (w <= 0) throw std::invalid_argument("mlp_init: non-positive layer width");

  Mlp net;
  net.layers.resize(layer_sizes.size() - 1);
  for (size_t l = 0; l < net.layers.size(); ++l) {
    Layer& layer = net.layers[l];
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0);
    layer.activation = activations[l];
    // Frozen draw order: weights row-major, then bias.
    if (init == WeightInit::StandardNormal) {
      for (real& w : layer.weights.data) w = static_cast<real>(rng.normal());
      for (real& b : layer.bias) b = static_cast<real>(rng.normal());
    } else if (init == WeightInit::ScaledUniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (real& w : layer.weights.data) w = static_cast<real>(rng.uniform(-bound, bound));
      for (real& b : layer.bias) b = static_cast<real>(rng.uniform(-bound, bound));
    }
  }
  return net;
}

Vec mlp_forward(const Mlp& net, std::span<const real> x, ForwardCache* cache) {
  if (net.layers.empty()) throw std::invalid_argument("mlp_forward: empty network");
  if (static_cast<int>(x.size()) != net.input_dim())
    throw std::invalid_argument("mlp_forward: input has dim " + std::to_string(x.size()) +
                                ", network expects " + std::to_string(net.input_dim()));

  const size_t n_layers = net.layers.size();
  if (cache) {
    cache->input.assign(x.begin(), x.end());
    cache->pre_activations.resize(n_layers);
    cache->outputs.resize(n_layers);
  }

  Vec current(x.begin(), x.end());
  Vec next;
  for (size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = net.layers[l];
    const int out = layer.out_dim();
    next.assign(out, 0);
    for (int r = 0; r < out; ++r) {
      real z = layer.bias[r];
      const real* w = layer.weights.row(r).data();
      for (int c = 0; c < layer.in_dim(); ++c) z += w[c] * current[c];
      next[r] = z;
    }
    if (cache) cache->pre_activations[l] = next;
    for (int r = 0; r < out; ++r) next[r] = activate(layer.activation, next[r]);
    if (cache) cache->outputs[l] = next;
    current.swap(next);
  }
  return current;
}

void GradientSet::set_zero() {
  for (LayerGradient& l : layers) {
    std::fill(l.weights.data.begin(), l.weights.data.end(), real(0));
    std::fill(l.bias.begin(), l.bias.end(), real(0));
  }
}

void GradientSet::add_scaled(const GradientSet& other, real scale) {
  if (layers.size() != other.layers.size())
    throw std::invalid_argument("GradientSet::add_scaled: layer count mismatch");
  for (size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].weights.same_shape(other.layers[l].weights) ||
        layers[l].bias.size() != other.layers[l].bias.size())
      throw std::invalid_argument("GradientSet::add_scaled: shape mismatch");
    for (size_t i = 0; i < layers[l].weights.data.size(); ++i)
      layers[l].weights.data[i] += scale * other.layers[l].weights.data[i];
    for (size_t i = 0; i < layers[l].bias.size(); ++i)
      layers[l].bias[i] += scale * other.layers[l].bias[i];
  }
}

void GradientSet::scale(real s) {
  for (LayerGradient& l : layers) {
    for (real& v : l.weights.data) v *= s;
    for (real& v : l.bias) v *= s;
  }
}

real GradientSet::squared_norm() const {
  real acc = 0;
  for (const LayerGradient& l : layers) {
    for (real v : l.weights.data) acc += v * v;
    for (real v : l.bias) acc += v * v;
  }
  return acc;
}

bool GradientSet::is_finite() const {
  for (const LayerGradient& l : layers)
    if (!all_finite(l.weights.data) || !all_finite(l.bias)) return false;
  return true;
}

bool GradientSet::shape_matches(const Mlp& net) const {
  if (layers.size() != net.layers.size()) return false;
  for (size_t l = 0; l < layers.size(); ++l)
    if (!layers[l].weights.same_shape(net.layers[l].weights) ||
        layers[l].bias.size() != net.layers[l].bias.size())
      return false;
  return true;
}

GradientSet make_gradients(const Mlp& net) {
  GradientSet g;
  g.layers.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    g.layers[l].weights = Matrix(net.layers[l].weights.rows, net.layers[l].weights.cols);
    g.layers[l].bias.assign(net.layers[l].bias.size(), 0);
  }
  return g;
}

void mlp_backward_accumulate(const Mlp& net, const ForwardCache& cache,
                             std::span<const real> output_grad, real scale, GradientSet& into) {
  const size_t n_layers = net.layers.size();
  if (cache.pre_activations.size() != n_layers || cache.outputs.size() != n_layers ||
      static_cast<int>(cache.input.size()) != net.input_dim())
    throw std::invalid_argument("mlp_backward: cache does not match network");
  for (size_t l = 0; l < n_layers; ++l)
    if (static_cast<int>(cache.pre_activations[l].size()) != net.layers[l].out_dim() ||
        static_cast<int>(cache.outputs[l].size()) != net.layers[l].out_dim())
      throw std::invalid_argument("mlp_backward: cache layer shapes do not match network");
  if (static_cast<int>(output_grad.size()) != net.output_dim())
    throw std::invalid_argument("mlp_backward: output_grad has dim " +
                                std::to_string(output_grad.size()) + ", network emits " +
                                std::to_string(net.output_dim()));
  if (!into.shape_matches(net))
    throw std::invalid_argument("mlp_backward: gradient accumulator shape mismatch");

  // delta_l = dLoss/dz_l, walked output-to-input.
  Vec delta(output_grad.begin(), output_grad.end());
  Vec prev_delta;
  for (size_t li = n_layers; li-- > 0;) {
    const Layer& layer = net.layers[li];
    const Vec& z = cache.pre_activations[li];
    const int out = layer.out_dim();
    const int in = layer.in_dim();
    for (int r = 0; r < out; ++r) delta[r] *= activation_derivative(layer.activation, z[r]);

    std::span<const real> layer_input =
        li == 0 ? std::span<const real>(cache.input) : std::span<const real>(cache.outputs[li - 1]);
    LayerGradient& g = into.layers[li];
    for (int r = 0; r < out; ++r) {
      const real dr = scale * delta[r];
      real* gw = g.weights.row(r).data();
      for (int c = 0; c < in; ++c) gw[c] += dr * layer_input[c];
      g.bias[r] += dr;
    }

    if (li > 0) {
      prev_delta.assign(in, 0);
      for (int r = 0; r < out; ++r) {
        const real dr = delta[r];
        const real* w = layer.weights.row(r).data();
        for (int c = 0; c < in; ++c) prev_delta[c] += w[c] * dr;
      }
      delta.swap(prev_delta);
    }
  }
}

GradientSet mlp_backward(const Mlp& net, const ForwardCache& cache,
                         std::span<const real> output_grad) {
  GradientSet g = make_gradients(net);
  mlp_backward_accumulate(net, cache, output_grad, 1, g);
  return g;
}

}  // namespace persim
