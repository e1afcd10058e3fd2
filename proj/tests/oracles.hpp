// Independent test oracles: deliberately written along different code paths
// (long-double accumulation, transposed loop order, scalar state machines)
// than the library implementations they check.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "persim/common.hpp"
#include "persim/mlp.hpp"

namespace oracles {

using persim::Mlp;
using persim::real;

// Forward pass re-derived with long-double accumulators and a column-major
// sweep; agrees with the library path to round-off only.
inline std::vector<double> scalar_forward(const Mlp& net, const std::vector<double>& x) {
  std::vector<long double> current(x.begin(), x.end());
  for (const persim::Layer& layer : net.layers) {
    std::vector<long double> z(layer.out_dim());
    for (int r = 0; r < layer.out_dim(); ++r) z[r] = layer.bias[r];
    for (int c = 0; c < layer.in_dim(); ++c)
      for (int r = 0; r < layer.out_dim(); ++r) z[r] += (long double)layer.weights(r, c) * current[c];
    current.resize(z.size());
    for (size_t r = 0; r < z.size(); ++r) {
      const long double v = z[r];
      switch (layer.activation) {
        case persim::Activation::Gaussian: current[r] = std::exp(-(double)(v * v)); break;
        case persim::Activation::Tanh: current[r] = std::tanh((double)v); break;
        case persim::Activation::Rectifier: current[r] = v > 0 ? (double)v : 0.0; break;
        case persim::Activation::Linear: current[r] = (double)v; break;
      }
    }
  }
  return std::vector<double>(current.begin(), current.end());
}

// Central finite differences of f(theta) = <g, forward(x)> for every
// parameter. Returns the max "relative" error against the analytic gradient,
// with an absolute floor so that negligible gradients cannot blow the ratio
// up on finite-difference noise alone.
struct GradCheckResult {
  double max_error = 0;
  long n_params = 0;
};

inline GradCheckResult finite_difference_check(Mlp net, const std::vector<double>& x,
                                               const std::vector<double>& g, double h = 1e-5,
                                               double floor = 1e-6) {
  persim::ForwardCache cache;
  std::vector<real> xr(x.begin(), x.end());
  std::vector<real> gr(g.begin(), g.end());
  mlp_forward(net, xr, &cache);
  const persim::GradientSet analytic = mlp_backward(net, cache, gr);

  const auto objective = [&]() {
    const persim::Vec y = mlp_forward(net, xr);
    long double acc = 0;
    for (size_t i = 0; i < y.size(); ++i) acc += (long double)g[i] * y[i];
    return (double)acc;
  };

  GradCheckResult result;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const auto check_param = [&](real& p, double analytic_grad) {
      const real saved = p;
      p = saved + (real)h;
      const double up = objective();
      p = saved - (real)h;
      const double down = objective();
      p = saved;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({floor, std::fabs(fd), std::fabs(analytic_grad)});
      result.max_error = std::max(result.max_error, std::fabs(fd - analytic_grad) / denom);
      ++result.n_params;
    };
    for (size_t i = 0; i < net.layers[l].weights.data.size(); ++i)
      check_param(net.layers[l].weights.data[i], analytic.layers[l].weights.data[i]);
    for (size_t i = 0; i < net.layers[l].bias.size(); ++i)
      check_param(net.layers[l].bias[i], analytic.layers[l].bias[i]);
  }
  return result;
}

// Scalar bias-corrected adaptive-moment reference, one parameter.
struct ScalarAdam {
  double step_size, beta1, beta2, epsilon;
  double m = 0, v = 0;
  long t = 0;

  double step(double param, double grad) {
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad * grad;
    const double m_hat = m / (1 - std::pow(beta1, (double)t));
    const double v_hat = v / (1 - std::pow(beta2, (double)t));
    return param - step_size * m_hat / (std::sqrt(v_hat) + epsilon);
  }
};

// Exhaustive k-means optimum: enumerate every assignment of n points into k
// labeled groups (empty groups allowed; they just waste a label), computing
// the inertia of the induced centroids. Feasible for k^n up to a few
// thousand.
inline double exhaustive_kmeans_optimum(const persim::Matrix& points, int k) {
  const int n = points.rows;
  const int d = points.cols;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> assign(n, 0);
  long total = 1;
  for (int i = 0; i < n; ++i) total *= k;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      assign[i] = (int)(c % k);
      c /= k;
    }
    std::vector<std::vector<long double>> sums(k, std::vector<long double>(d, 0));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (int j = 0; j < d; ++j) sums[assign[i]][j] += points(i, j);
    }
    long double inertia = 0;
    for (int i = 0; i < n; ++i) {
      const int a = assign[i];
      for (int j = 0; j < d; ++j) {
        const long double diff = points(i, j) - sums[a][j] / counts[a];
        inertia += diff * diff;
      }
    }
    best = std::min(best, (double)inertia);
  }
  return best;
}

// Pearson via a direct two-pass double-precision formula (the library uses
// the same math; this guards against transcription slips, not round-off).
inline double pearson_reference(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  long double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return (double)(sxy / std::sqrt(sxx * syy));
}

// chi-squared statistic for uniformity over `bins` categories.
inline double chi_squared_uniform(const std::vector<long>& counts, long total) {
  const double expected = (double)total / counts.size();
  double stat = 0;
  for (long c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

}  // namespace oracles
