#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "persim/common.hpp"
#include "persim/env.hpp"
#include "persim/rng.hpp"

namespace persim {

// k centroids fit by Lloyd iterations; assignment is nearest-centroid with
// ties broken toward the lowest index.
struct ClusterModel {
  Matrix centroids;  // k x d
  int iterations = 0;
  real inertia = 0;
  std::vector<real> inertia_history;  // one entry per assignment pass, non-increasing
  long n_samples = 0;
  int empty_reseeds = 0;  // how often an emptied cluster was reseeded

  int k() const { return centroids.rows; }
  int dim() const { return centroids.cols; }
  int assign(std::span<const real> point) const;
};

// Plain Lloyd's algorithm: initial centroids are k distinct data points
// chosen uniformly (no careful seeding); iterate assign/recenter until the
// largest centroid displacement drops below tol or max_iter is hit. Empty
// clusters are reseeded to the data point farthest from the empty centroid.
ClusterModel kmeans_fit(const Matrix& points, int k, int max_iter, real tol, RngStream& rng);

// Best-of-`restarts` by final inertia (first winner on ties).
ClusterModel kmeans_fit_best(const Matrix& points, int k, int max_iter, real tol, int restarts,
                             RngStream& rng);

enum class ObservationMode { Centroid, OneHot };

const char* observation_mode_name(ObservationMode m);
ObservationMode observation_mode_from_name(std::string_view name);

// Observation abstraction over a base environment: the agent sees the
// centroid (or one-hot indicator) of the sampled state's cluster, while every
// reward query passes the true state through to the base environment.
class ClusteredEnvironment {
 public:
  ClusteredEnvironment(std::shared_ptr<const Environment> base, ClusterModel model,
                       ObservationMode mode);

  const Environment& base() const { return *base_; }
  std::shared_ptr<const Environment> base_ptr() const { return base_; }
  const ClusterModel& model() const { return model_; }
  ObservationMode mode() const { return mode_; }

  int observation_dim() const;
  Vec observe(std::span<const real> state) const;

  // Pass-through: information loss affects observations only.
  real reward(std::span<const real> state, int action) const {
    return base_->reward(state, action);
  }

 private:
  std::shared_ptr<const Environment> base_;
  ClusterModel model_;
  ObservationMode mode_;
};

// Samples n_fit_samples states uniformly from the environment, fits k-means
// on them, and wraps the environment.
ClusteredEnvironment clusterize_environment(std::shared_ptr<const Environment> env,
                                            long n_fit_samples, int k, ObservationMode mode,
                                            RngStream& rng, int restarts = 1, int max_iter = 100,
                                            real tol = real(1e-6));

// What a training or evaluation loop feeds the agent: either the raw state or
// the clustered observation, over one shared base environment.
class EnvView {
 public:
  explicit EnvView(std::shared_ptr<const Environment> full) : full_(std::move(full)) {}
  explicit EnvView(std::shared_ptr<const ClusteredEnvironment> clustered)
      : clustered_(std::move(clustered)) {}

  bool is_clustered() const { return clustered_ != nullptr; }
  const Environment& base() const { return clustered_ ? clustered_->base() : *full_; }
  int observation_dim() const;
  Vec observe(std::span<const real> state) const;

 private:
  std::shared_ptr<const Environment> full_;
  std::shared_ptr<const ClusteredEnvironment> clustered_;
};

}  // namespace persim
