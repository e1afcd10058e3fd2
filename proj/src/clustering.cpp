#include "persim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace persim {

int ClusterModel::assign(std::span<const real> point) const {
  if (static_cast<int>(point.size()) != dim())
    throw std::invalid_argument("ClusterModel::assign: point has dim " +
                                std::to_string(point.size()) + ", centroids have dim " +
                                std::to_string(dim()));
  int best = 0;
  real best_d = squared_distance(point, centroids.row(0));
  for (int c = 1; c < k(); ++c) {
    const real d = squared_distance(point, centroids.row(c));
    if (d < best_d) {  // strict: ties stay at the lowest index
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

bool rows_equal(const Matrix& m, int a, std::span<const real> b) {
  auto ra = m.row(a);
  return std::equal(ra.begin(), ra.end(), b.begin(), b.end());
}

// k distinct data points chosen uniformly (distinct as values, so duplicated
// inputs cannot produce two identical centroids).
Matrix initial_centroids(const Matrix& points, int k, RngStream& rng) {
  Matrix centroids(k, points.cols);
  int chosen = 0;
  long attempts = 0;
  const long max_attempts = 1000L * points.rows + 1000;
  while (chosen < k) {
    if (++attempts > max_attempts)
      throw std::invalid_argument(
          "kmeans_fit: fewer than k distinct points in the data");
    const int idx = rng.uniform_int(points.rows);
    bool duplicate = false;
    for (int c = 0; c < chosen && !duplicate; ++c)
      duplicate = rows_equal(centroids, c, points.row(idx));
    if (duplicate) continue;
    std::copy(points.row(idx).begin(), points.row(idx).end(), centroids.row(chosen).begin());
    ++chosen;
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans_fit(const Matrix& points, int k, int max_iter, real tol, RngStream& rng) {
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1, got " + std::to_string(k));
  if (points.rows < k)
    throw std::invalid_argument("kmeans_fit: n=" + std::to_string(points.rows) +
                                " points for k=" + std::to_string(k) + " clusters");
  if (!all_finite(points.data)) throw std::invalid_argument("kmeans_fit: non-finite input");

  const int n = points.rows;
  const int d = points.cols;

  ClusterModel model;
  model.centroids = initial_centroids(points, k, rng);
  model.n_samples = n;

  std::vector<int> assignment(n, 0);
  std::vector<long> counts(k, 0);
  Matrix sums(k, d);

  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment pass; inertia is recorded here, after which Lloyd guarantees
    // it never increases (tiny slack covers summation round-off).
    real inertia = 0;
    for (int i = 0; i < n; ++i) {
      const int c = model.assign(points.row(i));
      assignment[i] = c;
      inertia += squared_distance(points.row(i), model.centroids.row(c));
    }
    if (!model.inertia_history.empty()) {
      const real prev = model.inertia_history.back();
      if (inertia > prev + real(1e-12) * (real(1) + prev))
        throw std::runtime_error("kmeans_fit: inertia increased across an iteration");
    }
    model.inertia_history.push_back(inertia);
    model.inertia = inertia;
    model.iterations = iter + 1;

    // Recenter.
    std::fill(counts.begin(), counts.end(), 0L);
    std::fill(sums.data.begin(), sums.data.end(), real(0));
    for (int i = 0; i < n; ++i) {
      counts[assignment[i]] += 1;
      auto row = sums.row(assignment[i]);
      auto p = points.row(i);
      for (int j = 0; j < d; ++j) row[j] += p[j];
    }

    real max_displacement = 0;
    std::vector<int> reseeded;  // points already claimed by earlier empty clusters
    for (int c = 0; c < k; ++c) {
      Vec new_centroid(d);
      if (counts[c] > 0) {
        for (int j = 0; j < d; ++j) new_centroid[j] = sums(c, j) / static_cast<real>(counts[c]);
      } else {
        // Reseed an empty cluster to the point farthest from its centroid,
        // skipping points already used to reseed earlier empties this pass.
        int far_idx = -1;
        real far_d = -1;
        for (int i = 0; i < n; ++i) {
          if (std::find(reseeded.begin(), reseeded.end(), i) != reseeded.end()) continue;
          const real dist = squared_distance(points.row(i), model.centroids.row(c));
          if (dist > far_d) {
            far_d = dist;
            far_idx = i;
          }
        }
        reseeded.push_back(far_idx);
        model.empty_reseeds += 1;
        std::copy(points.row(far_idx).begin(), points.row(far_idx).end(), new_centroid.begin());
      }
      const real moved = squared_distance(new_centroid, model.centroids.row(c));
      max_displacement = std::max(max_displacement, std::sqrt(moved));
      std::copy(new_centroid.begin(), new_centroid.end(), model.centroids.row(c).begin());
    }

    if (max_displacement < tol) break;
  }

  // Final assignment pass so the reported inertia matches the final centroids.
  real inertia = 0;
  for (int i = 0; i < n; ++i)
    inertia += squared_distance(points.row(i), model.centroids.row(model.assign(points.row(i))));
  model.inertia = inertia;
  return model;
}

ClusterModel kmeans_fit_best(const Matrix& points, int k, int max_iter, real tol, int restarts,
                             RngStream& rng) {
  if (restarts < 1) throw std::invalid_argument("kmeans_fit_best: restarts must be >= 1");
  ClusterModel best;
  real best_inertia = std::numeric_limits<real>::infinity();
  for (int r = 0; r < restarts; ++r) {
    ClusterModel m = kmeans_fit(points, k, max_iter, tol, rng);
    if (m.inertia < best_inertia) {
      best_inertia = m.inertia;
      best = std::move(m);
    }
  }
  return best;
}

const char* observation_mode_name(ObservationMode m) {
  return m == ObservationMode::Centroid ? "centroid" : "one-hot";
}

ObservationMode observation_mode_from_name(std::string_view name) {
  if (name == "centroid") return ObservationMode::Centroid;
  if (name == "one-hot" || name == "onehot") return ObservationMode::OneHot;
  throw std::invalid_argument("unknown observation mode: " + std::string(name));
}

ClusteredEnvironment::ClusteredEnvironment(std::shared_ptr<const Environment> base,
                                           ClusterModel model, ObservationMode mode)
    : base_(std::move(base)), model_(std::move(model)), mode_(mode) {
  if (!base_) throw std::invalid_argument("ClusteredEnvironment: null base environment");
  if (model_.dim() != base_->config().state_dim)
    throw std::invalid_argument("ClusteredEnvironment: centroid dim does not match state dim");
}

int ClusteredEnvironment::observation_dim() const {
  return mode_ == ObservationMode::Centroid ? model_.dim() : model_.k();
}

Vec ClusteredEnvironment::observe(std::span<const real> state) const {
  const int c = model_.assign(state);
  if (mode_ == ObservationMode::Centroid) {
    auto row = model_.centroids.row(c);
    return Vec(row.begin(), row.end());
  }
  Vec onehot(model_.k(), 0);
  onehot[c] = 1;
  return onehot;
}

ClusteredEnvironment clusterize_environment(std::shared_ptr<const Environment> env,
                                            long n_fit_samples, int k, ObservationMode mode,
                                            RngStream& rng, int restarts, int max_iter, real tol) {
  if (!env) throw std::invalid_argument("clusterize_environment: null environment");
  if (n_fit_samples < k)
    throw std::invalid_argument("clusterize_environment: n_fit_samples < k");
  Matrix samples(static_cast<int>(n_fit_samples), env->config().state_dim);
  for (long i = 0; i < n_fit_samples; ++i) {
    const Vec s = env->sample_state(rng);
    std::copy(s.begin(), s.end(), samples.row(static_cast<int>(i)).begin());
  }
  ClusterModel model = kmeans_fit_best(samples, k, max_iter, tol, restarts, rng);
  return ClusteredEnvironment(std::move(env), std::move(model), mode);
}

int EnvView::observation_dim() const {
  return clustered_ ? clustered_->observation_dim() : base().config().state_dim;
}

Vec EnvView::observe(std::span<const real> state) const {
  if (clustered_) return clustered_->observe(state);
  return Vec(state.begin(), state.end());
}

}  // namespace persim
