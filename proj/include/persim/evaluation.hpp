#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "persim/agents.hpp"
#include "persim/clustering.hpp"
#include "persim/common.hpp"
#include "persim/env.hpp"
#include "persim/rng.hpp"

namespace persim {

// A state attains normalized return 1 exactly when the chosen action is
// optimal and 0 in expectation under uniform action choice. States where the
// optimal and uniform baselines nearly coincide leave the ratio undefined;
// they raise DegenerateState (standalone calls) or are excluded with a count
// (aggregated evaluation).
struct DegenerateState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr real kDenominatorFloor = real(1e-12);

// Reward-vector level primitives (fixtures plug in raw reward vectors here).
real mean_reward(std::span<const real> rewards);
std::pair<real, int> max_reward(std::span<const real> rewards);  // ties -> lowest index
real normalized_return_from(std::span<const real> rewards, int action,
                            real floor = kDenominatorFloor);

// Environment-facing spellings: the uniform-baseline value, the optimal value
// with its argmax, and the normalized return of choosing `action` at `state`.
real random_value(const Environment& env, std::span<const real> state);
std::pair<real, int> optimal_value(const Environment& env, std::span<const real> state);
real normalized_return(const Environment& env, std::span<const real> state, int action);

// Frozen set of evaluation states, drawn from the same distribution as
// training states but from a disjoint stream.
struct EvalSet {
  Matrix states;
  uint64_t seed = 0;
};

EvalSet make_eval_set(const Environment& env, int n_states, RngStream& rng);

// Baseline and optimal values precomputed once per (environment, eval set).
struct EvalContext {
  std::shared_ptr<const Environment> env;
  EvalSet set;
  Vec random_values;
  Vec optimal_values;
  std::vector<int> optimal_actions;
  std::vector<uint8_t> degenerate;
  int n_degenerate = 0;
};

EvalContext make_eval_context(std::shared_ptr<const Environment> env, EvalSet set);

struct EvalRecord {
  long step = 0;
  real mean_r = 0;
  real min_r = 0;
  real max_r = 0;
  int n_excluded = 0;
};

// Greedy evaluation: the agent acts with explore=false on its (possibly
// abstracted) observation; scoring always uses the true state. `rng` is only
// consumed by agents whose action rule is inherently stochastic (uniform).
EvalRecord evaluate_policy(Agent& agent, const EnvView& view, const EvalContext& ctx,
                           RngStream& rng, long step);

// Reward rows for a handful of nearly identical states (coordinates drawn
// from N(0, sigma^2)) on the first n_actions_shown actions. Rows index
// states, columns actions.
Matrix adjacent_state_reward_table(const Environment& env, int n_states = 5,
                                   int n_actions_shown = 10, real sigma = real(0.01),
                                   RngStream* rng = nullptr);

// Sample Pearson correlation; throws on length < 2 or (near-)zero variance
// rather than returning NaN.
double pearson(std::span<const real> x, std::span<const real> y);

struct ClusterCorrelationEntry {
  int cluster = 0;
  long members = 0;
  long pairs = 0;
  bool defined = false;
  double rho = 0;
  std::string flag;  // "too-few-members" | "zero-variance" | "" when defined
};

struct ClusterCorrelation {
  std::vector<ClusterCorrelationEntry> entries;
  ClusterModel model;

  int n_defined() const;
  double mean_defined() const;  // mean over defined entries
};

// Samples n_samples states uniformly, clusters them with k-means, and for
// each cluster correlates within-cluster pairwise state distances with the
// matching reward-vector distances (Euclidean on both sides, unordered pairs,
// no self-pairs). Clusters that cannot produce a correlation are flagged.
ClusterCorrelation cluster_reward_correlation(const Environment& env, long n_samples, int k,
                                              RngStream& rng, int restarts = 1);

}  // namespace persim
