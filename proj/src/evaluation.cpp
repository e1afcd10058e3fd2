#include "persim/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace persim {

real mean_reward(std::span<const real> rewards) {
  if (rewards.empty()) throw std::invalid_argument("mean_reward: empty reward vector");
  real sum = 0;
  for (real r : rewards) sum += r;
  return sum / static_cast<real>(rewards.size());
}

std::pair<real, int> max_reward(std::span<const real> rewards) {
  if (rewards.empty()) throw std::invalid_argument("max_reward: empty reward vector");
  int best = 0;
  for (size_t j = 1; j < rewards.size(); ++j)
    if (rewards[j] > rewards[best]) best = static_cast<int>(j);
  return {rewards[best], best};
}

real normalized_return_from(std::span<const real> rewards, int action, real floor) {
  if (action < 0 || action >= static_cast<int>(rewards.size()))
    throw std::invalid_argument("normalized_return: action index out of range");
  const real baseline = mean_reward(rewards);
  const real best = max_reward(rewards).first;
  const real denom = best - baseline;
  if (!(denom > floor))
    throw DegenerateState("normalized_return: optimal and uniform values nearly coincide");
  return (rewards[action] - baseline) / denom;
}

real random_value(const Environment& env, std::span<const real> state) {
  return mean_reward(env.reward_vector(state));
}

std::pair<real, int> optimal_value(const Environment& env, std::span<const real> state) {
  return max_reward(env.reward_vector(state));
}

real normalized_return(const Environment& env, std::span<const real> state, int action) {
  return normalized_return_from(env.reward_vector(state), action);
}

EvalSet make_eval_set(const Environment& env, int n_states, RngStream& rng) {
  if (n_states <= 0) throw std::invalid_argument("make_eval_set: n_states must be positive");
  EvalSet set;
  set.seed = rng.master_seed();
  set.states = Matrix(n_states, env.config().state_dim);
  for (int i = 0; i < n_states; ++i) {
    const Vec s = env.sample_state(rng);
    std::copy(s.begin(), s.end(), set.states.row(i).begin());
  }
  return set;
}

EvalContext make_eval_context(std::shared_ptr<const Environment> env, EvalSet set) {
  if (!env) throw std::invalid_argument("make_eval_context: null environment");
  EvalContext ctx;
  ctx.env = std::move(env);
  ctx.set = std::move(set);
  const int n = ctx.set.states.rows;
  ctx.random_values.resize(n);
  ctx.optimal_values.resize(n);
  ctx.optimal_actions.resize(n);
  ctx.degenerate.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const Vec rewards = ctx.env->reward_vector(ctx.set.states.row(i));
    ctx.random_values[i] = mean_reward(rewards);
    auto [best, arg] = max_reward(rewards);
    ctx.optimal_values[i] = best;
    ctx.optimal_actions[i] = arg;
    if (!(best - ctx.random_values[i] > kDenominatorFloor)) {
      ctx.degenerate[i] = 1;
      ++ctx.n_degenerate;
    }
  }
  return ctx;
}

EvalRecord evaluate_policy(Agent& agent, const EnvView& view, const EvalContext& ctx,
                           RngStream& rng, long step) {
  if (&view.base() != ctx.env.get())
    throw std::invalid_argument("evaluate_policy: view and context use different environments");
  EvalRecord record;
  record.step = step;
  record.n_excluded = ctx.n_degenerate;
  real sum = 0;
  real min_r = std::numeric_limits<real>::infinity();
  real max_r = -std::numeric_limits<real>::infinity();
  int counted = 0;
  for (int i = 0; i < ctx.set.states.rows; ++i) {
    if (ctx.degenerate[i]) continue;
    const auto state = ctx.set.states.row(i);
    const Vec obs = view.observe(state);
    const int action = agent.act(obs, rng, /*explore=*/false);
    const real reward = ctx.env->reward(state, action);
    const real value = (reward - ctx.random_values[i]) / (ctx.optimal_values[i] - ctx.random_values[i]);
    sum += value;
    min_r = std::min(min_r, value);
    max_r = std::max(max_r, value);
    ++counted;
  }
  if (counted == 0) throw DegenerateState("evaluate_policy: every eval state is degenerate");
  record.mean_r = sum / static_cast<real>(counted);
  record.min_r = min_r;
  record.max_r = max_r;
  return record;
}

Matrix adjacent_state_reward_table(const Environment& env, int n_states, int n_actions_shown,
                                   real sigma, RngStream* rng) {
  if (n_states <= 0) throw std::invalid_argument("adjacent_state_reward_table: n_states");
  if (n_actions_shown <= 0 || n_actions_shown > env.config().n_actions)
    throw std::invalid_argument(
        "adjacent_state_reward_table: n_actions_shown must lie in [1, n_actions]");
  RngStream local = derive_stream(env.config().seed, "adjacent-states");
  RngStream& stream = rng ? *rng : local;
  Matrix table(n_states, n_actions_shown);
  Vec state(env.config().state_dim);
  for (int i = 0; i < n_states; ++i) {
    for (real& v : state) v = sigma * static_cast<real>(stream.normal());
    const Vec rewards = env.reward_vector(state);
    for (int j = 0; j < n_actions_shown; ++j) table(i, j) = rewards[j];
  }
  return table;
}

double pearson(std::span<const real> x, std::span<const real> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const size_t n = x.size();
  double mean_x = 0, mean_y = 0;
  for (size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 1e-18 || syy <= 1e-18)
    throw std::invalid_argument("pearson: zero variance, correlation undefined");
  const double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

int ClusterCorrelation::n_defined() const {
  int n = 0;
  for (const auto& e : entries) n += e.defined ? 1 : 0;
  return n;
}

double ClusterCorrelation::mean_defined() const {
  double sum = 0;
  int n = 0;
  for (const auto& e : entries) {
    if (!e.defined) continue;
    sum += e.rho;
    ++n;
  }
  if (n == 0) throw std::runtime_error("ClusterCorrelation: no defined entries");
  return sum / n;
}

ClusterCorrelation cluster_reward_correlation(const Environment& env, long n_samples, int k,
                                              RngStream& rng, int restarts) {
  if (n_samples < k)
    throw std::invalid_argument("cluster_reward_correlation: n_samples < k");

  const int n = static_cast<int>(n_samples);
  Matrix states(n, env.config().state_dim);
  for (int i = 0; i < n; ++i) {
    const Vec s = env.sample_state(rng);
    std::copy(s.begin(), s.end(), states.row(i).begin());
  }

  Matrix rewards(n, env.config().n_actions);
  for (int i = 0; i < n; ++i) {
    const Vec r = env.reward_vector(states.row(i));
    std::copy(r.begin(), r.end(), rewards.row(i).begin());
  }

  ClusterCorrelation result;
  result.model = kmeans_fit_best(states, k, 100, real(1e-6), restarts, rng);

  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) members[result.model.assign(states.row(i))].push_back(i);

  for (int c = 0; c < k; ++c) {
    ClusterCorrelationEntry entry;
    entry.cluster = c;
    entry.members = static_cast<long>(members[c].size());
    if (members[c].size() < 2) {
      entry.flag = "too-few-members";
      result.entries.push_back(std::move(entry));
      continue;
    }
    std::vector<real> state_dist, reward_dist;
    const size_t m = members[c].size();
    state_dist.reserve(m * (m - 1) / 2);
    reward_dist.reserve(m * (m - 1) / 2);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a + 1; b < m; ++b) {
        state_dist.push_back(
            std::sqrt(squared_distance(states.row(members[c][a]), states.row(members[c][b]))));
        reward_dist.push_back(
            std::sqrt(squared_distance(rewards.row(members[c][a]), rewards.row(members[c][b]))));
      }
    }
    entry.pairs = static_cast<long>(state_dist.size());
    try {
      entry.rho = pearson(state_dist, reward_dist);
      entry.defined = true;
    } catch (const std::invalid_argument&) {
      entry.flag = "zero-variance";
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace persim
