#include "persim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "persim/serialize.hpp"

namespace persim {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Dqn: return "dqn";
    case Algorithm::A2c: return "a2c";
    case Algorithm::Ppo: return "ppo";
    case Algorithm::Uniform: return "uniform";
  }
  return "?";
}

Algorithm algorithm_from_name(std::string_view name) {
  if (name == "dqn") return Algorithm::Dqn;
  if (name == "a2c") return Algorithm::A2c;
  if (name == "ppo") return Algorithm::Ppo;
  if (name == "uniform") return Algorithm::Uniform;
  throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

void AgentConfig::validate() const {
  if (n_actions <= 0) throw std::invalid_argument("AgentConfig.n_actions must be positive");
  if (algorithm == Algorithm::Uniform) return;  // no networks, nothing else to check
  if (observation_dim <= 0)
    throw std::invalid_argument("AgentConfig.observation_dim must be positive");
  if (pi_architecture.empty())
    throw std::invalid_argument("AgentConfig.pi_architecture must not be empty");
  for (int w : pi_architecture)
    if (w <= 0) throw std::invalid_argument("AgentConfig.pi_architecture widths must be positive");
  auto positive = [](real v, const char* name) {
    if (!(v > 0)) throw std::invalid_argument(std::string("AgentConfig.") + name + " must be positive");
  };
  switch (algorithm) {
    case Algorithm::Dqn:
      positive(dqn.learning_rate, "dqn.learning_rate");
      if (dqn.batch_size <= 0 || dqn.replay_capacity < dqn.batch_size)
        throw std::invalid_argument("AgentConfig.dqn: need replay_capacity >= batch_size > 0");
      if (dqn.train_every <= 0) throw std::invalid_argument("AgentConfig.dqn.train_every must be positive");
      if (dqn.warmup_steps < 0) throw std::invalid_argument("AgentConfig.dqn.warmup_steps must be >= 0");
      if (dqn.epsilon_start < 0 || dqn.epsilon_start > 1 || dqn.epsilon_final < 0 ||
          dqn.epsilon_final > 1)
        throw std::invalid_argument("AgentConfig.dqn: epsilon bounds must lie in [0,1]");
      if (dqn.epsilon_decay_steps <= 0)
        throw std::invalid_argument("AgentConfig.dqn.epsilon_decay_steps must be positive");
      break;
    case Algorithm::A2c:
      positive(a2c.learning_rate, "a2c.learning_rate");
      if (a2c.rollout_steps <= 0) throw std::invalid_argument("AgentConfig.a2c.rollout_steps must be positive");
      positive(a2c.max_grad_norm, "a2c.max_grad_norm");
      break;
    case Algorithm::Ppo:
      positive(ppo.learning_rate, "ppo.learning_rate");
      if (ppo.rollout_steps <= 0 || ppo.minibatch_size <= 0 || ppo.n_epochs <= 0)
        throw std::invalid_argument("AgentConfig.ppo: rollout/minibatch/epochs must be positive");
      if (!(ppo.clip_range > 0 && ppo.clip_range < 1))
        throw std::invalid_argument("AgentConfig.ppo.clip_range must lie in (0,1)");
      positive(ppo.max_grad_norm, "ppo.max_grad_norm");
      break;
    case Algorithm::Uniform: break;
  }
}

Vec softmax(std::span<const real> logits) {
  real max_logit = logits[0];
  for (real v : logits) max_logit = std::max(max_logit, v);
  Vec probs(logits.size());
  real sum = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (real& p : probs) p /= sum;
  return probs;
}

Vec log_softmax(std::span<const real> logits) {
  real max_logit = logits[0];
  for (real v : logits) max_logit = std::max(max_logit, v);
  real sum = 0;
  for (real v : logits) sum += std::exp(v - max_logit);
  const real log_sum = std::log(sum);
  Vec out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - max_logit - log_sum;
  return out;
}

int argmax_lowest(std::span<const real> values) {
  int best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

int sample_categorical(std::span<const real> probabilities, RngStream& rng) {
  const double u = rng.next_unit();
  double cum = 0;
  for (size_t i = 0; i < probabilities.size(); ++i) {
    cum += probabilities[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probabilities.size()) - 1;
}

Agent::Agent(AgentConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void Agent::observe(const Transition& t) {
  if (cfg_.algorithm != Algorithm::Uniform &&
      static_cast<int>(t.observation.size()) != cfg_.observation_dim)
    throw std::invalid_argument("observe: observation has dim " +
                                std::to_string(t.observation.size()) + ", expected " +
                                std::to_string(cfg_.observation_dim));
  if (t.action < 0 || t.action >= cfg_.n_actions)
    throw std::invalid_argument("observe: action index out of range");
  if (!(t.reward >= -1 && t.reward <= 1))  // also rejects NaN
    throw std::invalid_argument("observe: reward " + std::to_string(t.reward) +
                                " outside [-1,1]");
  store(t);
  ++steps_observed_;
}

namespace {

std::vector<int> policy_sizes(const AgentConfig& cfg, int out_dim) {
  std::vector<int> sizes;
  sizes.reserve(cfg.pi_architecture.size() + 2);
  sizes.push_back(cfg.observation_dim);
  sizes.insert(sizes.end(), cfg.pi_architecture.begin(), cfg.pi_architecture.end());
  sizes.push_back(out_dim);
  return sizes;
}

Mlp build_policy_net(const AgentConfig& cfg, int out_dim, Activation hidden, RngStream& rng) {
  const std::vector<int> sizes = policy_sizes(cfg, out_dim);
  std::vector<Activation> acts(sizes.size() - 1, hidden);
  acts.back() = Activation::Linear;
  return mlp_init(sizes, acts, WeightInit::ScaledUniform, rng);
}

// Applied to the joint gradient of the actor/critic pair, matching a single
// optimizer over both networks.
real clip_global_norm(GradientSet& a, GradientSet& b, real max_norm) {
  const real norm = std::sqrt(a.squared_norm() + b.squared_norm());
  if (norm > max_norm && norm > 0) {
    const real s = max_norm / norm;
    a.scale(s);
    b.scale(s);
  }
  return norm;
}

void write_counter(std::ostream& out, const char* name, long value) {
  out << name << ' ' << value << '\n';
}

long read_counter(std::istream& in, const char* name) {
  std::string key;
  long value = 0;
  if (!(in >> key >> value) || key != name)
    throw std::runtime_error(std::string("agent checkpoint: expected counter '") + name + "'");
  return value;
}

class DqnAgent final : public Agent {
 public:
  explicit DqnAgent(AgentConfig cfg) : Agent(std::move(cfg)) {
    RngStream init = derive_stream(cfg_.seed, "qnet");
    q_net_ = build_policy_net(cfg_, cfg_.n_actions, Activation::Rectifier, init);
    opt_ = make_adam_state(q_net_, {.step_size = cfg_.dqn.learning_rate});
    grads_ = make_gradients(q_net_);
    replay_.reserve(std::min<long>(cfg_.dqn.replay_capacity, 1 << 20));
  }

  int act(std::span<const real> obs, RngStream& rng, bool explore) override {
    if (static_cast<int>(obs.size()) != cfg_.observation_dim)
      throw std::invalid_argument("act: observation dim mismatch");
    if (explore && rng.next_unit() < current_epsilon()) return rng.uniform_int(cfg_.n_actions);
    const Vec q = mlp_forward(q_net_, obs);
    if (!all_finite(q)) throw std::runtime_error("dqn act: non-finite Q values");
    return argmax_lowest(q);
  }

  TrainStats update(RngStream& rng) override {
    TrainStats stats;
    const DqnParams& p = cfg_.dqn;
    if (steps_observed_ < p.warmup_steps || static_cast<int>(replay_.size()) < p.batch_size) {
      stats.skip_reason = "warmup";
      return stats;
    }
    if (steps_observed_ % p.train_every != 0) {
      stats.skip_reason = "train-frequency";
      return stats;
    }

    grads_.set_zero();
    real loss = 0;
    const real inv_b = real(1) / static_cast<real>(p.batch_size);
    for (int b = 0; b < p.batch_size; ++b) {
      const Transition& t = replay_[rng.uniform_int(static_cast<int>(replay_.size()))];
      const Vec q = mlp_forward(q_net_, t.observation, &cache_);
      // Single-step interaction: the regression target is the stored reward,
      // with no bootstrap term.
      const real target = t.reward;
      const real diff = q[t.action] - target;
      loss += diff * diff * inv_b;
      out_grad_.assign(cfg_.n_actions, 0);
      out_grad_[t.action] = 2 * diff * inv_b;
      mlp_backward_accumulate(q_net_, cache_, out_grad_, 1, grads_);
      if (cfg_.instrument) {
        stats.debug_targets.push_back(target);
        stats.debug_rewards.push_back(t.reward);
      }
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("dqn update: non-finite loss at step " +
                               std::to_string(steps_observed_));
    stats.grad_norm = std::sqrt(grads_.squared_norm());
    adam_step(q_net_, grads_, opt_);
    stats.status = UpdateStatus::Updated;
    stats.loss = stats.value_loss = loss;
    stats.n_samples = p.batch_size;
    return stats;
  }

  bool ready_to_update() const override {
    return steps_observed_ >= cfg_.dqn.warmup_steps &&
           static_cast<int>(replay_.size()) >= cfg_.dqn.batch_size &&
           steps_observed_ % cfg_.dqn.train_every == 0;
  }

  long stored_transitions() const override { return static_cast<long>(replay_.size()); }
  std::vector<Transition> stored_snapshot() const override { return replay_; }
  std::vector<const Mlp*> networks() const override { return {&q_net_}; }
  std::vector<Mlp*> mutable_networks() override { return {&q_net_}; }

  void save_state(std::ostream& out) const override {
    write_counter(out, "steps", steps_observed_);
    write_mlp(out, q_net_);
    write_adam(out, opt_);
  }

  void load_state(std::istream& in) override {
    steps_observed_ = read_counter(in, "steps");
    Mlp net = read_mlp(in);
    if (!make_gradients(net).shape_matches(q_net_))
      throw std::runtime_error("dqn checkpoint: network shape does not match config");
    q_net_ = std::move(net);
    opt_ = read_adam(in, q_net_);
    replay_.clear();
    replay_head_ = 0;
  }

  real current_epsilon() const {
    const DqnParams& p = cfg_.dqn;
    if (steps_observed_ >= p.epsilon_decay_steps) return p.epsilon_final;
    const real frac = static_cast<real>(steps_observed_) / static_cast<real>(p.epsilon_decay_steps);
    return p.epsilon_start + frac * (p.epsilon_final - p.epsilon_start);
  }

 protected:
  void store(const Transition& t) override {
    if (static_cast<int>(replay_.size()) < cfg_.dqn.replay_capacity) {
      replay_.push_back(t);
    } else {
      replay_[replay_head_] = t;  // overwrite the oldest entry
      replay_head_ = (replay_head_ + 1) % replay_.size();
    }
  }

 private:
  Mlp q_net_;
  AdamState opt_;
  GradientSet grads_;
  ForwardCache cache_;
  Vec out_grad_;
  std::vector<Transition> replay_;
  size_t replay_head_ = 0;
};

// Shared machinery of the two policy-gradient agents: separate actor and
// critic networks with identical hidden stacks, a fixed-size rollout buffer,
// and a joint gradient-norm clip.
class ActorCriticAgent : public Agent {
 public:
  explicit ActorCriticAgent(AgentConfig cfg) : Agent(std::move(cfg)) {
    const bool is_ppo = cfg_.algorithm == Algorithm::Ppo;
    rollout_steps_ = is_ppo ? cfg_.ppo.rollout_steps : cfg_.a2c.rollout_steps;
    const real learning_rate = is_ppo ? cfg_.ppo.learning_rate : cfg_.a2c.learning_rate;
    RngStream actor_init = derive_stream(cfg_.seed, "actor");
    RngStream critic_init = derive_stream(cfg_.seed, "critic");
    actor_ = build_policy_net(cfg_, cfg_.n_actions, Activation::Tanh, actor_init);
    critic_ = build_policy_net(cfg_, 1, Activation::Tanh, critic_init);
    actor_opt_ = make_adam_state(actor_, {.step_size = learning_rate});
    critic_opt_ = make_adam_state(critic_, {.step_size = learning_rate});
    actor_grads_ = make_gradients(actor_);
    critic_grads_ = make_gradients(critic_);
    rollout_.reserve(rollout_steps_);
  }

  int act(std::span<const real> obs, RngStream& rng, bool explore) override {
    if (static_cast<int>(obs.size()) != cfg_.observation_dim)
      throw std::invalid_argument("act: observation dim mismatch");
    const Vec logits = mlp_forward(actor_, obs);
    if (!all_finite(logits)) throw std::runtime_error("actor act: non-finite logits");
    if (!explore) return argmax_lowest(logits);
    return sample_categorical(softmax(logits), rng);
  }

  bool ready_to_update() const override {
    return static_cast<int>(rollout_.size()) >= rollout_steps_;
  }
  long stored_transitions() const override { return static_cast<long>(rollout_.size()); }
  std::vector<Transition> stored_snapshot() const override { return rollout_; }
  std::vector<const Mlp*> networks() const override { return {&actor_, &critic_}; }
  std::vector<Mlp*> mutable_networks() override { return {&actor_, &critic_}; }

  void save_state(std::ostream& out) const override {
    write_counter(out, "steps", steps_observed_);
    write_mlp(out, actor_);
    write_mlp(out, critic_);
    write_adam(out, actor_opt_);
    write_adam(out, critic_opt_);
  }

  void load_state(std::istream& in) override {
    steps_observed_ = read_counter(in, "steps");
    Mlp actor = read_mlp(in);
    Mlp critic = read_mlp(in);
    if (!make_gradients(actor).shape_matches(actor_) ||
        !make_gradients(critic).shape_matches(critic_))
      throw std::runtime_error("actor-critic checkpoint: network shape does not match config");
    actor_ = std::move(actor);
    critic_ = std::move(critic);
    actor_opt_ = read_adam(in, actor_);
    critic_opt_ = read_adam(in, critic_);
    rollout_.clear();
  }

 protected:
  void store(const Transition& t) override {
    if (static_cast<int>(rollout_.size()) < rollout_steps_) rollout_.push_back(t);
    // A full rollout means update() is due; further transitions are not
    // collected until it runs (the training loop interleaves the two).
  }

  // Gradient of the entropy bonus -coef * H(pi) w.r.t. the logits, added into
  // `out_grad` with weight `scale`.
  void add_entropy_gradient(real coef, real scale, const Vec& probs, const Vec& logp,
                            Vec& out_grad, real& entropy_acc) const {
    real entropy = 0;
    for (size_t j = 0; j < probs.size(); ++j) entropy -= probs[j] * logp[j];
    entropy_acc += entropy;
    if (coef == 0) return;
    for (size_t j = 0; j < probs.size(); ++j)
      out_grad[j] += scale * coef * probs[j] * (logp[j] + entropy);
  }

  int rollout_steps_;
  Mlp actor_;
  Mlp critic_;
  AdamState actor_opt_;
  AdamState critic_opt_;
  GradientSet actor_grads_;
  GradientSet critic_grads_;
  ForwardCache actor_cache_;
  ForwardCache critic_cache_;
  Vec actor_out_grad_;
  std::vector<Transition> rollout_;
};

class A2cAgent final : public ActorCriticAgent {
 public:
  explicit A2cAgent(AgentConfig cfg) : ActorCriticAgent(std::move(cfg)) {}

  TrainStats update(RngStream&) override {
    TrainStats stats;
    const A2cParams& p = cfg_.a2c;
    if (static_cast<int>(rollout_.size()) < rollout_steps_) {
      stats.skip_reason = "rollout-incomplete";
      return stats;
    }

    actor_grads_.set_zero();
    critic_grads_.set_zero();
    const real inv_n = real(1) / static_cast<real>(rollout_.size());
    real policy_loss = 0, value_loss = 0, entropy = 0;
    const real critic_weight = 2 * p.value_coef * inv_n;
    for (const Transition& t : rollout_) {
      const Vec value_out = mlp_forward(critic_, t.observation, &critic_cache_);
      const real value = value_out[0];
      const Vec logits = mlp_forward(actor_, t.observation, &actor_cache_);
      const Vec probs = softmax(logits);
      const Vec logp = log_softmax(logits);
      const real advantage = t.reward - value;  // single-step return

      policy_loss += -logp[t.action] * advantage * inv_n;
      actor_out_grad_.assign(cfg_.n_actions, 0);
      for (int j = 0; j < cfg_.n_actions; ++j)
        actor_out_grad_[j] = inv_n * advantage * (probs[j] - (j == t.action ? real(1) : real(0)));
      add_entropy_gradient(p.entropy_coef, inv_n, probs, logp, actor_out_grad_, entropy);
      mlp_backward_accumulate(actor_, actor_cache_, actor_out_grad_, 1, actor_grads_);

      value_loss += (value - t.reward) * (value - t.reward) * inv_n;
      const real critic_out_grad[1] = {critic_weight * (value - t.reward)};
      mlp_backward_accumulate(critic_, critic_cache_, critic_out_grad, 1, critic_grads_);
    }
    entropy *= inv_n;

    stats.grad_norm = clip_global_norm(actor_grads_, critic_grads_, p.max_grad_norm);
    adam_step(actor_, actor_grads_, actor_opt_);
    adam_step(critic_, critic_grads_, critic_opt_);

    stats.status = UpdateStatus::Updated;
    stats.policy_loss = policy_loss;
    stats.value_loss = value_loss;
    stats.loss = policy_loss + p.value_coef * value_loss - p.entropy_coef * entropy;
    if (!std::isfinite(stats.loss))
      throw std::runtime_error("a2c update: non-finite loss at step " +
                               std::to_string(steps_observed_));
    stats.n_samples = static_cast<int>(rollout_.size());
    rollout_.clear();
    return stats;
  }
};

class PpoAgent final : public ActorCriticAgent {
 public:
  explicit PpoAgent(AgentConfig cfg) : ActorCriticAgent(std::move(cfg)) {}

  TrainStats update(RngStream& rng) override {
    TrainStats stats;
    const PpoParams& p = cfg_.ppo;
    const int n = static_cast<int>(rollout_.size());
    if (n < rollout_steps_) {
      stats.skip_reason = "rollout-incomplete";
      return stats;
    }

    // Parameters have not moved since collection, so recomputing log-probs
    // and values here reproduces the collection-time quantities exactly.
    Vec old_logp(n), advantage(n);
    for (int i = 0; i < n; ++i) {
      const Transition& t = rollout_[i];
      const Vec logits = mlp_forward(actor_, t.observation);
      old_logp[i] = log_softmax(logits)[t.action];
      advantage[i] = t.reward - mlp_forward(critic_, t.observation)[0];
    }

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    real policy_loss = 0, value_loss = 0, entropy = 0, grad_norm_acc = 0;
    int n_minibatches = 0;
    for (int epoch = 0; epoch < p.n_epochs; ++epoch) {
      // Fisher-Yates with the caller's stream.
      for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

      for (int start = 0; start < n; start += p.minibatch_size) {
        const int m = std::min(p.minibatch_size, n - start);
        const real inv_m = real(1) / static_cast<real>(m);
        const real critic_weight = 2 * p.value_coef * inv_m;
        actor_grads_.set_zero();
        critic_grads_.set_zero();
        for (int bi = 0; bi < m; ++bi) {
          const int idx = order[start + bi];
          const Transition& t = rollout_[idx];
          const real adv = advantage[idx];

          const Vec logits = mlp_forward(actor_, t.observation, &actor_cache_);
          const Vec probs = softmax(logits);
          const Vec logp = log_softmax(logits);
          const real ratio = std::exp(logp[t.action] - old_logp[idx]);
          const real clipped_ratio = std::clamp(ratio, 1 - p.clip_range, 1 + p.clip_range);
          const real unclipped = ratio * adv;
          const real clipped = clipped_ratio * adv;
          const real surrogate = std::min(unclipped, clipped);
          policy_loss += -surrogate * inv_m;

          actor_out_grad_.assign(cfg_.n_actions, 0);
          if (unclipped <= clipped) {
            // Gradient flows through the probability ratio only when the
            // unclipped branch attains the minimum; a clipped-and-worse
            // sample contributes a constant.
            for (int j = 0; j < cfg_.n_actions; ++j)
              actor_out_grad_[j] =
                  -inv_m * adv * ratio * ((j == t.action ? real(1) : real(0)) - probs[j]);
          }
          add_entropy_gradient(p.entropy_coef, inv_m, probs, logp, actor_out_grad_, entropy);
          mlp_backward_accumulate(actor_, actor_cache_, actor_out_grad_, 1, actor_grads_);

          const Vec value_out = mlp_forward(critic_, t.observation, &critic_cache_);
          const real value = value_out[0];
          value_loss += (value - t.reward) * (value - t.reward) * inv_m;
          const real critic_out_grad[1] = {critic_weight * (value - t.reward)};
          mlp_backward_accumulate(critic_, critic_cache_, critic_out_grad, 1, critic_grads_);

          if (cfg_.instrument) {
            stats.debug_ratios.push_back(ratio);
            stats.debug_advantages.push_back(adv);
            stats.debug_objectives.push_back(surrogate);
          }
        }
        grad_norm_acc += clip_global_norm(actor_grads_, critic_grads_, p.max_grad_norm);
        ++n_minibatches;
        adam_step(actor_, actor_grads_, actor_opt_);
        adam_step(critic_, critic_grads_, critic_opt_);
      }
    }

    stats.status = UpdateStatus::Updated;
    stats.policy_loss = policy_loss / static_cast<real>(n_minibatches);
    stats.value_loss = value_loss / static_cast<real>(n_minibatches);
    stats.loss = stats.policy_loss + p.value_coef * stats.value_loss;
    if (!std::isfinite(stats.loss))
      throw std::runtime_error("ppo update: non-finite loss at step " +
                               std::to_string(steps_observed_));
    stats.grad_norm = grad_norm_acc / static_cast<real>(n_minibatches);
    stats.n_samples = n;
    rollout_.clear();
    return stats;
  }
};

class UniformAgent final : public Agent {
 public:
  explicit UniformAgent(AgentConfig cfg) : Agent(std::move(cfg)) {}

  int act(std::span<const real>, RngStream& rng, bool) override {
    return rng.uniform_int(cfg_.n_actions);
  }

  TrainStats update(RngStream&) override {
    TrainStats stats;
    stats.skip_reason = "uniform-baseline";
    return stats;
  }

  bool ready_to_update() const override { return false; }
  long stored_transitions() const override { return 0; }
  std::vector<Transition> stored_snapshot() const override { return {}; }
  std::vector<const Mlp*> networks() const override { return {}; }
  std::vector<Mlp*> mutable_networks() override { return {}; }

  void save_state(std::ostream& out) const override { write_counter(out, "steps", steps_observed_); }
  void load_state(std::istream& in) override { steps_observed_ = read_counter(in, "steps"); }

 protected:
  void store(const Transition&) override {}
};

}  // namespace

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg) {
  cfg.validate();
  switch (cfg.algorithm) {
    case Algorithm::Dqn: return std::make_unique<DqnAgent>(cfg);
    case Algorithm::A2c: return std::make_unique<A2cAgent>(cfg);
    case Algorithm::Ppo: return std::make_unique<PpoAgent>(cfg);
    case Algorithm::Uniform: return std::make_unique<UniformAgent>(cfg);
  }
  throw std::invalid_argument("make_agent: unknown algorithm");
}

}  // namespace persim
