#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "persim/adam.hpp"
#include "persim/common.hpp"
#include "persim/mlp.hpp"
#include "persim/rng.hpp"

namespace persim {

// One agent-environment interaction. Episodes are single-step, so there is no
// successor observation and no discounting anywhere in this module.
struct Transition {
  Vec observation;
  int action = 0;
  real reward = 0;
};

enum class Algorithm { Dqn, A2c, Ppo, Uniform };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(std::string_view name);

struct DqnParams {
  real learning_rate = 1e-4;
  int replay_capacity = 50000;
  int batch_size = 32;
  int warmup_steps = 1000;
  int train_every = 4;
  real epsilon_start = 1.0;
  real epsilon_final = 0.05;
  long epsilon_decay_steps = 10000;  // harnesses set this to budget / 10
};

struct A2cParams {
  real learning_rate = 7e-4;
  int rollout_steps = 5;
  real value_coef = 0.5;
  real entropy_coef = 0.0;
  real max_grad_norm = 0.5;
};

struct PpoParams {
  real learning_rate = 3e-4;
  int rollout_steps = 2048;
  int minibatch_size = 64;
  int n_epochs = 10;
  real clip_range = 0.2;
  real value_coef = 0.5;
  real entropy_coef = 0.0;
  real max_grad_norm = 0.5;
};

struct AgentConfig {
  Algorithm algorithm = Algorithm::Uniform;
  std::vector<int> pi_architecture;  // hidden widths of every policy/value net
  int observation_dim = 0;
  int n_actions = 0;
  uint64_t seed = 0;  // network initialization
  // When set, update() fills the TrainStats debug fields below.
  bool instrument = false;
  DqnParams dqn;
  A2cParams a2c;
  PpoParams ppo;

  void validate() const;
};

enum class UpdateStatus { Updated, Skipped };

struct TrainStats {
  UpdateStatus status = UpdateStatus::Skipped;
  std::string skip_reason;
  real loss = 0;
  real policy_loss = 0;
  real value_loss = 0;
  real grad_norm = 0;  // pre-clip global norm
  int n_samples = 0;
  // Instrumentation (config.instrument only).
  std::vector<real> debug_targets;     // DQN regression targets, batch order
  std::vector<real> debug_rewards;     // matching stored rewards
  std::vector<real> debug_ratios;      // PPO probability ratios, all epochs
  std::vector<real> debug_advantages;  // matching advantages
  std::vector<real> debug_objectives;  // matching per-sample surrogate values
};

// Shared interaction contract. act() is a pure function of (parameters,
// observation) when explore is false; observe() stores a transition;
// update() consumes stored data when enough is available and reports
// Skipped otherwise.
class Agent {
 public:
  virtual ~Agent() = default;

  const AgentConfig& config() const { return cfg_; }
  long steps_observed() const { return steps_observed_; }

  virtual int act(std::span<const real> observation, RngStream& rng, bool explore) = 0;
  void observe(const Transition& t);
  virtual TrainStats update(RngStream& rng) = 0;

  // True when the next update() call would actually train.
  virtual bool ready_to_update() const = 0;
  // Introspection over the replay/rollout buffer (tests and debugging).
  virtual long stored_transitions() const = 0;
  virtual std::vector<Transition> stored_snapshot() const = 0;

  // Checkpoint body (everything after the config block): parameters,
  // optimizer state, counters. Buffers are transient and not persisted.
  virtual void save_state(std::ostream& out) const = 0;
  virtual void load_state(std::istream& in) = 0;

  // Bitwise parameter comparison; used by round-trip and no-op tests.
  virtual std::vector<const Mlp*> networks() const = 0;
  // Mutable access for fixtures that hand-set weights. Not a training API.
  virtual std::vector<Mlp*> mutable_networks() = 0;

 protected:
  explicit Agent(AgentConfig cfg);
  virtual void store(const Transition& t) = 0;

  AgentConfig cfg_;
  long steps_observed_ = 0;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg);

// Helpers shared by the policy-gradient agents and their tests.
Vec softmax(std::span<const real> logits);
Vec log_softmax(std::span<const real> logits);
int argmax_lowest(std::span<const real> values);
int sample_categorical(std::span<const real> probabilities, RngStream& rng);

}  // namespace persim
