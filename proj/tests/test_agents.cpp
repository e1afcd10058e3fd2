#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "persim/agents.hpp"
#include "persim/serialize.hpp"

using namespace persim;

namespace {

AgentConfig base_config(Algorithm algo, int obs_dim, int n_actions, uint64_t seed = 1) {
  AgentConfig cfg;
  cfg.algorithm = algo;
  cfg.pi_architecture = {16, 16};
  cfg.observation_dim = obs_dim;
  cfg.n_actions = n_actions;
  cfg.seed = seed;
  return cfg;
}

void zero_network(Mlp& net) {
  for (Layer& layer : net.layers) {
    std::fill(layer.weights.data.begin(), layer.weights.data.end(), real(0));
    std::fill(layer.bias.begin(), layer.bias.end(), real(0));
  }
}

bool networks_equal(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].weights.data != b.layers[l].weights.data ||
        a.layers[l].bias != b.layers[l].bias)
      return false;
  return true;
}

// Same parameters up to summation-order round-off (the agents shuffle their
// minibatches, so accumulation order differs from a hand-rolled loop).
bool networks_close(const Mlp& a, const Mlp& b, double tol) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    for (size_t i = 0; i < a.layers[l].weights.data.size(); ++i)
      if (std::fabs(a.layers[l].weights.data[i] - b.layers[l].weights.data[i]) > tol) return false;
    for (size_t i = 0; i < a.layers[l].bias.size(); ++i)
      if (std::fabs(a.layers[l].bias[i] - b.layers[l].bias[i]) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("make_agent builds the documented network stacks") {
  auto dqn = make_agent(base_config(Algorithm::Dqn, 100, 100));
  {
    AgentConfig cfg = base_config(Algorithm::Dqn, 100, 100);
    cfg.pi_architecture = {32, 32, 32};
    dqn = make_agent(cfg);
  }
  const Mlp& q = *dqn->networks()[0];
  REQUIRE(q.layers.size() == 4);
  CHECK(q.input_dim() == 100);
  CHECK(q.output_dim() == 100);
  CHECK(q.layers[0].out_dim() == 32);
  CHECK(q.layers[2].out_dim() == 32);
  CHECK(q.layers[0].activation == Activation::Rectifier);
  CHECK(q.layers[3].activation == Activation::Linear);

  AgentConfig pcfg = base_config(Algorithm::Ppo, 10, 7);
  pcfg.pi_architecture = {128, 128, 128};
  auto ppo = make_agent(pcfg);
  REQUIRE(ppo->networks().size() == 2);
  const Mlp& actor = *ppo->networks()[0];
  const Mlp& critic = *ppo->networks()[1];
  CHECK(actor.output_dim() == 7);
  CHECK(critic.output_dim() == 1);
  REQUIRE(actor.layers.size() == critic.layers.size());
  for (size_t l = 0; l + 1 < actor.layers.size(); ++l) {
    CHECK(actor.layers[l].out_dim() == critic.layers[l].out_dim());  // same hidden stack
    CHECK(actor.layers[l].activation == Activation::Tanh);
  }

  auto uniform = make_agent(base_config(Algorithm::Uniform, 10, 7));
  CHECK(uniform->networks().empty());
}

TEST_CASE("invalid agent configs are rejected") {
  AgentConfig cfg = base_config(Algorithm::Dqn, 10, 5);
  cfg.pi_architecture.clear();
  CHECK_THROWS_AS(make_agent(cfg), std::invalid_argument);
  cfg = base_config(Algorithm::Ppo, 10, 5);
  cfg.ppo.clip_range = real(1.5);
  CHECK_THROWS_AS(make_agent(cfg), std::invalid_argument);
  cfg = base_config(Algorithm::Dqn, 10, 5);
  cfg.dqn.replay_capacity = 8;
  cfg.dqn.batch_size = 16;
  CHECK_THROWS_AS(make_agent(cfg), std::invalid_argument);
}

TEST_CASE("uniform agent ignores the observation") {
  auto agent = make_agent(base_config(Algorithm::Uniform, 10, 9));
  RngStream r1 = derive_stream(3, "act");
  RngStream r2 = derive_stream(3, "act");
  for (int t = 0; t < 200; ++t) {
    const int a = agent->act(Vec(10, real(0.5)), r1, true);
    const int b = agent->act(Vec(10, real(-0.5)), r2, false);
    CHECK(a == b);
    CHECK(a >= 0);
    CHECK(a < 9);
  }
}

TEST_CASE("greedy DQN action is the argmax with lowest-index ties") {
  AgentConfig cfg = base_config(Algorithm::Dqn, 1, 2);
  cfg.pi_architecture = {1};
  auto agent = make_agent(cfg);
  Mlp& q = *agent->mutable_networks()[0];
  zero_network(q);
  // hidden: relu(0*x + 1) = 1; output: [0.1, 0.9]
  q.layers[0].bias[0] = 1;
  q.layers[1].weights(0, 0) = real(0.1);
  q.layers[1].weights(1, 0) = real(0.9);
  RngStream rng = derive_stream(4, "act");
  CHECK(agent->act(Vec{real(0.3)}, rng, false) == 1);

  q.layers[1].weights(1, 0) = real(0.1);  // tie -> lowest index
  CHECK(agent->act(Vec{real(0.3)}, rng, false) == 0);

  // greedy action consumes no randomness
  RngStream before = derive_stream(5, "probe");
  RngStream after = before;
  (void)agent->act(Vec{real(0.3)}, after, false);
  CHECK(before.next_u64() == after.next_u64());
}

TEST_CASE("fully exploratory DQN acts uniformly (chi-squared)") {
  AgentConfig cfg = base_config(Algorithm::Dqn, 4, 10);
  cfg.dqn.epsilon_start = 1;
  cfg.dqn.epsilon_final = 1;
  auto agent = make_agent(cfg);
  RngStream rng = derive_stream(6, "act");
  std::vector<long> counts(10, 0);
  const long n = 100'000;
  const Vec obs(4, real(0.1));
  for (long t = 0; t < n; ++t) ++counts[agent->act(obs, rng, true)];
  // dof 9, significance 1e-3
  CHECK(oracles::chi_squared_uniform(counts, n) < 27.877);
}

TEST_CASE("zero-logit actor samples uniformly (chi-squared)") {
  auto agent = make_agent(base_config(Algorithm::Ppo, 4, 10));
  zero_network(*agent->mutable_networks()[0]);
  RngStream rng = derive_stream(7, "act");
  std::vector<long> counts(10, 0);
  const long n = 100'000;
  const Vec obs(4, real(0.2));
  for (long t = 0; t < n; ++t) ++counts[agent->act(obs, rng, true)];
  CHECK(oracles::chi_squared_uniform(counts, n) < 27.877);
}

TEST_CASE("softmax probabilities are normalized and consistent with log_softmax") {
  RngStream rng = derive_stream(8, "logits");
  for (int t = 0; t < 200; ++t) {
    Vec logits(12);
    for (real& v : logits) v = static_cast<real>(rng.uniform(-30, 30));
    const Vec p = softmax(logits);
    const Vec lp = log_softmax(logits);
    real sum = 0;
    for (real v : p) sum += v;
    CHECK(std::fabs(sum - 1) < 1e-12);
    for (size_t i = 0; i < p.size(); ++i)
      CHECK(std::exp(lp[i]) == doctest::Approx(p[i]).epsilon(1e-10));
  }
  CHECK(argmax_lowest(Vec{real(1), real(3), real(3)}) == 1);
}

TEST_CASE("replay buffer is FIFO with bounded capacity") {
  AgentConfig cfg = base_config(Algorithm::Dqn, 2, 3);
  cfg.dqn.replay_capacity = 3;
  cfg.dqn.batch_size = 2;
  auto agent = make_agent(cfg);
  const Vec obs(2, real(0.1));
  for (int i = 1; i <= 3; ++i)
    agent->observe({obs, 0, static_cast<real>(0.1 * i)});
  CHECK(agent->stored_transitions() == 3);
  agent->observe({obs, 0, real(0.4)});
  CHECK(agent->stored_transitions() == 3);
  const auto snapshot = agent->stored_snapshot();
  bool saw_oldest = false, saw_newest = false;
  for (const Transition& t : snapshot) {
    if (t.reward == real(0.1)) saw_oldest = true;
    if (t.reward == real(0.4)) saw_newest = true;
  }
  CHECK(!saw_oldest);  // evicted
  CHECK(saw_newest);
}

TEST_CASE("rollout buffer flags ready exactly at n_steps") {
  AgentConfig cfg = base_config(Algorithm::A2c, 2, 3);
  cfg.a2c.rollout_steps = 5;
  auto agent = make_agent(cfg);
  RngStream rng = derive_stream(9, "update");
  const Vec obs(2, real(0.1));
  for (int i = 0; i < 4; ++i) {
    agent->observe({obs, i % 3, real(0.2)});
    CHECK(!agent->ready_to_update());
    CHECK(agent->update(rng).status == UpdateStatus::Skipped);
  }
  agent->observe({obs, 0, real(0.2)});
  CHECK(agent->ready_to_update());
  const TrainStats stats = agent->update(rng);
  CHECK(stats.status == UpdateStatus::Updated);
  CHECK(stats.n_samples == 5);
  CHECK(agent->stored_transitions() == 0);  // consumed
  CHECK(!agent->ready_to_update());
}

TEST_CASE("transition invariants are enforced on observe") {
  auto agent = make_agent(base_config(Algorithm::Dqn, 2, 3));
  const Vec obs(2, real(0.1));
  CHECK_THROWS_AS(agent->observe({obs, 0, real(1.5)}), std::invalid_argument);
  CHECK_THROWS_AS(agent->observe({obs, 0, -real(1.5)}), std::invalid_argument);
  CHECK_THROWS_AS(agent->observe({obs, 3, real(0.5)}), std::invalid_argument);
  CHECK_THROWS_AS(agent->observe({Vec(1, real(0)), 0, real(0.5)}), std::invalid_argument);
  RngStream rng = derive_stream(1, "x");
  CHECK_THROWS_AS(agent->act(Vec(5, real(0)), rng, false), std::invalid_argument);
}

TEST_CASE("update before data is a skipped no-op with a reason") {
  auto dqn = make_agent(base_config(Algorithm::Dqn, 2, 3));
  RngStream rng = derive_stream(10, "update");
  const TrainStats s1 = dqn->update(rng);
  CHECK(s1.status == UpdateStatus::Skipped);
  CHECK(s1.skip_reason == "warmup");

  auto uniform = make_agent(base_config(Algorithm::Uniform, 2, 3));
  CHECK(uniform->update(rng).status == UpdateStatus::Skipped);
}

TEST_CASE("DQN regression targets equal the stored rewards (single-step)") {
  AgentConfig cfg = base_config(Algorithm::Dqn, 2, 3);
  cfg.instrument = true;
  cfg.dqn.warmup_steps = 0;
  cfg.dqn.train_every = 1;
  cfg.dqn.batch_size = 8;
  auto agent = make_agent(cfg);
  RngStream act_rng = derive_stream(11, "act");
  RngStream update_rng = derive_stream(11, "update");
  RngStream env_rng = derive_stream(11, "env");
  for (int t = 0; t < 64; ++t) {
    Vec obs = {static_cast<real>(env_rng.uniform(-1, 1)), static_cast<real>(env_rng.uniform(-1, 1))};
    const int action = agent->act(obs, act_rng, true);
    agent->observe({obs, action, static_cast<real>(env_rng.uniform(-1, 1))});
    const TrainStats stats = agent->update(update_rng);
    if (stats.status == UpdateStatus::Updated) {
      REQUIRE(!stats.debug_targets.empty());
      for (size_t i = 0; i < stats.debug_targets.size(); ++i)
        CHECK(stats.debug_targets[i] == stats.debug_rewards[i]);  // no bootstrap term
    }
  }
}

TEST_CASE("DQN fits a one-state two-action bandit to the known fixed point") {
  AgentConfig cfg = base_config(Algorithm::Dqn, 1, 2, 5);
  cfg.dqn.learning_rate = real(1e-3);
  cfg.dqn.warmup_steps = 100;
  cfg.dqn.train_every = 1;
  cfg.dqn.batch_size = 32;
  cfg.dqn.epsilon_decay_steps = 2000;
  auto agent = make_agent(cfg);
  RngStream act_rng = derive_stream(12, "act");
  RngStream update_rng = derive_stream(12, "update");
  const Vec obs = {real(1)};
  const real rewards[2] = {real(0.2), real(0.8)};
  for (int t = 0; t < 5000; ++t) {
    const int action = agent->act(obs, act_rng, true);
    agent->observe({obs, action, rewards[action]});
    agent->update(update_rng);
  }
  const Vec q = mlp_forward(*agent->networks()[0], obs);
  CHECK(std::fabs(q[0] - 0.2) < 1e-2);
  CHECK(std::fabs(q[1] - 0.8) < 1e-2);
  RngStream greedy_rng = derive_stream(13, "greedy");
  CHECK(agent->act(obs, greedy_rng, false) == 1);
}

TEST_CASE("A2C with zero advantage leaves the actor untouched") {
  AgentConfig cfg = base_config(Algorithm::A2c, 3, 4);
  cfg.a2c.rollout_steps = 6;
  auto agent = make_agent(cfg);
  // critic := constant 0.25 (zero hidden weights; output bias carries it)
  Mlp& critic = *agent->mutable_networks()[1];
  zero_network(critic);
  critic.layers.back().bias[0] = real(0.25);

  const Mlp actor_before = *agent->networks()[0];
  const Mlp critic_before = *agent->networks()[1];
  RngStream rng = derive_stream(14, "update");
  const Vec obs(3, real(0.3));
  for (int i = 0; i < 6; ++i) agent->observe({obs, i % 4, real(0.25)});
  const TrainStats stats = agent->update(rng);
  CHECK(stats.status == UpdateStatus::Updated);
  CHECK(networks_equal(*agent->networks()[0], actor_before));
  CHECK(networks_equal(*agent->networks()[1], critic_before));  // value loss is 0 too
}

TEST_CASE("PPO ratios are exactly 1 on the epoch right after collection") {
  AgentConfig cfg = base_config(Algorithm::Ppo, 3, 5);
  cfg.instrument = true;
  cfg.ppo.rollout_steps = 8;
  cfg.ppo.minibatch_size = 8;
  cfg.ppo.n_epochs = 1;
  auto agent = make_agent(cfg);
  RngStream act_rng = derive_stream(15, "act");
  RngStream update_rng = derive_stream(15, "update");
  RngStream env_rng = derive_stream(15, "env");
  TrainStats stats;
  for (int t = 0; t < 8; ++t) {
    Vec obs(3);
    for (real& v : obs) v = static_cast<real>(env_rng.uniform(-1, 1));
    const int action = agent->act(obs, act_rng, true);
    agent->observe({obs, action, static_cast<real>(env_rng.uniform(-1, 1))});
    stats = agent->update(update_rng);
  }
  REQUIRE(stats.status == UpdateStatus::Updated);
  REQUIRE(stats.debug_ratios.size() == 8);
  for (real ratio : stats.debug_ratios) CHECK(ratio == 1.0);
}

TEST_CASE("PPO first update step equals the plain policy gradient") {
  // One epoch over one minibatch with the clip inactive (ratio == 1): the
  // parameter step must match gradients assembled by hand plus one optimizer
  // step, both applied to copies of the same networks.
  AgentConfig cfg = base_config(Algorithm::Ppo, 3, 4, 77);
  cfg.ppo.rollout_steps = 4;
  cfg.ppo.minibatch_size = 4;
  cfg.ppo.n_epochs = 1;
  cfg.ppo.max_grad_norm = real(1e6);  // keep the clip out of the comparison
  auto agent = make_agent(cfg);

  std::vector<Transition> transitions;
  RngStream env_rng = derive_stream(16, "env");
  RngStream act_rng = derive_stream(16, "act");
  for (int t = 0; t < 4; ++t) {
    Vec obs(3);
    for (real& v : obs) v = static_cast<real>(env_rng.uniform(-1, 1));
    const int action = agent->act(obs, act_rng, true);
    transitions.push_back({obs, action, static_cast<real>(env_rng.uniform(-1, 1))});
  }

  Mlp actor_copy = *agent->networks()[0];
  Mlp critic_copy = *agent->networks()[1];

  // Expected gradients of the unclipped surrogate and the value loss.
  GradientSet actor_grads = make_gradients(actor_copy);
  GradientSet critic_grads = make_gradients(critic_copy);
  ForwardCache cache;
  const real inv_m = real(0.25);
  for (const Transition& t : transitions) {
    const Vec value_out = mlp_forward(critic_copy, t.observation, &cache);
    const real adv = t.reward - value_out[0];
    const real critic_grad[1] = {2 * cfg.ppo.value_coef * inv_m * (value_out[0] - t.reward)};
    mlp_backward_accumulate(critic_copy, cache, critic_grad, 1, critic_grads);

    const Vec logits = mlp_forward(actor_copy, t.observation, &cache);
    const Vec probs = softmax(logits);
    Vec out_grad(4);
    for (int j = 0; j < 4; ++j)
      out_grad[j] = -inv_m * adv * ((j == t.action ? real(1) : real(0)) - probs[j]);
    mlp_backward_accumulate(actor_copy, cache, out_grad, 1, actor_grads);
  }
  AdamState actor_opt = make_adam_state(actor_copy, {.step_size = cfg.ppo.learning_rate});
  AdamState critic_opt = make_adam_state(critic_copy, {.step_size = cfg.ppo.learning_rate});
  adam_step(actor_copy, actor_grads, actor_opt);
  adam_step(critic_copy, critic_grads, critic_opt);

  for (const Transition& t : transitions) agent->observe(t);
  RngStream update_rng = derive_stream(16, "update");
  const TrainStats stats = agent->update(update_rng);
  REQUIRE(stats.status == UpdateStatus::Updated);

  CHECK(networks_close(*agent->networks()[0], actor_copy, 1e-12));
  CHECK(networks_close(*agent->networks()[1], critic_copy, 1e-12));
}

TEST_CASE("PPO clipped samples contribute the clipped branch exactly") {
  AgentConfig cfg = base_config(Algorithm::Ppo, 2, 3, 31);
  cfg.instrument = true;
  cfg.ppo.learning_rate = real(0.05);  // move far enough that ratios leave the band
  cfg.ppo.rollout_steps = 16;
  cfg.ppo.minibatch_size = 4;
  cfg.ppo.n_epochs = 8;
  auto agent = make_agent(cfg);
  RngStream act_rng = derive_stream(17, "act");
  RngStream update_rng = derive_stream(17, "update");
  RngStream env_rng = derive_stream(17, "env");
  int clipped_and_worse = 0;
  for (int round = 0; round < 4; ++round) {
    TrainStats stats;
    for (int t = 0; t < 16; ++t) {
      Vec obs(2);
      for (real& v : obs) v = static_cast<real>(env_rng.uniform(-1, 1));
      const int action = agent->act(obs, act_rng, true);
      agent->observe({obs, action, static_cast<real>(env_rng.uniform(-1, 1))});
      stats = agent->update(update_rng);
    }
    REQUIRE(stats.status == UpdateStatus::Updated);
    for (size_t i = 0; i < stats.debug_ratios.size(); ++i) {
      const real ratio = stats.debug_ratios[i];
      const real adv = stats.debug_advantages[i];
      const real clipped = std::clamp(ratio, real(0.8), real(1.2)) * adv;
      const real unclipped = ratio * adv;
      CHECK(stats.debug_objectives[i] == std::min(clipped, unclipped));
      if ((ratio < real(0.8) || ratio > real(1.2)) && clipped < unclipped) {
        ++clipped_and_worse;
        CHECK(stats.debug_objectives[i] == clipped);
      }
    }
  }
  CHECK(clipped_and_worse > 0);  // the assertion above must not be vacuous
}

TEST_CASE("every emitted action is in range for all algorithms") {
  for (Algorithm algo : {Algorithm::Dqn, Algorithm::A2c, Algorithm::Ppo, Algorithm::Uniform}) {
    auto agent = make_agent(base_config(algo, 4, 6, 9));
    RngStream act_rng = derive_stream(18, "act");
    RngStream env_rng = derive_stream(18, "env");
    for (long t = 0; t < 100'000; ++t) {
      Vec obs(4);
      for (real& v : obs) v = static_cast<real>(env_rng.uniform(-1, 1));
      const int a = agent->act(obs, act_rng, (t & 1) == 0);
      REQUIRE(a >= 0);
      REQUIRE(a < 6);
    }
  }
}

TEST_CASE("training is reproducible: same seeds, same actions, same parameters") {
  for (Algorithm algo : {Algorithm::Dqn, Algorithm::A2c, Algorithm::Ppo}) {
    auto run_once = [&](std::vector<int>& actions) {
      AgentConfig cfg = base_config(algo, 3, 5, 123);
      cfg.dqn.warmup_steps = 16;
      cfg.dqn.train_every = 1;
      cfg.dqn.batch_size = 8;
      cfg.a2c.rollout_steps = 8;
      cfg.ppo.rollout_steps = 16;
      cfg.ppo.minibatch_size = 8;
      cfg.ppo.n_epochs = 2;
      auto agent = make_agent(cfg);
      RngStream act_rng = derive_stream(19, "act");
      RngStream update_rng = derive_stream(19, "update");
      RngStream env_rng = derive_stream(19, "env");  // fixed observation sequence
      for (int t = 0; t < 200; ++t) {
        Vec obs(3);
        for (real& v : obs) v = static_cast<real>(env_rng.uniform(-1, 1));
        const int action = agent->act(obs, act_rng, true);
        actions.push_back(action);
        agent->observe({obs, action, static_cast<real>(env_rng.uniform(-1, 1))});
        agent->update(update_rng);
      }
      return agent;
    };
    std::vector<int> actions_a, actions_b;
    auto agent_a = run_once(actions_a);
    auto agent_b = run_once(actions_b);
    CHECK(actions_a == actions_b);
    REQUIRE(agent_a->networks().size() == agent_b->networks().size());
    for (size_t n = 0; n < agent_a->networks().size(); ++n)
      CHECK(networks_equal(*agent_a->networks()[n], *agent_b->networks()[n]));
  }
}

TEST_CASE("checkpoints round-trip for every algorithm") {
  for (Algorithm algo : {Algorithm::Dqn, Algorithm::A2c, Algorithm::Ppo, Algorithm::Uniform}) {
    AgentConfig cfg = base_config(algo, 3, 5, 321);
    cfg.dqn.warmup_steps = 8;
    cfg.dqn.train_every = 1;
    cfg.dqn.batch_size = 8;
    cfg.a2c.rollout_steps = 8;
    cfg.ppo.rollout_steps = 8;
    cfg.ppo.minibatch_size = 8;
    cfg.ppo.n_epochs = 2;
    auto agent = make_agent(cfg);
    RngStream act_rng = derive_stream(20, "act");
    RngStream update_rng = derive_stream(20, "update");
    RngStream env_rng = derive_stream(20, "env");
    for (int t = 0; t < 64; ++t) {
      Vec obs(3);
      for (real& v : obs) v = static_cast<real>(env_rng.uniform(-1, 1));
      const int action = agent->act(obs, act_rng, true);
      agent->observe({obs, action, static_cast<real>(env_rng.uniform(-1, 1))});
      agent->update(update_rng);
    }

    std::ostringstream out;
    save_agent(out, *agent);
    std::istringstream in(out.str());
    auto loaded = load_agent(in);

    CHECK(loaded->config().algorithm == algo);
    CHECK(loaded->steps_observed() == agent->steps_observed());
    REQUIRE(loaded->networks().size() == agent->networks().size());
    for (size_t n = 0; n < agent->networks().size(); ++n)
      CHECK(networks_equal(*loaded->networks()[n], *agent->networks()[n]));

    // a second dump is byte-identical
    std::ostringstream again;
    save_agent(again, *loaded);
    CHECK(again.str() == out.str());

    // greedy behavior carries over
    RngStream g1 = derive_stream(21, "greedy");
    RngStream g2 = derive_stream(21, "greedy");
    for (int t = 0; t < 50; ++t) {
      Vec obs(3, static_cast<real>(0.01 * t - 0.25));
      CHECK(agent->act(obs, g1, false) == loaded->act(obs, g2, false));
    }
  }
}
