#include "persim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <thread>
#include <tuple>

#include <fstream>

#include "persim/report.hpp"
#include "persim/serialize.hpp"

namespace persim {

bool run_key_less(const RunKey& a, const RunKey& b) {
  const auto tie = [](const RunKey& k) {
    return std::make_tuple(k.repetition, std::string_view(algorithm_name(k.algorithm)),
                           std::string_view(mode_name(k.mode)), k.agent_seed);
  };
  return tie(a) < tie(b);
}

std::string run_label(const RunKey& key) {
  return "rep" + std::to_string(key.repetition) + "/" + algorithm_name(key.algorithm) + "/" +
         mode_name(key.mode) + "/seed" + std::to_string(key.agent_seed);
}

std::string state_stream_label(int repetition) {
  return "rep" + std::to_string(repetition) + "/states";
}

std::vector<EvalRecord> train_run(const EnvView& view, Agent& agent, const EvalContext& eval_ctx,
                                  RngStream& state_rng, RngStream& act_rng,
                                  RngStream& update_rng, RngStream& eval_rng, long budget,
                                  long cadence, const RunKey& key, const RunHooks* hooks) {
  const Environment& env = view.base();
  std::vector<EvalRecord> records;
  records.reserve(budget / cadence + 1);
  for (long step = 1; step <= budget; ++step) {
    const Vec state = env.sample_state(state_rng);
    if (hooks && hooks->on_state) hooks->on_state(key, step, state);
    const Vec obs = view.observe(state);
    const int action = agent.act(obs, act_rng, /*explore=*/true);
    const real reward = env.reward(state, action);
    agent.observe({obs, action, reward});
    agent.update(update_rng);
    if (step % cadence == 0)
      records.push_back(evaluate_policy(agent, view, eval_ctx, eval_rng, step));
  }
  return records;
}

namespace {

struct RepetitionContext {
  std::shared_ptr<const Environment> env;
  std::shared_ptr<const ClusteredEnvironment> clustered;  // null when not needed
  std::shared_ptr<const EvalContext> eval;
};

AgentConfig agent_config_for(const ExperimentConfig& cfg, const RunKey& key, int observation_dim) {
  AgentConfig out;
  out.algorithm = key.algorithm;
  out.pi_architecture = cfg.pi_architecture;
  out.observation_dim = observation_dim;
  out.n_actions = cfg.env.n_actions;
  out.seed = derive_seed(cfg.run.master_seed, run_label(key) + "/init");
  out.dqn = cfg.dqn;
  out.dqn.epsilon_decay_steps = cfg.dqn_epsilon_decay_steps();
  out.a2c = cfg.a2c;
  out.ppo = cfg.ppo;
  return out;
}

RunSeries execute_run(const ExperimentConfig& cfg, const RepetitionContext& rep,
                      const RunKey& key, const RunHooks* hooks) {
  RunSeries series;
  series.key = key;
  try {
    const EnvView view = key.mode == TrainMode::Full
                             ? EnvView(rep.env)
                             : EnvView(rep.clustered);
    std::unique_ptr<Agent> agent = make_agent(agent_config_for(cfg, key, view.observation_dim()));
    const std::string label = run_label(key);
    RngStream state_rng = derive_stream(cfg.run.master_seed, state_stream_label(key.repetition));
    RngStream act_rng = derive_stream(cfg.run.master_seed, label + "/act");
    RngStream update_rng = derive_stream(cfg.run.master_seed, label + "/update");
    RngStream eval_rng = derive_stream(cfg.run.master_seed, label + "/eval-act");
    series.records = train_run(view, *agent, *rep.eval, state_rng, act_rng, update_rng, eval_rng,
                               cfg.run.budget, cfg.evaluation.cadence, key, hooks);
  } catch (const std::exception& e) {
    series.aborted = true;
    series.error = e.what();
  }
  return series;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunHooks* hooks) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const bool wants_clustered = std::find(cfg.run.modes.begin(), cfg.run.modes.end(),
                                         TrainMode::Clustered) != cfg.run.modes.end();

  std::vector<RepetitionContext> reps(cfg.run.n_env_repetitions);
  std::shared_ptr<const ClusterModel> shared_model;  // refit_per_repetition = false
  for (int r = 0; r < cfg.run.n_env_repetitions; ++r) {
    EnvConfig env_cfg = cfg.env;
    env_cfg.seed = derive_seed(cfg.run.master_seed, "rep" + std::to_string(r) + "/env");
    auto env = std::make_shared<const Environment>(Environment::build(env_cfg));
    reps[r].env = env;

    RngStream eval_rng =
        derive_stream(cfg.run.master_seed, "rep" + std::to_string(r) + "/eval-states");
    reps[r].eval = std::make_shared<const EvalContext>(
        make_eval_context(env, make_eval_set(*env, cfg.evaluation.eval_set_size, eval_rng)));

    if (wants_clustered) {
      if (cfg.clustering.refit_per_repetition || !shared_model) {
        RngStream cluster_rng =
            derive_stream(cfg.run.master_seed, "rep" + std::to_string(r) + "/clustering");
        auto clustered = std::make_shared<const ClusteredEnvironment>(clusterize_environment(
            env, cfg.clustering.n_fit_samples, cfg.clustering.k, cfg.clustering.mode, cluster_rng,
            cfg.clustering.restarts, cfg.clustering.max_iter, cfg.clustering.tol));
        shared_model = std::make_shared<const ClusterModel>(clustered->model());
        reps[r].clustered = clustered;
      } else {
        reps[r].clustered = std::make_shared<const ClusteredEnvironment>(
            ClusteredEnvironment(env, *shared_model, cfg.clustering.mode));
      }
    }

    if (cfg.run.save_environments) {
      const std::filesystem::path dir = cfg.run.output_dir;
      std::filesystem::create_directories(dir);
      {
        std::ofstream out(dir / ("env_rep" + std::to_string(r) + ".txt"));
        save_environment(out, *env);
      }
      if (reps[r].clustered) {
        std::ofstream out(dir / ("clusters_rep" + std::to_string(r) + ".txt"));
        save_cluster_model(out, reps[r].clustered->model());
      }
    }
  }

  std::vector<RunKey> keys;
  for (int r = 0; r < cfg.run.n_env_repetitions; ++r)
    for (Algorithm algo : cfg.algorithms)
      for (TrainMode mode : cfg.run.modes)
        for (int s = 0; s < cfg.run.n_agent_seeds; ++s)
          keys.push_back({r, algo, mode, s});
  std::sort(keys.begin(), keys.end(), run_key_less);

  ExperimentResult result;
  result.config = cfg;
  result.runs.resize(keys.size());

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_threads =
      std::min<unsigned>(cfg.run.threads == 0 ? hw : static_cast<unsigned>(cfg.run.threads),
                         static_cast<unsigned>(keys.size()));
  if (n_threads <= 1) {
    for (size_t i = 0; i < keys.size(); ++i)
      result.runs[i] = execute_run(cfg, reps[keys[i].repetition], keys[i], hooks);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
      workers.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < keys.size(); i = next.fetch_add(1))
          result.runs[i] = execute_run(cfg, reps[keys[i].repetition], keys[i], hooks);
      });
    }
    for (std::thread& w : workers) w.join();
  }

  result.aggregates = aggregate_runs(result.runs);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunSeries>& runs) {
  // Shares the row-level path with replot, so the two can never diverge.
  return aggregate_raw_rows(to_raw_rows(runs));
}

}  // namespace persim
