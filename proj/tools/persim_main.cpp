// persim command-line front end: run experiments, run reward-structure
// diagnostics, move environments and agent checkpoints around, and re-render
// result directories.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "persim/config.hpp"
#include "persim/experiment.hpp"
#include "persim/report.hpp"
#include "persim/serialize.hpp"

namespace {

using namespace persim;

ExperimentConfig load_config_or_die(const std::string& path, std::optional<uint64_t> seed_override,
                                    std::optional<std::string> out_override) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (seed_override) {
    cfg.run.master_seed = *seed_override;
    cfg.validate();
  }
  if (out_override) cfg.run.output_dir = *out_override;
  return cfg;
}

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            std::optional<std::string> out_dir, std::optional<int> threads, bool quiet) {
  ExperimentConfig cfg = load_config_or_die(config_path, seed, out_dir);
  if (threads) cfg.run.threads = *threads;
  if (!quiet)
    std::cout << "running '" << cfg.name << "': " << cfg.run.n_env_repetitions
              << " repetition(s) x " << cfg.algorithms.size() << " algorithm(s) x "
              << cfg.run.modes.size() << " mode(s) x " << cfg.run.n_agent_seeds
              << " seed(s), budget " << cfg.run.budget << std::endl;
  const ExperimentResult result = run_experiment(cfg);
  emit_results(result, cfg.run.output_dir);

  int aborted = 0;
  for (const RunSeries& run : result.runs) {
    if (!run.aborted) continue;
    ++aborted;
    std::cerr << "aborted run " << run_label(run.key) << ": " << run.error << '\n';
  }
  if (!quiet)
    std::cout << "wrote " << cfg.run.output_dir << " (" << result.runs.size() << " runs, "
              << aborted << " aborted, " << result.wall_seconds << " s)" << std::endl;
  return aborted == 0 ? 0 : 1;
}

int cmd_diagnose(const std::string& config_path, std::optional<uint64_t> seed,
                 std::optional<std::string> out_dir) {
  ExperimentConfig cfg = load_config_or_die(config_path, seed, out_dir);
  const std::filesystem::path dir = cfg.run.output_dir;
  std::filesystem::create_directories(dir);

  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = derive_seed(cfg.run.master_seed, "rep0/env");
  const Environment env = Environment::build(env_cfg);

  RngStream adjacent_rng = derive_stream(cfg.run.master_seed, "diag/adjacent");
  const Matrix table =
      adjacent_state_reward_table(env, cfg.diagnostics.adjacent_states,
                                  cfg.adjacent_actions_shown(),
                                  cfg.diagnostics.adjacent_sigma, &adjacent_rng);
  {
    std::ofstream out(dir / "adjacent_rewards.csv");
    write_adjacent_table_csv(out, table);
  }
  {
    std::ofstream out(dir / "adjacent_rewards.svg");
    out << render_adjacent_table_svg(table);
  }

  RngStream corr_rng = derive_stream(cfg.run.master_seed, "diag/correlation");
  const ClusterCorrelation corr =
      cluster_reward_correlation(env, cfg.diagnostics.correlation_samples,
                                 cfg.diagnostics.correlation_k, corr_rng,
                                 cfg.diagnostics.correlation_restarts);
  {
    std::ofstream out(dir / "cluster_correlation.csv");
    write_cluster_correlation_csv(out, corr);
  }
  {
    std::ofstream out(dir / "cluster_correlation.svg");
    out << render_cluster_correlation_svg(corr);
  }

  std::cout << "diagnostics written to " << dir.string() << " (" << corr.n_defined() << "/"
            << corr.entries.size() << " clusters defined";
  if (corr.n_defined() > 0) std::cout << ", mean rho " << corr.mean_defined();
  std::cout << ")" << std::endl;
  return 0;
}

int cmd_env_export(const std::string& config_path, const std::string& out_file,
                   std::optional<uint64_t> seed, int repetition) {
  ExperimentConfig cfg = load_config_or_die(config_path, seed, std::nullopt);
  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = derive_seed(cfg.run.master_seed, "rep" + std::to_string(repetition) + "/env");
  const Environment env = Environment::build(env_cfg);
  save_environment_file(out_file, env);
  std::cout << "environment written to " << out_file << std::endl;
  return 0;
}

int cmd_env_import(const std::string& file) {
  const Environment env = load_environment_file(file);
  const EnvConfig& c = env.config();
  // Round-trip check: re-serialize and compare byte for byte.
  std::ostringstream first;
  save_environment(first, env);
  std::istringstream again_in(first.str());
  const Environment reloaded = load_environment(again_in);
  std::ostringstream second;
  save_environment(second, reloaded);
  if (first.str() != second.str()) {
    std::cerr << "error: env-import: round-trip mismatch" << std::endl;
    return 1;
  }
  std::cout << "environment ok: state_dim=" << c.state_dim << " action_dim=" << c.action_dim
            << " n_actions=" << c.n_actions << " latent_dim=" << c.latent_dim << " seed=" << c.seed
            << " (round-trip verified)" << std::endl;
  return 0;
}

int cmd_agent_save(const std::string& config_path, const std::string& algorithm,
                   const std::string& out_file, std::optional<uint64_t> seed,
                   const std::string& mode_name_str) {
  ExperimentConfig cfg = load_config_or_die(config_path, seed, std::nullopt);
  const Algorithm algo = algorithm_from_name(algorithm);
  const TrainMode mode = mode_from_name(mode_name_str);
  int obs_dim = cfg.env.state_dim;
  if (mode == TrainMode::Clustered)
    obs_dim = cfg.clustering.mode == ObservationMode::Centroid ? cfg.env.state_dim
                                                               : cfg.clustering.k;
  AgentConfig acfg;
  acfg.algorithm = algo;
  acfg.pi_architecture = cfg.pi_architecture;
  acfg.observation_dim = obs_dim;
  acfg.n_actions = cfg.env.n_actions;
  acfg.seed = derive_seed(cfg.run.master_seed,
                          std::string("agent-save/") + algorithm_name(algo) + "/" +
                              mode_name(mode));
  acfg.dqn = cfg.dqn;
  acfg.dqn.epsilon_decay_steps = cfg.dqn_epsilon_decay_steps();
  acfg.a2c = cfg.a2c;
  acfg.ppo = cfg.ppo;
  const std::unique_ptr<Agent> agent = make_agent(acfg);
  save_agent_file(out_file, *agent);
  std::cout << "agent checkpoint written to " << out_file << std::endl;
  return 0;
}

int cmd_agent_load(const std::string& file) {
  const std::unique_ptr<Agent> agent = load_agent_file(file);
  const AgentConfig& c = agent->config();
  std::cout << "agent ok: algorithm=" << algorithm_name(c.algorithm)
            << " observation_dim=" << c.observation_dim << " n_actions=" << c.n_actions
            << " steps_observed=" << agent->steps_observed() << std::endl;
  return 0;
}

int cmd_replot(const std::string& result_dir) {
  replot(result_dir);
  std::cout << "regenerated agg.csv and curves.svg in " << result_dir << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"persim: synthetic personalization bandit benchmark"};
  app.require_subcommand(1);

  std::optional<uint64_t> seed;
  app.add_option("--seed", seed, "override run.master_seed from the config")->group("");

  // run
  auto* run = app.add_subcommand("run", "run an experiment config end to end");
  std::string run_config;
  std::optional<std::string> run_out;
  std::optional<int> run_threads;
  bool run_quiet = false;
  run->add_option("config", run_config, "experiment config file")->required();
  run->add_option("--seed", seed, "override run.master_seed");
  run->add_option("-o,--out", run_out, "override run.output_dir");
  run->add_option("--threads", run_threads, "override run.threads (0 = all cores)");
  run->add_flag("-q,--quiet", run_quiet, "suppress progress output");

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "reward-structure diagnostics only");
  std::string diag_config;
  std::optional<std::string> diag_out;
  diagnose->add_option("config", diag_config, "experiment config file")->required();
  diagnose->add_option("--seed", seed, "override run.master_seed");
  diagnose->add_option("-o,--out", diag_out, "override run.output_dir");

  // env export/import
  auto* env_cmd = app.add_subcommand("env", "environment dump utilities");
  env_cmd->require_subcommand(1);
  auto* env_export = env_cmd->add_subcommand("export", "build and dump an environment");
  std::string env_config, env_out = "environment.txt";
  int env_rep = 0;
  env_export->add_option("config", env_config, "experiment config file")->required();
  env_export->add_option("-o,--out", env_out, "output file");
  env_export->add_option("--repetition", env_rep, "repetition index the seed derives from");
  env_export->add_option("--seed", seed, "override run.master_seed");
  auto* env_import = env_cmd->add_subcommand("import", "load a dump and verify it round-trips");
  std::string env_in;
  env_import->add_option("file", env_in, "environment dump file")->required();

  // agent save/load
  auto* agent_cmd = app.add_subcommand("agent", "agent checkpoint utilities");
  agent_cmd->require_subcommand(1);
  auto* agent_save = agent_cmd->add_subcommand("save", "build a fresh agent and checkpoint it");
  std::string agent_config, agent_algo = "dqn", agent_out = "agent.txt", agent_mode = "full";
  agent_save->add_option("config", agent_config, "experiment config file")->required();
  agent_save->add_option("--algo", agent_algo, "dqn | a2c | ppo | uniform");
  agent_save->add_option("--mode", agent_mode, "full | clustered (sets observation dim)");
  agent_save->add_option("-o,--out", agent_out, "output file");
  agent_save->add_option("--seed", seed, "override run.master_seed");
  auto* agent_load = agent_cmd->add_subcommand("load", "load a checkpoint and print a summary");
  std::string agent_in;
  agent_load->add_option("file", agent_in, "agent checkpoint file")->required();

  // replot
  auto* replot_cmd = app.add_subcommand("replot", "regenerate agg.csv and curves.svg from raw.csv");
  std::string replot_dir;
  replot_cmd->add_option("result-dir", replot_dir, "result directory containing raw.csv")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, seed, run_out, run_threads, run_quiet);
    if (diagnose->parsed()) return cmd_diagnose(diag_config, seed, diag_out);
    if (env_cmd->parsed()) {
      if (env_export->parsed()) return cmd_env_export(env_config, env_out, seed, env_rep);
      return cmd_env_import(env_in);
    }
    if (agent_cmd->parsed()) {
      if (agent_save->parsed())
        return cmd_agent_save(agent_config, agent_algo, agent_out, seed, agent_mode);
      return cmd_agent_load(agent_in);
    }
    if (replot_cmd->parsed()) return cmd_replot(replot_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
