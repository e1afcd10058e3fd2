#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "persim/agents.hpp"
#include "persim/clustering.hpp"
#include "persim/env.hpp"

namespace persim {

inline constexpr const char* kPersimVersion = "persim/0.1.0";
inline constexpr const char* kConfigSchema = "persim-config/v1";

// Raised on malformed or out-of-range configuration; `key` names the
// offending "section.key" so callers can report it mechanically.
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string key_, const std::string& message)
      : std::runtime_error(key_ + ": " + message), key(std::move(key_)) {}
};

enum class TrainMode { Full, Clustered };

const char* mode_name(TrainMode m);
TrainMode mode_from_name(std::string_view name);

struct ClusteringConfig {
  bool enabled = true;
  int k = 100;
  long n_fit_samples = 100000;
  ObservationMode mode = ObservationMode::Centroid;
  int restarts = 1;
  int max_iter = 100;
  real tol = real(1e-6);
  // When false, the model fit for repetition 0 is reused by every repetition
  // (the state distribution is the same; only the reward function changes).
  bool refit_per_repetition = true;
};

struct EvaluationConfig {
  long cadence = 1000;
  int eval_set_size = 512;
};

struct DiagnosticsConfig {
  int adjacent_states = 5;
  int adjacent_actions = 0;  // 0 = min(10, env.n_actions)
  real adjacent_sigma = real(0.01);
  long correlation_samples = 100000;
  int correlation_k = 100;
  int correlation_restarts = 1;
};

struct RunConfig {
  long budget = 100000;
  int n_agent_seeds = 3;
  int n_env_repetitions = 3;
  uint64_t master_seed = 0;
  std::string output_dir = "results";
  int threads = 1;  // 0 = hardware concurrency
  std::vector<TrainMode> modes = {TrainMode::Full, TrainMode::Clustered};
  bool save_environments = false;
};

// One experiment: environment family, agent roster, clustering and
// evaluation settings, and the run grid. Parsed from the flat key-value
// format documented in the README.
struct ExperimentConfig {
  std::string name = "experiment";
  EnvConfig env;  // env.seed is ignored; per-repetition seeds derive from run.master_seed
  std::vector<Algorithm> algorithms;
  std::vector<int> pi_architecture;
  // dqn.epsilon_decay_steps == 0 means "10% of run.budget".
  DqnParams dqn;
  A2cParams a2c;
  PpoParams ppo;
  ClusteringConfig clustering;
  EvaluationConfig evaluation;
  DiagnosticsConfig diagnostics;
  RunConfig run;
  std::string raw_text;  // verbatim config file contents (manifest + hashing)

  void validate() const;  // throws ConfigError
  long dqn_epsilon_decay_steps() const {
    return dqn.epsilon_decay_steps > 0 ? dqn.epsilon_decay_steps
                                       : std::max<long>(1, run.budget / 10);
  }
  int adjacent_actions_shown() const {
    return diagnostics.adjacent_actions > 0 ? diagnostics.adjacent_actions
                                            : std::min(10, env.n_actions);
  }
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// FNV-1a over a text blob, rendered as 16 hex digits (config provenance).
std::string text_hash(std::string_view text);

}  // namespace persim
