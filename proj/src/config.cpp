#include "persim/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace persim {

const char* mode_name(TrainMode m) { return m == TrainMode::Full ? "full" : "clustered"; }

TrainMode mode_from_name(std::string_view name) {
  if (name == "full") return TrainMode::Full;
  if (name == "clustered") return TrainMode::Clustered;
  throw std::invalid_argument("unknown training mode: " + std::string(name));
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : value) {
    if (c == ',') {
      parts.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(trim(current));
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  return parts;
}

// Typed accessors over the parsed key-value map; every failure names the key.
class KeyValues {
 public:
  void insert(const std::string& key, const std::string& value, int line) {
    static const std::set<std::string> known = {
        "env.state_dim", "env.action_dim", "env.n_actions", "env.latent_dim",
        "env.r_architecture", "env.gaussian_output",
        "agents.algorithms", "agents.pi_architecture",
        "agents.dqn.learning_rate", "agents.dqn.replay_capacity", "agents.dqn.batch_size",
        "agents.dqn.warmup_steps", "agents.dqn.train_every", "agents.dqn.epsilon_start",
        "agents.dqn.epsilon_final", "agents.dqn.epsilon_decay_steps",
        "agents.a2c.learning_rate", "agents.a2c.rollout_steps", "agents.a2c.value_coef",
        "agents.a2c.entropy_coef", "agents.a2c.max_grad_norm",
        "agents.ppo.learning_rate", "agents.ppo.rollout_steps", "agents.ppo.minibatch_size",
        "agents.ppo.n_epochs", "agents.ppo.clip_range", "agents.ppo.value_coef",
        "agents.ppo.entropy_coef", "agents.ppo.max_grad_norm",
        "clustering.enabled", "clustering.k", "clustering.n_fit_samples", "clustering.mode",
        "clustering.restarts", "clustering.max_iter", "clustering.tol",
        "clustering.refit_per_repetition",
        "evaluation.cadence", "evaluation.eval_set_size",
        "diagnostics.adjacent_states", "diagnostics.adjacent_actions",
        "diagnostics.adjacent_sigma", "diagnostics.correlation_samples",
        "diagnostics.correlation_k", "diagnostics.correlation_restarts",
        "run.name", "run.budget", "run.n_agent_seeds", "run.n_env_repetitions",
        "run.master_seed", "run.output_dir", "run.threads", "run.modes",
        "run.save_environments",
    };
    if (!known.count(key)) throw ConfigError(key, "unknown key");
    if (values_.count(key))
      throw ConfigError(key, "duplicate key (second occurrence on line " + std::to_string(line) + ")");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "required key is missing");
    return it->second;
  }

  long get_long(const std::string& key) {
    const std::string v = get_string(key);
    try {
      size_t pos = 0;
      const long parsed = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
  }

  uint64_t get_u64(const std::string& key) {
    const std::string v = get_string(key);
    try {
      size_t pos = 0;
      const unsigned long long parsed = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    }
  }

  double get_real(const std::string& key) {
    const std::string v = get_string(key);
    try {
      size_t pos = 0;
      const double parsed = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a number, got '" + v + "'");
    }
  }

  bool get_bool(const std::string& key) {
    const std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key, "expected true/false, got '" + v + "'");
  }

  std::vector<int> get_int_list(const std::string& key) {
    std::vector<int> out;
    for (const std::string& part : split_list(get_string(key))) {
      try {
        size_t pos = 0;
        out.push_back(std::stoi(part, &pos));
        if (pos != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ConfigError(key, "expected a comma-separated integer list, got '" + part + "'");
      }
    }
    if (out.empty()) throw ConfigError(key, "list must not be empty");
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& key) {
    auto parts = split_list(get_string(key));
    if (parts.empty()) throw ConfigError(key, "list must not be empty");
    return parts;
  }

  // Optional variants keep the documented defaults when the key is absent.
  template <typename T, typename Getter>
  T get_or(const std::string& key, T fallback, Getter getter) {
    if (!has(key)) return fallback;
    return (this->*getter)(key);
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  KeyValues kv;
  std::string section;
  bool schema_seen = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        throw ConfigError("line " + std::to_string(line_no), "malformed section header: " + stripped);
      section = trim(stripped.substr(1, stripped.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no), "empty section name");
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value', got: " + stripped);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
    if (!schema_seen) {
      if (key != "schema" || !section.empty())
        throw ConfigError("schema", "first entry must be 'schema = " + std::string(kConfigSchema) + "'");
      if (value != kConfigSchema)
        throw ConfigError("schema", "unsupported schema '" + value + "', expected " + kConfigSchema);
      schema_seen = true;
      continue;
    }
    kv.insert(section.empty() ? key : section + "." + key, value, line_no);
  }
  if (!schema_seen) throw ConfigError("schema", "missing schema line");

  ExperimentConfig cfg;
  cfg.raw_text = text;

  cfg.env.state_dim = static_cast<int>(kv.get_long("env.state_dim"));
  cfg.env.action_dim = static_cast<int>(kv.get_long("env.action_dim"));
  cfg.env.n_actions = static_cast<int>(kv.get_long("env.n_actions"));
  cfg.env.latent_dim = static_cast<int>(kv.get_long("env.latent_dim"));
  cfg.env.extractor_widths = kv.get_int_list("env.r_architecture");
  cfg.env.gaussian_output =
      kv.get_or("env.gaussian_output", false, &KeyValues::get_bool);

  for (const std::string& name : kv.get_string_list("agents.algorithms")) {
    try {
      cfg.algorithms.push_back(algorithm_from_name(name));
    } catch (const std::invalid_argument&) {
      throw ConfigError("agents.algorithms", "unknown algorithm '" + name + "'");
    }
  }
  cfg.pi_architecture = kv.get_int_list("agents.pi_architecture");

  auto real_or = [&kv](const std::string& key, real fallback) {
    return kv.has(key) ? static_cast<real>(kv.get_real(key)) : fallback;
  };
  auto int_or = [&kv](const std::string& key, int fallback) {
    return kv.has(key) ? static_cast<int>(kv.get_long(key)) : fallback;
  };
  auto long_or = [&kv](const std::string& key, long fallback) {
    return kv.has(key) ? kv.get_long(key) : fallback;
  };
  auto bool_or = [&kv](const std::string& key, bool fallback) {
    return kv.has(key) ? kv.get_bool(key) : fallback;
  };

  cfg.dqn.learning_rate = real_or("agents.dqn.learning_rate", cfg.dqn.learning_rate);
  cfg.dqn.replay_capacity = int_or("agents.dqn.replay_capacity", cfg.dqn.replay_capacity);
  cfg.dqn.batch_size = int_or("agents.dqn.batch_size", cfg.dqn.batch_size);
  cfg.dqn.warmup_steps = int_or("agents.dqn.warmup_steps", cfg.dqn.warmup_steps);
  cfg.dqn.train_every = int_or("agents.dqn.train_every", cfg.dqn.train_every);
  cfg.dqn.epsilon_start = real_or("agents.dqn.epsilon_start", cfg.dqn.epsilon_start);
  cfg.dqn.epsilon_final = real_or("agents.dqn.epsilon_final", cfg.dqn.epsilon_final);
  cfg.dqn.epsilon_decay_steps = long_or("agents.dqn.epsilon_decay_steps", 0);  // 0 = budget/10

  cfg.a2c.learning_rate = real_or("agents.a2c.learning_rate", cfg.a2c.learning_rate);
  cfg.a2c.rollout_steps = int_or("agents.a2c.rollout_steps", cfg.a2c.rollout_steps);
  cfg.a2c.value_coef = real_or("agents.a2c.value_coef", cfg.a2c.value_coef);
  cfg.a2c.entropy_coef = real_or("agents.a2c.entropy_coef", cfg.a2c.entropy_coef);
  cfg.a2c.max_grad_norm = real_or("agents.a2c.max_grad_norm", cfg.a2c.max_grad_norm);

  cfg.ppo.learning_rate = real_or("agents.ppo.learning_rate", cfg.ppo.learning_rate);
  cfg.ppo.rollout_steps = int_or("agents.ppo.rollout_steps", cfg.ppo.rollout_steps);
  cfg.ppo.minibatch_size = int_or("agents.ppo.minibatch_size", cfg.ppo.minibatch_size);
  cfg.ppo.n_epochs = int_or("agents.ppo.n_epochs", cfg.ppo.n_epochs);
  cfg.ppo.clip_range = real_or("agents.ppo.clip_range", cfg.ppo.clip_range);
  cfg.ppo.value_coef = real_or("agents.ppo.value_coef", cfg.ppo.value_coef);
  cfg.ppo.entropy_coef = real_or("agents.ppo.entropy_coef", cfg.ppo.entropy_coef);
  cfg.ppo.max_grad_norm = real_or("agents.ppo.max_grad_norm", cfg.ppo.max_grad_norm);

  cfg.clustering.enabled = bool_or("clustering.enabled", cfg.clustering.enabled);
  cfg.clustering.k = int_or("clustering.k", cfg.clustering.k);
  cfg.clustering.n_fit_samples = long_or("clustering.n_fit_samples", cfg.clustering.n_fit_samples);
  if (kv.has("clustering.mode")) {
    const std::string mode = kv.get_string("clustering.mode");
    try {
      cfg.clustering.mode = observation_mode_from_name(mode);
    } catch (const std::invalid_argument&) {
      throw ConfigError("clustering.mode", "expected centroid or one-hot, got '" + mode + "'");
    }
  }
  cfg.clustering.restarts = int_or("clustering.restarts", cfg.clustering.restarts);
  cfg.clustering.max_iter = int_or("clustering.max_iter", cfg.clustering.max_iter);
  cfg.clustering.tol = real_or("clustering.tol", cfg.clustering.tol);
  cfg.clustering.refit_per_repetition =
      bool_or("clustering.refit_per_repetition", cfg.clustering.refit_per_repetition);

  cfg.evaluation.cadence = long_or("evaluation.cadence", cfg.evaluation.cadence);
  cfg.evaluation.eval_set_size = int_or("evaluation.eval_set_size", cfg.evaluation.eval_set_size);

  cfg.diagnostics.adjacent_states = int_or("diagnostics.adjacent_states", cfg.diagnostics.adjacent_states);
  cfg.diagnostics.adjacent_actions =
      int_or("diagnostics.adjacent_actions", cfg.diagnostics.adjacent_actions);
  cfg.diagnostics.adjacent_sigma = real_or("diagnostics.adjacent_sigma", cfg.diagnostics.adjacent_sigma);
  cfg.diagnostics.correlation_samples =
      long_or("diagnostics.correlation_samples", cfg.diagnostics.correlation_samples);
  cfg.diagnostics.correlation_k = int_or("diagnostics.correlation_k", cfg.diagnostics.correlation_k);
  cfg.diagnostics.correlation_restarts =
      int_or("diagnostics.correlation_restarts", cfg.diagnostics.correlation_restarts);

  cfg.name = kv.has("run.name") ? kv.get_string("run.name") : cfg.name;
  cfg.run.budget = kv.get_long("run.budget");
  cfg.run.n_agent_seeds = int_or("run.n_agent_seeds", cfg.run.n_agent_seeds);
  cfg.run.n_env_repetitions = int_or("run.n_env_repetitions", cfg.run.n_env_repetitions);
  cfg.run.master_seed = kv.has("run.master_seed") ? kv.get_u64("run.master_seed") : 0;
  cfg.run.output_dir = kv.has("run.output_dir") ? kv.get_string("run.output_dir") : cfg.run.output_dir;
  cfg.run.threads = int_or("run.threads", cfg.run.threads);
  if (kv.has("run.modes")) {
    cfg.run.modes.clear();
    for (const std::string& m : kv.get_string_list("run.modes")) {
      try {
        cfg.run.modes.push_back(mode_from_name(m));
      } catch (const std::invalid_argument&) {
        throw ConfigError("run.modes", "expected full/clustered, got '" + m + "'");
      }
    }
  }
  cfg.run.save_environments = bool_or("run.save_environments", cfg.run.save_environments);

  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  try {
    env.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("env", e.what());
  }
  if (algorithms.empty()) throw ConfigError("agents.algorithms", "at least one algorithm required");
  for (size_t i = 0; i < algorithms.size(); ++i)
    for (size_t j = i + 1; j < algorithms.size(); ++j)
      if (algorithms[i] == algorithms[j])
        throw ConfigError("agents.algorithms", "duplicate algorithm entry");
  if (pi_architecture.empty())
    throw ConfigError("agents.pi_architecture", "at least one hidden width required");
  for (int w : pi_architecture)
    if (w <= 0) throw ConfigError("agents.pi_architecture", "widths must be positive");
  if (run.budget <= 0) throw ConfigError("run.budget", "must be positive");
  if (run.n_agent_seeds < 1) throw ConfigError("run.n_agent_seeds", "must be >= 1");
  if (run.n_env_repetitions < 1) throw ConfigError("run.n_env_repetitions", "must be >= 1");
  if (run.threads < 0) throw ConfigError("run.threads", "must be >= 0");
  if (run.modes.empty()) throw ConfigError("run.modes", "at least one mode required");
  for (size_t i = 0; i < run.modes.size(); ++i)
    for (size_t j = i + 1; j < run.modes.size(); ++j)
      if (run.modes[i] == run.modes[j]) throw ConfigError("run.modes", "duplicate mode entry");
  if (evaluation.cadence <= 0) throw ConfigError("evaluation.cadence", "must be positive");
  if (evaluation.cadence > run.budget)
    throw ConfigError("evaluation.cadence", "exceeds run.budget; no evaluation would happen");
  if (evaluation.eval_set_size <= 0) throw ConfigError("evaluation.eval_set_size", "must be positive");
  const bool wants_clustered =
      std::find(run.modes.begin(), run.modes.end(), TrainMode::Clustered) != run.modes.end();
  if (wants_clustered && !clustering.enabled)
    throw ConfigError("clustering.enabled", "run.modes includes clustered but clustering is disabled");
  if (clustering.enabled) {
    if (clustering.k < 1) throw ConfigError("clustering.k", "must be >= 1");
    if (clustering.n_fit_samples < clustering.k)
      throw ConfigError("clustering.n_fit_samples", "must be >= clustering.k");
    if (clustering.restarts < 1) throw ConfigError("clustering.restarts", "must be >= 1");
    if (clustering.max_iter < 1) throw ConfigError("clustering.max_iter", "must be >= 1");
    if (!(clustering.tol >= 0)) throw ConfigError("clustering.tol", "must be >= 0");
  }
  if (diagnostics.adjacent_states < 1) throw ConfigError("diagnostics.adjacent_states", "must be >= 1");
  if (diagnostics.adjacent_actions < 0 || diagnostics.adjacent_actions > env.n_actions)
    throw ConfigError("diagnostics.adjacent_actions",
                      "must lie in [1, env.n_actions] (0 = min(10, env.n_actions))");
  if (!(diagnostics.adjacent_sigma >= 0)) throw ConfigError("diagnostics.adjacent_sigma", "must be >= 0");
  if (diagnostics.correlation_k < 1) throw ConfigError("diagnostics.correlation_k", "must be >= 1");
  if (diagnostics.correlation_samples < diagnostics.correlation_k)
    throw ConfigError("diagnostics.correlation_samples", "must be >= diagnostics.correlation_k");

  // Surface bad hyperparameters now, not mid-run: validate a probe AgentConfig
  // per algorithm.
  for (Algorithm algo : algorithms) {
    AgentConfig probe;
    probe.algorithm = algo;
    probe.pi_architecture = pi_architecture;
    probe.observation_dim = env.state_dim;
    probe.n_actions = env.n_actions;
    probe.dqn = dqn;
    probe.dqn.epsilon_decay_steps = dqn_epsilon_decay_steps();
    probe.a2c = a2c;
    probe.ppo = ppo;
    try {
      probe.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("agents.") + algorithm_name(algo), e.what());
    }
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

std::string text_hash(std::string_view text) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace persim
