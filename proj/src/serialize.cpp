#include "persim/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace persim {

namespace {

void expect_token(std::istream& in, const std::string& expected, const char* context) {
  std::string token;
  if (!(in >> token) || token != expected)
    throw std::runtime_error(std::string(context) + ": expected '" + expected + "', got '" +
                             token + "'");
}

long read_long(std::istream& in, const char* context) {
  long v;
  if (!(in >> v)) throw std::runtime_error(std::string(context) + ": malformed integer");
  return v;
}

std::string read_word(std::istream& in, const char* context) {
  std::string v;
  if (!(in >> v)) throw std::runtime_error(std::string(context) + ": unexpected end of input");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

void write_real_token(std::ostream& out, real v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", static_cast<double>(v));
  out << buf;
}

real read_real_token(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("real token: unexpected end of input");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw std::runtime_error("real token: cannot parse '" + token + "'");
  return static_cast<real>(v);
}

namespace {

void write_real_block(std::ostream& out, std::span<const real> values, int per_line) {
  for (size_t i = 0; i < values.size(); ++i) {
    write_real_token(out, values[i]);
    out << (((i + 1) % per_line == 0 || i + 1 == values.size()) ? '\n' : ' ');
  }
}

void read_real_block(std::istream& in, std::span<real> values) {
  for (real& v : values) v = read_real_token(in);
}

}  // namespace

void write_mlp(std::ostream& out, const Mlp& net) {
  out << "mlp layers " << net.layers.size() << '\n';
  for (const Layer& layer : net.layers) {
    out << "layer " << layer.in_dim() << ' ' << layer.out_dim() << ' '
        << activation_name(layer.activation) << '\n';
    write_real_block(out, layer.weights.data, layer.in_dim());
    write_real_block(out, layer.bias, 16);
  }
}

Mlp read_mlp(std::istream& in) {
  expect_token(in, "mlp", "mlp block");
  expect_token(in, "layers", "mlp block");
  const long n_layers = read_long(in, "mlp block");
  if (n_layers <= 0) throw std::runtime_error("mlp block: layer count must be positive");
  Mlp net;
  net.layers.resize(n_layers);
  for (Layer& layer : net.layers) {
    expect_token(in, "layer", "mlp layer");
    const long in_dim = read_long(in, "mlp layer");
    const long out_dim = read_long(in, "mlp layer");
    if (in_dim <= 0 || out_dim <= 0) throw std::runtime_error("mlp layer: bad dimensions");
    layer.activation = activation_from_name(read_word(in, "mlp layer"));
    layer.weights = Matrix(static_cast<int>(out_dim), static_cast<int>(in_dim));
    layer.bias.assign(out_dim, 0);
    read_real_block(in, layer.weights.data);
    read_real_block(in, layer.bias);
  }
  for (size_t l = 1; l < net.layers.size(); ++l)
    if (net.layers[l].in_dim() != net.layers[l - 1].out_dim())
      throw std::runtime_error("mlp block: layer dimensions do not chain");
  return net;
}

void write_adam(std::ostream& out, const AdamState& state) {
  out << "adam " << state.step_count << ' ';
  write_real_token(out, state.config.step_size);
  out << ' ';
  write_real_token(out, state.config.beta1);
  out << ' ';
  write_real_token(out, state.config.beta2);
  out << ' ';
  write_real_token(out, state.config.epsilon);
  out << '\n';
  for (const LayerGradient& l : state.first_moment.layers) {
    write_real_block(out, l.weights.data, l.weights.cols);
    write_real_block(out, l.bias, 16);
  }
  for (const LayerGradient& l : state.second_moment.layers) {
    write_real_block(out, l.weights.data, l.weights.cols);
    write_real_block(out, l.bias, 16);
  }
}

AdamState read_adam(std::istream& in, const Mlp& params) {
  expect_token(in, "adam", "adam block");
  AdamState state;
  state.step_count = read_long(in, "adam block");
  state.config.step_size = read_real_token(in);
  state.config.beta1 = read_real_token(in);
  state.config.beta2 = read_real_token(in);
  state.config.epsilon = read_real_token(in);
  state.first_moment = make_gradients(params);
  state.second_moment = make_gradients(params);
  for (LayerGradient& l : state.first_moment.layers) {
    read_real_block(in, l.weights.data);
    read_real_block(in, l.bias);
  }
  for (LayerGradient& l : state.second_moment.layers) {
    read_real_block(in, l.weights.data);
    read_real_block(in, l.bias);
  }
  return state;
}

void save_environment(std::ostream& out, const Environment& env) {
  const EnvConfig& cfg = env.config();
  out << "persim-env/v1\n";
  out << "state_dim " << cfg.state_dim << '\n';
  out << "action_dim " << cfg.action_dim << '\n';
  out << "n_actions " << cfg.n_actions << '\n';
  out << "latent_dim " << cfg.latent_dim << '\n';
  out << "extractor_widths";
  for (int w : cfg.extractor_widths) out << ' ' << w;
  out << '\n';
  out << "gaussian_output " << (cfg.gaussian_output ? 1 : 0) << '\n';
  out << "seed " << cfg.seed << '\n';
  out << "actions " << env.actions().rows << ' ' << env.actions().cols << '\n';
  write_real_block(out, env.actions().data, env.actions().cols);
  write_mlp(out, env.state_extractor());
  write_mlp(out, env.action_extractor());
  out << "end\n";
}

Environment load_environment(std::istream& in) {
  expect_token(in, "persim-env/v1", "environment dump");
  EnvConfig cfg;
  expect_token(in, "state_dim", "environment dump");
  cfg.state_dim = static_cast<int>(read_long(in, "state_dim"));
  expect_token(in, "action_dim", "environment dump");
  cfg.action_dim = static_cast<int>(read_long(in, "action_dim"));
  expect_token(in, "n_actions", "environment dump");
  cfg.n_actions = static_cast<int>(read_long(in, "n_actions"));
  expect_token(in, "latent_dim", "environment dump");
  cfg.latent_dim = static_cast<int>(read_long(in, "latent_dim"));
  expect_token(in, "extractor_widths", "environment dump");
  // widths run until the gaussian_output key
  std::string token;
  while (in >> token && token != "gaussian_output") cfg.extractor_widths.push_back(std::stoi(token));
  if (token != "gaussian_output") throw std::runtime_error("environment dump: truncated widths");
  cfg.gaussian_output = read_long(in, "gaussian_output") != 0;
  expect_token(in, "seed", "environment dump");
  unsigned long long seed;
  if (!(in >> seed)) throw std::runtime_error("environment dump: malformed seed");
  cfg.seed = seed;
  expect_token(in, "actions", "environment dump");
  const long rows = read_long(in, "actions");
  const long cols = read_long(in, "actions");
  if (rows != cfg.n_actions || cols != cfg.action_dim)
    throw std::runtime_error("environment dump: action matrix shape mismatch");
  Matrix actions(static_cast<int>(rows), static_cast<int>(cols));
  read_real_block(in, actions.data);
  Mlp fs = read_mlp(in);
  Mlp fa = read_mlp(in);
  expect_token(in, "end", "environment dump");
  return Environment::from_parts(std::move(cfg), std::move(actions), std::move(fs), std::move(fa));
}

void save_environment_file(const std::filesystem::path& path, const Environment& env) {
  auto out = open_out(path);
  save_environment(out, env);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Environment load_environment_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return load_environment(in);
}

void save_cluster_model(std::ostream& out, const ClusterModel& model) {
  out << "persim-clusters/v1\n";
  out << "k " << model.k() << '\n';
  out << "dim " << model.dim() << '\n';
  out << "iterations " << model.iterations << '\n';
  out << "n_samples " << model.n_samples << '\n';
  out << "inertia ";
  write_real_token(out, model.inertia);
  out << '\n';
  write_real_block(out, model.centroids.data, model.dim());
  out << "end\n";
}

ClusterModel load_cluster_model(std::istream& in) {
  expect_token(in, "persim-clusters/v1", "cluster dump");
  ClusterModel model;
  expect_token(in, "k", "cluster dump");
  const long k = read_long(in, "cluster dump");
  expect_token(in, "dim", "cluster dump");
  const long dim = read_long(in, "cluster dump");
  expect_token(in, "iterations", "cluster dump");
  model.iterations = static_cast<int>(read_long(in, "cluster dump"));
  expect_token(in, "n_samples", "cluster dump");
  model.n_samples = read_long(in, "cluster dump");
  expect_token(in, "inertia", "cluster dump");
  model.inertia = read_real_token(in);
  if (k <= 0 || dim <= 0) throw std::runtime_error("cluster dump: bad shape");
  model.centroids = Matrix(static_cast<int>(k), static_cast<int>(dim));
  read_real_block(in, model.centroids.data);
  expect_token(in, "end", "cluster dump");
  return model;
}

void save_agent(std::ostream& out, const Agent& agent) {
  const AgentConfig& cfg = agent.config();
  out << "persim-agent/v1\n";
  out << "algorithm " << algorithm_name(cfg.algorithm) << '\n';
  out << "observation_dim " << cfg.observation_dim << '\n';
  out << "n_actions " << cfg.n_actions << '\n';
  out << "seed " << cfg.seed << '\n';
  out << "pi_architecture";
  for (int w : cfg.pi_architecture) out << ' ' << w;
  out << '\n';
  out << "hyper";
  auto emit = [&out](real v) {
    out << ' ';
    write_real_token(out, v);
  };
  switch (cfg.algorithm) {
    case Algorithm::Dqn:
      emit(cfg.dqn.learning_rate);
      out << ' ' << cfg.dqn.replay_capacity << ' ' << cfg.dqn.batch_size << ' '
          << cfg.dqn.warmup_steps << ' ' << cfg.dqn.train_every;
      emit(cfg.dqn.epsilon_start);
      emit(cfg.dqn.epsilon_final);
      out << ' ' << cfg.dqn.epsilon_decay_steps;
      break;
    case Algorithm::A2c:
      emit(cfg.a2c.learning_rate);
      out << ' ' << cfg.a2c.rollout_steps;
      emit(cfg.a2c.value_coef);
      emit(cfg.a2c.entropy_coef);
      emit(cfg.a2c.max_grad_norm);
      break;
    case Algorithm::Ppo:
      emit(cfg.ppo.learning_rate);
      out << ' ' << cfg.ppo.rollout_steps << ' ' << cfg.ppo.minibatch_size << ' '
          << cfg.ppo.n_epochs;
      emit(cfg.ppo.clip_range);
      emit(cfg.ppo.value_coef);
      emit(cfg.ppo.entropy_coef);
      emit(cfg.ppo.max_grad_norm);
      break;
    case Algorithm::Uniform: break;
  }
  out << '\n';
  agent.save_state(out);
  out << "end\n";
}

std::unique_ptr<Agent> load_agent(std::istream& in) {
  expect_token(in, "persim-agent/v1", "agent checkpoint");
  AgentConfig cfg;
  expect_token(in, "algorithm", "agent checkpoint");
  cfg.algorithm = algorithm_from_name(read_word(in, "agent checkpoint"));
  expect_token(in, "observation_dim", "agent checkpoint");
  cfg.observation_dim = static_cast<int>(read_long(in, "agent checkpoint"));
  expect_token(in, "n_actions", "agent checkpoint");
  cfg.n_actions = static_cast<int>(read_long(in, "agent checkpoint"));
  expect_token(in, "seed", "agent checkpoint");
  unsigned long long seed;
  if (!(in >> seed)) throw std::runtime_error("agent checkpoint: malformed seed");
  cfg.seed = seed;
  expect_token(in, "pi_architecture", "agent checkpoint");
  std::string token;
  while (in >> token && token != "hyper") cfg.pi_architecture.push_back(std::stoi(token));
  if (token != "hyper") throw std::runtime_error("agent checkpoint: truncated architecture");
  switch (cfg.algorithm) {
    case Algorithm::Dqn:
      cfg.dqn.learning_rate = read_real_token(in);
      cfg.dqn.replay_capacity = static_cast<int>(read_long(in, "dqn hyper"));
      cfg.dqn.batch_size = static_cast<int>(read_long(in, "dqn hyper"));
      cfg.dqn.warmup_steps = static_cast<int>(read_long(in, "dqn hyper"));
      cfg.dqn.train_every = static_cast<int>(read_long(in, "dqn hyper"));
      cfg.dqn.epsilon_start = read_real_token(in);
      cfg.dqn.epsilon_final = read_real_token(in);
      cfg.dqn.epsilon_decay_steps = read_long(in, "dqn hyper");
      break;
    case Algorithm::A2c:
      cfg.a2c.learning_rate = read_real_token(in);
      cfg.a2c.rollout_steps = static_cast<int>(read_long(in, "a2c hyper"));
      cfg.a2c.value_coef = read_real_token(in);
      cfg.a2c.entropy_coef = read_real_token(in);
      cfg.a2c.max_grad_norm = read_real_token(in);
      break;
    case Algorithm::Ppo:
      cfg.ppo.learning_rate = read_real_token(in);
      cfg.ppo.rollout_steps = static_cast<int>(read_long(in, "ppo hyper"));
      cfg.ppo.minibatch_size = static_cast<int>(read_long(in, "ppo hyper"));
      cfg.ppo.n_epochs = static_cast<int>(read_long(in, "ppo hyper"));
      cfg.ppo.clip_range = read_real_token(in);
      cfg.ppo.value_coef = read_real_token(in);
      cfg.ppo.entropy_coef = read_real_token(in);
      cfg.ppo.max_grad_norm = read_real_token(in);
      break;
    case Algorithm::Uniform: break;
  }
  std::unique_ptr<Agent> agent = make_agent(cfg);
  agent->load_state(in);
  expect_token(in, "end", "agent checkpoint");
  return agent;
}

void save_agent_file(const std::filesystem::path& path, const Agent& agent) {
  auto out = open_out(path);
  save_agent(out, agent);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::unique_ptr<Agent> load_agent_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return load_agent(in);
}

}  // namespace persim
