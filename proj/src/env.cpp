#include "persim/env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace persim {

void EnvConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0)
      throw std::invalid_argument(std::string("EnvConfig.") + name + " must be positive, got " +
                                  std::to_string(v));
  };
  positive(state_dim, "state_dim");
  positive(action_dim, "action_dim");
  positive(n_actions, "n_actions");
  positive(latent_dim, "latent_dim");
  if (extractor_widths.empty())
    throw std::invalid_argument("EnvConfig.extractor_widths must not be empty");
  for (int w : extractor_widths) positive(w, "extractor_widths entry");
  if (extractor_widths.back() != latent_dim)
    throw std::invalid_argument("EnvConfig.extractor_widths must end in latent_dim (" +
                                std::to_string(latent_dim) + "), got " +
                                std::to_string(extractor_widths.back()));
}

namespace {

Mlp build_extractor(int input_dim, const EnvConfig& cfg, RngStream& rng) {
  std::vector<int> sizes;
  sizes.reserve(cfg.extractor_widths.size() + 1);
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), cfg.extractor_widths.begin(), cfg.extractor_widths.end());
  std::vector<Activation> acts(cfg.extractor_widths.size(), Activation::Gaussian);
  if (!cfg.gaussian_output) acts.back() = Activation::Linear;
  return mlp_init(sizes, acts, WeightInit::StandardNormal, rng);
}

}  // namespace

Environment Environment::build(const EnvConfig& cfg) {
  cfg.validate();

  RngStream action_rng = derive_stream(cfg.seed, "actions");
  Matrix actions(cfg.n_actions, cfg.action_dim);
  for (real& v : actions.data) v = static_cast<real>(action_rng.uniform(-1.0, 1.0));

  RngStream fs_rng = derive_stream(cfg.seed, "fs");
  RngStream fa_rng = derive_stream(cfg.seed, "fa");
  Mlp fs = build_extractor(cfg.state_dim, cfg, fs_rng);
  Mlp fa = build_extractor(cfg.action_dim, cfg, fa_rng);

  return from_parts(cfg, std::move(actions), std::move(fs), std::move(fa));
}

Environment Environment::from_parts(EnvConfig cfg, Matrix actions, Mlp state_extractor,
                                    Mlp action_extractor) {
  cfg.validate();
  if (actions.rows != cfg.n_actions || actions.cols != cfg.action_dim)
    throw std::invalid_argument("Environment: action matrix shape does not match config");
  if (state_extractor.input_dim() != cfg.state_dim ||
      state_extractor.output_dim() != cfg.latent_dim)
    throw std::invalid_argument("Environment: state extractor dims do not match config");
  if (action_extractor.input_dim() != cfg.action_dim ||
      action_extractor.output_dim() != cfg.latent_dim)
    throw std::invalid_argument("Environment: action extractor dims do not match config");

  Environment env;
  env.cfg_ = std::move(cfg);
  env.actions_ = std::move(actions);
  env.fs_ = std::move(state_extractor);
  env.fa_ = std::move(action_extractor);

  env.action_features_ = Matrix(env.cfg_.n_actions, env.cfg_.latent_dim);
  for (int j = 0; j < env.cfg_.n_actions; ++j) {
    const Vec feat = env.extract_action_features(j);
    std::copy(feat.begin(), feat.end(), env.action_features_.row(j).begin());
  }
  return env;
}

Vec Environment::sample_state(RngStream& rng) const {
  Vec s(cfg_.state_dim);
  for (real& v : s) v = static_cast<real>(rng.uniform(-1.0, 1.0));
  return s;
}

Vec Environment::extract_state_features(std::span<const real> state) const {
  if (static_cast<int>(state.size()) != cfg_.state_dim)
    throw std::invalid_argument("extract_state_features: state has dim " +
                                std::to_string(state.size()) + ", expected " +
                                std::to_string(cfg_.state_dim));
  Vec out = mlp_forward(fs_, state);
  for (real& v : out) v = std::tanh(v);
  return out;
}

Vec Environment::extract_action_features(int action) const {
  if (action < 0 || action >= cfg_.n_actions)
    throw std::out_of_range("extract_action_features: action index " + std::to_string(action) +
                            " out of range [0," + std::to_string(cfg_.n_actions) + ")");
  Vec out = mlp_forward(fa_, actions_.row(action));
  for (real& v : out) v = std::tanh(v);
  return out;
}

std::span<const real> Environment::action_features(int action) const {
  if (action < 0 || action >= cfg_.n_actions)
    throw std::out_of_range("action_features: action index " + std::to_string(action) +
                            " out of range [0," + std::to_string(cfg_.n_actions) + ")");
  return action_features_.row(action);
}

real cosine_similarity(std::span<const real> a, std::span<const real> b, real min_norm) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  const real aa = dot(a, a);
  const real bb = dot(b, b);
  // norm guard squared; sqrt(x*x) == |x| in IEEE arithmetic, so identical or
  // negated inputs come out as exactly +1 / -1.
  if (aa < min_norm * min_norm || bb < min_norm * min_norm)
    throw std::runtime_error("cosine_similarity: degenerate (near-zero-norm) feature vector");
  const real value = dot(a, b) / std::sqrt(aa * bb);
  if (value > 1) return 1;
  if (value < -1) return -1;
  return value;
}

real Environment::reward(std::span<const real> state, int action) const {
  const Vec state_feat = extract_state_features(state);
  return cosine_similarity(state_feat, action_features(action));
}

Vec Environment::reward_vector(std::span<const real> state) const {
  const Vec state_feat = extract_state_features(state);
  Vec rewards(cfg_.n_actions);
  for (int j = 0; j < cfg_.n_actions; ++j)
    rewards[j] = cosine_similarity(state_feat, action_features_.row(j));
  return rewards;
}

}  // namespace persim
