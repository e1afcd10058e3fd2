#pragma once

#include <memory>
#include <span>
#include <vector>

#include "persim/common.hpp"
#include "persim/mlp.hpp"
#include "persim/rng.hpp"

namespace persim {

// Synthetic personalization environment: a continuous state box [-1,1]^d_S, a
// fixed finite action set in [-1,1]^d_A, and a deterministic reward given by
// the cosine similarity of latent state/action features produced by two
// randomly initialized extractor networks.
struct EnvConfig {
  int state_dim = 0;
  int action_dim = 0;
  int n_actions = 0;
  int latent_dim = 0;
  // Extractor hidden stack; the last width must equal latent_dim.
  std::vector<int> extractor_widths;
  // Hidden extractor layers use the gaussian activation; the output layer is
  // linear by default so latent coordinates carry both signs. Setting
  // gaussian_output reproduces the all-gaussian variant (all-positive
  // latents, hence all-positive rewards) for sensitivity studies.
  bool gaussian_output = false;
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument naming the field
};

class Environment {
 public:
  // Samples the action matrix and initializes both extractors from streams
  // derived from cfg.seed with labels "actions", "fs", "fa" (in that order;
  // the draw order inside each network is frozen in mlp_init).
  static Environment build(const EnvConfig& cfg);

  // Assembly from explicit parts; used by fixtures and by deserialization.
  // Extractor shapes must match the config. The action-feature cache is
  // populated here, after which the environment is immutable.
  static Environment from_parts(EnvConfig cfg, Matrix actions, Mlp state_extractor,
                                Mlp action_extractor);

  const EnvConfig& config() const { return cfg_; }
  const Matrix& actions() const { return actions_; }
  const Mlp& state_extractor() const { return fs_; }
  const Mlp& action_extractor() const { return fa_; }

  // One state draw, coordinates i.i.d. uniform on [-1,1], in coordinate order.
  Vec sample_state(RngStream& rng) const;

  // tanh of the extractor output; every coordinate lies in (-1,1).
  Vec extract_state_features(std::span<const real> state) const;
  Vec extract_action_features(int action) const;  // recomputed; see cache below

  // Cached latent features of action j (actions are fixed, so these are
  // computed once at construction).
  std::span<const real> action_features(int action) const;

  // Cosine similarity of the two latent vectors, in [-1,1]. Throws if either
  // latent vector has near-zero norm; a silent NaN must never reach training.
  real reward(std::span<const real> state, int action) const;

  // All action rewards for one state; component j equals reward(state, j).
  Vec reward_vector(std::span<const real> state) const;

 private:
  Environment() = default;

  EnvConfig cfg_;
  Matrix actions_;         // n_actions x action_dim, entries in [-1,1]
  Mlp fs_;                 // state extractor
  Mlp fa_;                 // action extractor
  Matrix action_features_; // n_actions x latent_dim, filled at construction
};

// The intrinsic reward: cosine similarity in the l2 norm, clamped into
// [-1,1] against round-off overshoot. Throws when either norm is below
// `min_norm`. Exposed separately so the latent-geometry properties (scale
// invariance, the +/-1 identities) can be tested directly.
real cosine_similarity(std::span<const real> a, std::span<const real> b,
                       real min_norm = real(1e-12));

}  // namespace persim
