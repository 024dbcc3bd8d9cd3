#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "beampower/env.hpp"
#include "beampower/policy.hpp"

namespace beampower {

struct PpoConfig {
  double gamma = 0.1;        // discount factor
  double lam = 0.8;          // GAE trace decay
  double clip_range = 0.2;
  double learning_rate = 0.03;
  int n_steps = 64;          // steps per environment per update
  int n_minibatches = 8;
  int n_epochs = 4;
  double max_grad_norm = 0.5;
  int n_envs = 8;
  long total_timesteps = 50000;  // counted per environment
  double alpha = 100.0;          // reward weight fed to the environments
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // updates between checkpoints; 0 = final only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-5;
  // Exploration guard rails: with the large paper learning rate, an
  // unconstrained log_std either collapses (no exploration) or, with an
  // entropy bonus, diverges. Projected back into this range after each step.
  double log_std_min = -3.0;
  double log_std_max = 1.0;
  // Initial exploration scale. Unit noise spans half the normalized action
  // range and drowns the quadratic power penalty in sampling noise; a
  // moderate initial sigma leaves the credit signal visible.
  double log_std_init = -1.2;
  // Once the mean minibatch KL against the collection policy passes this
  // bound, the remaining minibatches of the update train the value function
  // only. Keeps each update inside a trust region that the clipped
  // surrogate alone cannot enforce at this step size.
  double kl_target = 0.03;

  int batch_size() const { return n_envs * n_steps; }
  int n_updates() const { return static_cast<int>(total_timesteps / n_steps); }
  void validate() const;  // throws std::invalid_argument
};

// Rollout storage, env-major: flat index (env * n_steps + step).
struct Trajectory {
  int n_envs = 0;
  int n_steps = 0;
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<double> obs;        // [n_envs*n_steps, obs_dim]
  std::vector<double> actions;    // normalized action space
  std::vector<double> log_probs;  // at collection time
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<uint8_t> dones;
  std::vector<double> bootstrap_values;  // [n_envs], V(s) after the last step

  int flat(int env, int step) const { return env * n_steps + step; }
  std::span<const double> obs_row(int i) const {
    return {obs.data() + static_cast<std::size_t>(i) * obs_dim,
            static_cast<std::size_t>(obs_dim)};
  }
  std::span<const double> action_row(int i) const {
    return {actions.data() + static_cast<std::size_t>(i) * act_dim,
            static_cast<std::size_t>(act_dim)};
  }
};

// Saturating affine map from the policy's normalized action space [-1, 1]
// onto [keepalive, p_max] per beam. The formal [0, p_max] + total-budget
// constraints are still enforced by clip_action afterwards.
std::vector<double> action_to_watts(std::span<const double> u,
                                    const SatelliteConfig& config);

// Advances every environment n_steps, sampling stochastic actions. Each
// environment owns its RNG stream, so results do not depend on scheduling.
Trajectory collect_rollout(const PolicyParams& policy,
                           std::vector<Environment>& envs, int n_steps,
                           std::vector<std::mt19937_64>& rngs,
                           bool parallel = true);

struct GaeResult {
  std::vector<double> advantages;  // raw, not normalized
  std::vector<double> returns;     // advantages + values
};
GaeResult compute_gae(const Trajectory& traj, double gamma, double lam);

// In-place batch normalization to mean 0 / std 1 (eps 1e-8).
void normalize_advantages(std::span<double> advantages);

// Scales gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
double clip_gradients(PolicyParams& grads, double max_norm);

struct AdamState {
  PolicyParams m;
  PolicyParams v;
  long t = 0;
  static AdamState init(const PolicyParams& params);
};
void adam_step(PolicyParams& params, const PolicyParams& grads, AdamState& state,
               const PpoConfig& cfg);

struct LossTerms {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Clipped-surrogate PPO loss over the given sample indices, with gradients
// accumulated into `grads`. This is the exact function the update optimizes;
// tests difference it against finite differences. `policy_grads = false`
// suppresses the policy-side gradients (KL gate) while the loss value and
// value-function gradients are still produced.
LossTerms ppo_minibatch_loss(const PolicyParams& params, const Trajectory& traj,
                             std::span<const double> advantages,
                             std::span<const double> returns,
                             std::span<const int> indices, const PpoConfig& cfg,
                             PolicyParams* grads, bool policy_grads = true);

struct UpdateDiagnostics {
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // pre-clip, last minibatch
};

// One PPO update (n_epochs x n_minibatches) over the trajectory. Throws
// std::runtime_error on a non-finite loss, leaving diagnostics in the message.
UpdateDiagnostics ppo_update(PolicyParams& params, AdamState& adam,
                             const Trajectory& traj, const GaeResult& gae,
                             const PpoConfig& cfg, std::mt19937_64& shuffle_rng);

struct TrainResult {
  PolicyParams params;
  std::vector<UpdateDiagnostics> curve;  // one entry per update
};

// Full training loop: rollout -> GAE -> update until total_timesteps.
// When run_dir is non-empty, writes config.txt, rewards.csv and checkpoints.
TrainResult train(const SatelliteConfig& config, const DemandSeries& demand,
                  int episode_begin, int episode_end, const PpoConfig& cfg,
                  const std::string& run_dir = "");

void write_ppo_config(const PpoConfig& cfg, const std::string& path);

}  // namespace beampower
