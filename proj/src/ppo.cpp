#include "beampower/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "beampower/util.hpp"

namespace beampower {

void PpoConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma outside [0,1]");
  if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("ppo: lambda outside [0,1]");
  if (!(clip_range > 0.0)) throw std::invalid_argument("ppo: clip_range must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ppo: learning_rate must be > 0");
  if (n_steps < 1 || n_envs < 1) throw std::invalid_argument("ppo: n_steps and n_envs must be >= 1");
  if (n_minibatches < 1 || batch_size() % n_minibatches != 0) {
    throw std::invalid_argument("ppo: batch size must split evenly into minibatches");
  }
  if (n_epochs < 1) throw std::invalid_argument("ppo: n_epochs must be >= 1");
  if (!(max_grad_norm > 0.0)) throw std::invalid_argument("ppo: max_grad_norm must be > 0");
  if (total_timesteps < n_steps) throw std::invalid_argument("ppo: total_timesteps < n_steps");
  if (!(alpha > 0.0)) throw std::invalid_argument("ppo: alpha must be > 0");
  if (value_coef < 0.0 || entropy_coef < 0.0) {
    throw std::invalid_argument("ppo: loss coefficients must be >= 0");
  }
}

std::vector<double> action_to_watts(std::span<const double> u,
                                    const SatelliteConfig& config) {
  std::vector<double> watts(u.size());
  for (std::size_t b = 0; b < u.size(); ++b) {
    // Saturating affine map onto [keepalive, p_max]: powers below the
    // keep-alive floor are never optimal (links would drop), and leaving
    // them reachable turns "everything off" into a local optimum that
    // traps the policy under exploration noise.
    double f = std::clamp(0.5 * (u[b] + 1.0), 0.0, 1.0);
    watts[b] = config.keepalive_w[b] +
               f * (config.p_max_w[b] - config.keepalive_w[b]);
  }
  return watts;
}

namespace {

void rollout_one_env(const PolicyParams& policy, Environment& env, int n_steps,
                     std::mt19937_64& rng, int env_index, Trajectory& traj) {
  const int obs_dim = traj.obs_dim;
  const int act_dim = traj.act_dim;
  for (int s = 0; s < n_steps; ++s) {
    const int i = traj.flat(env_index, s);
    auto obs = env.observation();
    std::copy(obs.begin(), obs.end(),
              traj.obs.begin() + static_cast<std::size_t>(i) * obs_dim);

    auto out = forward(policy, obs);
    auto u = out.dist.sample(rng);
    std::copy(u.begin(), u.end(),
              traj.actions.begin() + static_cast<std::size_t>(i) * act_dim);
    traj.log_probs[i] = out.dist.log_prob(u);
    traj.values[i] = out.value;

    auto action = clip_action(action_to_watts(u, env.config()), env.config());
    auto step = env.step(action);
    traj.rewards[i] = step.reward;
    traj.dones[i] = step.done ? 1 : 0;
  }
  traj.bootstrap_values[env_index] = forward(policy, env.observation()).value;
}

}  // namespace

Trajectory collect_rollout(const PolicyParams& policy,
                           std::vector<Environment>& envs, int n_steps,
                           std::vector<std::mt19937_64>& rngs, bool parallel) {
  if (envs.empty() || rngs.size() != envs.size()) {
    throw std::invalid_argument("collect_rollout: env/rng count mismatch");
  }
  const int n_envs = static_cast<int>(envs.size());
  Trajectory traj;
  traj.n_envs = n_envs;
  traj.n_steps = n_steps;
  traj.obs_dim = policy.input_dim;
  traj.act_dim = policy.n_beams;
  const std::size_t n = static_cast<std::size_t>(n_envs) * n_steps;
  traj.obs.resize(n * traj.obs_dim);
  traj.actions.resize(n * traj.act_dim);
  traj.log_probs.resize(n);
  traj.rewards.resize(n);
  traj.values.resize(n);
  traj.dones.resize(n);
  traj.bootstrap_values.resize(n_envs);

  if (parallel && n_envs > 1) {
    std::vector<std::thread> workers;
    workers.reserve(n_envs);
    for (int e = 0; e < n_envs; ++e) {
      workers.emplace_back(rollout_one_env, std::cref(policy), std::ref(envs[e]),
                           n_steps, std::ref(rngs[e]), e, std::ref(traj));
    }
    for (auto& w : workers) w.join();
  } else {
    for (int e = 0; e < n_envs; ++e) {
      rollout_one_env(policy, envs[e], n_steps, rngs[e], e, traj);
    }
  }
  return traj;
}

GaeResult compute_gae(const Trajectory& traj, double gamma, double lam) {
  const std::size_t n = traj.rewards.size();
  GaeResult result;
  result.advantages.assign(n, 0.0);
  result.returns.assign(n, 0.0);
  for (int e = 0; e < traj.n_envs; ++e) {
    double last_gae = 0.0;
    for (int s = traj.n_steps - 1; s >= 0; --s) {
      const int i = traj.flat(e, s);
      double not_done = traj.dones[i] ? 0.0 : 1.0;
      double next_value = s + 1 < traj.n_steps ? traj.values[traj.flat(e, s + 1)]
                                               : traj.bootstrap_values[e];
      double delta = traj.rewards[i] + gamma * next_value * not_done - traj.values[i];
      last_gae = delta + gamma * lam * not_done * last_gae;
      result.advantages[i] = last_gae;
      result.returns[i] = last_gae + traj.values[i];
    }
  }
  return result;
}

void normalize_advantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(advantages.size());
  double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : advantages) a = (a - mean) * inv;
}

double clip_gradients(PolicyParams& grads, double max_norm) {
  double norm = global_norm(grads);
  if (norm > max_norm) {
    double scale = max_norm / norm;
    grads.for_each_array([scale](std::vector<double>& a) {
      for (double& v : a) v *= scale;
    });
  }
  return norm;
}

AdamState AdamState::init(const PolicyParams& params) {
  return {PolicyParams::zeros_like(params), PolicyParams::zeros_like(params), 0};
}

namespace {

std::vector<std::vector<double>*> arrays_of(PolicyParams& p) {
  std::vector<std::vector<double>*> out;
  p.for_each_array([&](std::vector<double>& a) { out.push_back(&a); });
  return out;
}

std::vector<const std::vector<double>*> arrays_of(const PolicyParams& p) {
  std::vector<const std::vector<double>*> out;
  p.for_each_array([&](const std::vector<double>& a) { out.push_back(&a); });
  return out;
}

// Action-distribution parameters only (policy trunk, mean head, log_std);
// the value pathway is excluded on purpose.
std::vector<std::vector<double>*> pi_arrays_of(PolicyParams& p) {
  std::vector<std::vector<double>*> out;
  for (auto& layer : p.pi_layers) {
    out.push_back(&layer.w.data);
    out.push_back(&layer.b);
    out.push_back(&layer.ln_gain);
    out.push_back(&layer.ln_offset);
  }
  out.push_back(&p.mean_w.data);
  out.push_back(&p.mean_b);
  out.push_back(&p.log_std);
  return out;
}

std::vector<const std::vector<double>*> pi_arrays_of(const PolicyParams& p) {
  auto mut = pi_arrays_of(const_cast<PolicyParams&>(p));
  return {mut.begin(), mut.end()};
}

}  // namespace

void adam_step(PolicyParams& params, const PolicyParams& grads, AdamState& state,
               const PpoConfig& cfg) {
  state.t += 1;
  auto p_arrays = arrays_of(params);
  auto g_arrays = arrays_of(grads);
  auto m_arrays = arrays_of(state.m);
  auto v_arrays = arrays_of(state.v);
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t a = 0; a < p_arrays.size(); ++a) {
    auto& p = *p_arrays[a];
    const auto& g = *g_arrays[a];
    auto& m = *m_arrays[a];
    auto& v = *v_arrays[a];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

LossTerms ppo_minibatch_loss(const PolicyParams& params, const Trajectory& traj,
                             std::span<const double> advantages,
                             std::span<const double> returns,
                             std::span<const int> indices, const PpoConfig& cfg,
                             PolicyParams* grads, bool policy_grads) {
  const int nb = params.n_beams;
  const double inv_m = 1.0 / static_cast<double>(indices.size());
  const double eps = cfg.clip_range;

  LossTerms terms;
  ForwardCache cache;
  std::vector<double> d_mean(nb);

  for (int idx : indices) {
    auto out = forward(params, traj.obs_row(idx), grads ? &cache : nullptr);
    auto action = traj.action_row(idx);

    const double logp_new = out.dist.log_prob(action);
    const double logp_old = traj.log_probs[idx];
    // Overflow guard only; gradients at such ratios are clip-dead anyway.
    const double log_ratio = std::min(logp_new - logp_old, 60.0);
    const double ratio = std::exp(log_ratio);
    const double adv = advantages[idx];

    // Pessimistic clipped surrogate.
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    const bool unclipped_active = surr1 <= surr2;
    terms.policy_loss += -std::min(surr1, surr2) * inv_m;

    // Clipped value loss (pessimistic max of clipped/unclipped squared error).
    const double v_old = traj.values[idx];
    const double v_new = out.value;
    const double v_clipped = v_old + std::clamp(v_new - v_old, -eps, eps);
    const double err = v_new - returns[idx];
    const double err_clipped = v_clipped - returns[idx];
    const bool unclipped_vloss = err * err >= err_clipped * err_clipped;
    terms.value_loss += 0.5 * std::max(err * err, err_clipped * err_clipped) * inv_m;

    terms.entropy += out.dist.entropy() * inv_m;
    terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_m;
    if (std::abs(ratio - 1.0) > eps) terms.clip_fraction += inv_m;

    if (grads) {
      // d(policy_loss)/d(logp_new): only the unclipped branch carries grad.
      const double d_logp =
          policy_grads && unclipped_active ? -ratio * adv * inv_m : 0.0;
      for (int j = 0; j < nb; ++j) {
        const double z = action[j] - out.dist.mean[j];
        const double inv_var = std::exp(-2.0 * out.dist.log_std[j]);
        d_mean[j] = d_logp * z * inv_var;
        grads->log_std[j] += d_logp * (z * z * inv_var - 1.0);
      }
      double d_value = 0.0;
      if (unclipped_vloss) {
        d_value = cfg.value_coef * err * inv_m;
      } else if (std::abs(v_new - v_old) < eps) {
        d_value = cfg.value_coef * err_clipped * inv_m;
      }
      backward(params, cache, d_mean, d_value, *grads);
    }
  }

  if (grads && policy_grads) {
    // Entropy bonus: state-independent, touches only log_std.
    for (int j = 0; j < nb; ++j) grads->log_std[j] -= cfg.entropy_coef;
  }
  terms.total = terms.policy_loss + cfg.value_coef * terms.value_loss -
                cfg.entropy_coef * terms.entropy;
  return terms;
}

UpdateDiagnostics ppo_update(PolicyParams& params, AdamState& adam,
                             const Trajectory& traj, const GaeResult& gae,
                             const PpoConfig& cfg, std::mt19937_64& shuffle_rng) {
  const int batch = cfg.batch_size();
  if (static_cast<int>(traj.rewards.size()) != batch) {
    throw std::invalid_argument("ppo_update: trajectory/batch size mismatch");
  }
  std::vector<double> advantages = gae.advantages;
  normalize_advantages(advantages);

  std::vector<int> indices(batch);
  std::iota(indices.begin(), indices.end(), 0);
  const int mb_size = batch / cfg.n_minibatches;

  UpdateDiagnostics diag;
  double reward_sum = 0.0;
  double reward_sq = 0.0;
  for (double r : traj.rewards) {
    reward_sum += r;
    reward_sq += r * r;
  }
  diag.mean_reward = reward_sum / batch;
  diag.std_reward = std::sqrt(std::max(0.0, reward_sq / batch - diag.mean_reward * diag.mean_reward));

  PolicyParams grads = PolicyParams::zeros_like(params);
  const PolicyParams before_update = params;
  int n_minibatch_passes = 0;
  bool policy_active = true;
  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::shuffle(indices.begin(), indices.end(), shuffle_rng);
    for (int start = 0; start < batch; start += mb_size) {
      grads.for_each_array([](std::vector<double>& a) {
        std::fill(a.begin(), a.end(), 0.0);
      });
      std::span<const int> mb(indices.data() + start, static_cast<std::size_t>(mb_size));
      auto terms = ppo_minibatch_loss(params, traj, advantages, gae.returns, mb,
                                      cfg, &grads, policy_active);
      if (!std::isfinite(terms.total)) {
        throw std::runtime_error(
            "ppo_update: non-finite loss (policy=" + format_double(terms.policy_loss) +
            ", value=" + format_double(terms.value_loss) +
            ", entropy=" + format_double(terms.entropy) +
            ", epoch=" + std::to_string(epoch) + ")");
      }
      if (policy_active && terms.approx_kl > 1.5 * cfg.kl_target) {
        // KL gate tripped: drop this minibatch's policy gradients and train
        // only the value function for the rest of the update.
        policy_active = false;
        for (auto& layer : grads.pi_layers) {
          std::fill(layer.w.data.begin(), layer.w.data.end(), 0.0);
          std::fill(layer.b.begin(), layer.b.end(), 0.0);
          std::fill(layer.ln_gain.begin(), layer.ln_gain.end(), 0.0);
          std::fill(layer.ln_offset.begin(), layer.ln_offset.end(), 0.0);
        }
        std::fill(grads.mean_w.data.begin(), grads.mean_w.data.end(), 0.0);
        std::fill(grads.mean_b.begin(), grads.mean_b.end(), 0.0);
        std::fill(grads.log_std.begin(), grads.log_std.end(), 0.0);
      }
      diag.grad_norm = clip_gradients(grads, cfg.max_grad_norm);
      adam_step(params, grads, adam, cfg);
      for (double& s : params.log_std) {
        s = std::clamp(s, cfg.log_std_min, cfg.log_std_max);
      }

      diag.policy_loss += terms.policy_loss;
      diag.value_loss += terms.value_loss;
      diag.entropy += terms.entropy;
      diag.clip_fraction += terms.clip_fraction;
      ++n_minibatch_passes;
    }
  }
  diag.policy_loss /= n_minibatch_passes;
  diag.value_loss /= n_minibatch_passes;
  diag.entropy /= n_minibatch_passes;
  diag.clip_fraction /= n_minibatch_passes;

  // Trust-region projection. At the paper's step size a single Adam pass can
  // move the action distribution far outside the clip region, so the
  // policy-side parameters are pulled back toward their pre-update values
  // until the batch KL against the collection policy fits kl_target. The
  // value pathway keeps its full step.
  auto batch_kl = [&]() {
    auto terms = ppo_minibatch_loss(params, traj, advantages, gae.returns,
                                    indices, cfg, nullptr);
    return terms.approx_kl;
  };
  double kl = batch_kl();
  if (kl > cfg.kl_target) {
    auto cur = pi_arrays_of(params);
    auto old_arrays = pi_arrays_of(before_update);
    std::vector<std::vector<double>> full;
    full.reserve(cur.size());
    for (auto* a : cur) full.push_back(*a);
    double scale = 1.0;
    for (int iter = 0; iter < 20 && kl > cfg.kl_target; ++iter) {
      scale *= 0.5;
      for (std::size_t a = 0; a < cur.size(); ++a) {
        const auto& o = *old_arrays[a];
        const auto& f = full[a];
        auto& dst = *cur[a];
        for (std::size_t i = 0; i < dst.size(); ++i) {
          dst[i] = o[i] + scale * (f[i] - o[i]);
        }
      }
      kl = batch_kl();
    }
  }
  diag.approx_kl = kl;
  return diag;
}

void write_ppo_config(const PpoConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "gamma = " << format_double(cfg.gamma) << '\n'
      << "lambda = " << format_double(cfg.lam) << '\n'
      << "clip_range = " << format_double(cfg.clip_range) << '\n'
      << "learning_rate = " << format_double(cfg.learning_rate) << '\n'
      << "n_steps = " << cfg.n_steps << '\n'
      << "n_minibatches = " << cfg.n_minibatches << '\n'
      << "n_epochs = " << cfg.n_epochs << '\n'
      << "max_grad_norm = " << format_double(cfg.max_grad_norm) << '\n'
      << "n_envs = " << cfg.n_envs << '\n'
      << "total_timesteps = " << cfg.total_timesteps << '\n'
      << "alpha = " << format_double(cfg.alpha) << '\n'
      << "value_coef = " << format_double(cfg.value_coef) << '\n'
      << "entropy_coef = " << format_double(cfg.entropy_coef) << '\n'
      << "seed = " << cfg.seed << '\n'
      << "checkpoint_every = " << cfg.checkpoint_every << '\n'
      << "adam_beta1 = " << format_double(cfg.adam_beta1) << '\n'
      << "adam_beta2 = " << format_double(cfg.adam_beta2) << '\n'
      << "adam_eps = " << format_double(cfg.adam_eps) << '\n';
}

TrainResult train(const SatelliteConfig& config, const DemandSeries& demand,
                  int episode_begin, int episode_end, const PpoConfig& cfg,
                  const std::string& run_dir) {
  cfg.validate();
  const double demand_norm = demand.max_value();
  const RewardConfig reward{cfg.alpha, 0.0};

  std::vector<Environment> envs;
  std::vector<std::mt19937_64> rngs;
  envs.reserve(cfg.n_envs);
  const int episode_len = episode_end - episode_begin;
  for (int e = 0; e < cfg.n_envs; ++e) {
    envs.emplace_back(config, demand, episode_begin, episode_end, reward, demand_norm);
    // Stagger the parallel environments across the episode so every rollout
    // batch mixes all demand phases instead of 8 copies of the same window.
    envs.back().warm_start(e * episode_len / cfg.n_envs);
    rngs.push_back(make_rng(cfg.seed, 0x656e7600ULL + static_cast<uint64_t>(e)));
  }
  auto shuffle_rng = make_rng(cfg.seed, 0x73687566ULL);

  TrainResult result{PolicyParams::init(config.n_beams(), cfg.seed), {}};
  result.params.log_std.assign(config.n_beams(), cfg.log_std_init);
  AdamState adam = AdamState::init(result.params);

  std::ofstream rewards_csv;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    write_ppo_config(cfg, run_dir + "/config.txt");
    rewards_csv.open(run_dir + "/rewards.csv");
    if (!rewards_csv) throw std::runtime_error("cannot write " + run_dir + "/rewards.csv");
    rewards_csv << "update,mean_reward,std_reward\n";
  }

  const int n_updates = cfg.n_updates();
  result.curve.reserve(n_updates);
  for (int update = 1; update <= n_updates; ++update) {
    auto traj = collect_rollout(result.params, envs, cfg.n_steps, rngs);
    auto gae = compute_gae(traj, cfg.gamma, cfg.lam);
    auto diag = ppo_update(result.params, adam, traj, gae, cfg, shuffle_rng);
    result.curve.push_back(diag);

    if (rewards_csv.is_open()) {
      rewards_csv << update << ',' << format_double(diag.mean_reward) << ','
                  << format_double(diag.std_reward) << '\n';
    }
    if (!run_dir.empty() && cfg.checkpoint_every > 0 &&
        update % cfg.checkpoint_every == 0) {
      save_checkpoint(result.params,
                      run_dir + "/checkpoint_" + std::to_string(update));
    }
  }
  if (!run_dir.empty()) {
    save_checkpoint(result.params, run_dir + "/checkpoint_final");
  }
  return result;
}

}  // namespace beampower
