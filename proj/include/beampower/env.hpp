#pragma once

#include <span>
#include <vector>

#include "beampower/demand.hpp"
#include "beampower/linkbudget.hpp"

namespace beampower {

// Full satellite description plus per-beam caches in linear watts.
struct SatelliteConfig {
  std::vector<BeamParams> beams;
  double p_total_w = 0.0;
  ModcodTable modcod;
  PhysicalConstants consts;

  // Derived, filled by make().
  std::vector<double> p_max_w;
  std::vector<double> keepalive_w;

  static SatelliteConfig make(std::vector<BeamParams> beams, double p_total_w,
                              ModcodTable modcod, PhysicalConstants consts = {});
  int n_beams() const { return static_cast<int>(beams.size()); }
};

// Observation content: current demand, the two previous demands, and the two
// previous optimal allocations. Flattened length is 5 * n_beams.
struct EnvState {
  std::vector<double> d_t, d_t1, d_t2;        // bps
  std::vector<double> p_opt_t1, p_opt_t2;     // W

  std::vector<double> flatten() const;
};

struct Action {
  std::vector<double> p_w;  // per-beam power, linear watts
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  double usd = 0.0;  // bps
  std::vector<double> rates;          // bps
  std::vector<double> applied_power;  // W
  std::vector<double> optimal_power;  // W
  bool done = false;
};

struct RewardConfig {
  double alpha = 100.0;  // demand-shortfall weight in the reward
  double beta = 0.0;     // power weight in the reporting objective only
};

// Unmet demand: sum of max(D_b - R_b, 0). Throws on length mismatch.
double usd(std::span<const double> demands, std::span<const double> rates);

// Per-step reward: alpha * sum(min(R-D,0)) / sum(D) - sum((P-P*)^2) / sum(P*).
// The demand term is defined as 0 when sum(D) == 0. Always <= 0.
double step_reward(std::span<const double> demands, std::span<const double> rates,
                   std::span<const double> applied_w,
                   std::span<const double> optimal_w, double alpha);

// Reporting objective: sum over steps of [usd + beta * sum(P)].
double objective(std::span<const StepOutcome> episode, double beta);

// Per-beam clamp to [0, p_max], then proportional rescale onto the total
// power budget when the sum exceeds it.
Action clip_action(std::vector<double> raw_w, const SatelliteConfig& config);

// Rates, optimal powers, reward and usd for one demand row under an already
// clipped allocation. Shared verbatim by Environment::step and the GA fitness.
struct StepEvaluation {
  std::vector<double> rates;
  std::vector<double> optimal_power_w;
  double reward = 0.0;
  double usd = 0.0;
};
StepEvaluation evaluate_step(std::span<const double> applied_w,
                             std::span<const double> demand_row,
                             const SatelliteConfig& config, double alpha);

// Receding-horizon episode over [episode_begin, episode_end) of the demand
// series. step() consumes the row at the internal clock and auto-resets on
// episode end (the returned next_state is then the fresh initial state).
class Environment {
 public:
  Environment(const SatelliteConfig& config, const DemandSeries& demand,
              int episode_begin, int episode_end, RewardConfig reward,
              double demand_norm_bps);

  EnvState reset();

  // Fresh state placed mid-episode (history zeroed), used to desynchronize
  // parallel environments so one rollout covers different demand phases.
  EnvState warm_start(int offset);

  StepOutcome step(const Action& action);

  // Normalized flat observation: demands / demand_norm, powers / p_max.
  std::vector<double> observation() const;

  const EnvState& state() const { return state_; }
  int clock() const { return clock_; }
  int episode_begin() const { return begin_; }
  int episode_end() const { return end_; }
  int episode_length() const { return end_ - begin_; }
  const SatelliteConfig& config() const { return *config_; }
  const RewardConfig& reward_config() const { return reward_; }

 private:
  const SatelliteConfig* config_;
  const DemandSeries* demand_;
  int begin_;
  int end_;
  RewardConfig reward_;
  double demand_norm_;
  EnvState state_;
  int clock_ = 0;
};

}  // namespace beampower
