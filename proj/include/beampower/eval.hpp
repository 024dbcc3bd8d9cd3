#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "beampower/env.hpp"
#include "beampower/policy.hpp"

namespace beampower {

// Split-level metrics in the normalization used for reporting: demand and
// optimal energy anchor at 1, everything else is a ratio against them.
struct EvalMetrics {
  double agg_demand = 1.0;
  double agg_rate_ratio = 0.0;        // sum(R) / sum(D)
  double avg_usd = 0.0;               // mean over t of USD_t / sum_b(D_t)
  double max_usd = 0.0;               // max over t of the same ratio
  double opt_energy = 1.0;
  double output_energy_ratio = 0.0;   // sum(P) / sum(P*)
  double avg_eval_time_ms = 0.0;      // per-timestep action computation
};

struct EvalTimeseries {
  std::vector<int> t;
  std::vector<double> agg_demand;     // bps
  std::vector<double> agg_rate;       // bps
  std::vector<double> agg_power;      // W
  std::vector<double> agg_opt_power;  // W
};

struct EvalOutcome {
  EvalMetrics metrics;
  EvalTimeseries timeseries;
};

// Raw (pre-clip) per-beam watts for the observation at timestep t.
using ActionFn =
    std::function<std::vector<double>(std::span<const double> obs, int t)>;

// Runs `action_fn` over [begin, end) of the demand series, one pass, no
// sampling, and accumulates the report metrics. Only the action computation
// is timed.
EvalOutcome evaluate_split(const SatelliteConfig& config, const DemandSeries& demand,
                           int begin, int end, RewardConfig reward,
                           double demand_norm, const ActionFn& action_fn);

// Deterministic policy evaluation (Gaussian mean, no sampling).
EvalOutcome evaluate_policy(const PolicyParams& params, const SatelliteConfig& config,
                            const DemandSeries& demand, int begin, int end,
                            RewardConfig reward, double demand_norm);

// Mean and 95% half-width (1.96 * sd / sqrt(n); 0 when n < 2).
struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
};
MeanCi mean_ci(std::span<const double> samples);

// Multi-run aggregate of the Table-style report.
struct EvalReport {
  int runs = 0;
  MeanCi agg_rate_ratio;
  MeanCi avg_usd;
  MeanCi max_usd;
  MeanCi output_energy_ratio;
  MeanCi avg_eval_time_ms;
};
EvalReport aggregate_reports(std::span<const EvalMetrics> per_run);

// Deterministic outputs (no timing fields).
void save_eval_report_csv(const EvalReport& report, const std::string& path);
void save_eval_timeseries_csv(const EvalTimeseries& ts, const std::string& path);

}  // namespace beampower
