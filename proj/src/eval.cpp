#include "beampower/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "beampower/ppo.hpp"
#include "beampower/util.hpp"

namespace beampower {

EvalOutcome evaluate_split(const SatelliteConfig& config, const DemandSeries& demand,
                           int begin, int end, RewardConfig reward,
                           double demand_norm, const ActionFn& action_fn) {
  Environment env(config, demand, begin, end, reward, demand_norm);
  const int n_steps = end - begin;

  EvalOutcome out;
  out.timeseries.t.reserve(n_steps);

  double total_demand = 0.0;
  double total_rate = 0.0;
  double total_power = 0.0;
  double total_opt_power = 0.0;
  double usd_ratio_sum = 0.0;
  double usd_ratio_max = 0.0;
  double action_seconds = 0.0;

  for (int t = begin; t < end; ++t) {
    auto obs = env.observation();
    auto t0 = std::chrono::steady_clock::now();
    auto raw = action_fn(obs, t);
    action_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto step = env.step(clip_action(std::move(raw), config));

    double d_sum = 0.0, r_sum = 0.0, p_sum = 0.0, opt_sum = 0.0;
    auto row = demand.row(t);
    for (int b = 0; b < config.n_beams(); ++b) {
      d_sum += row[b];
      r_sum += step.rates[b];
      p_sum += step.applied_power[b];
      opt_sum += step.optimal_power[b];
    }
    total_demand += d_sum;
    total_rate += r_sum;
    total_power += p_sum;
    total_opt_power += opt_sum;
    double usd_ratio = d_sum > 0.0 ? step.usd / d_sum : 0.0;
    usd_ratio_sum += usd_ratio;
    usd_ratio_max = std::max(usd_ratio_max, usd_ratio);

    out.timeseries.t.push_back(t);
    out.timeseries.agg_demand.push_back(d_sum);
    out.timeseries.agg_rate.push_back(r_sum);
    out.timeseries.agg_power.push_back(p_sum);
    out.timeseries.agg_opt_power.push_back(opt_sum);
  }

  out.metrics.agg_rate_ratio = total_demand > 0.0 ? total_rate / total_demand : 0.0;
  out.metrics.avg_usd = usd_ratio_sum / n_steps;
  out.metrics.max_usd = usd_ratio_max;
  out.metrics.output_energy_ratio =
      total_opt_power > 0.0 ? total_power / total_opt_power : 0.0;
  out.metrics.avg_eval_time_ms = action_seconds * 1000.0 / n_steps;
  return out;
}

EvalOutcome evaluate_policy(const PolicyParams& params, const SatelliteConfig& config,
                            const DemandSeries& demand, int begin, int end,
                            RewardConfig reward, double demand_norm) {
  if (params.n_beams != config.n_beams()) {
    throw std::invalid_argument("evaluate_policy: checkpoint/scenario beam mismatch");
  }
  auto policy_action = [&](std::span<const double> obs, int) {
    auto out = forward(params, obs);
    return action_to_watts(out.dist.mean, config);
  };
  return evaluate_split(config, demand, begin, end, reward, demand_norm,
                        policy_action);
}

MeanCi mean_ci(std::span<const double> samples) {
  MeanCi ci;
  const std::size_t n = samples.size();
  if (n == 0) return ci;
  for (double v : samples) ci.mean += v;
  ci.mean /= static_cast<double>(n);
  if (n < 2) return ci;
  double var = 0.0;
  for (double v : samples) var += (v - ci.mean) * (v - ci.mean);
  var /= static_cast<double>(n - 1);
  ci.half_width = 1.96 * std::sqrt(var / static_cast<double>(n));
  return ci;
}

EvalReport aggregate_reports(std::span<const EvalMetrics> per_run) {
  EvalReport report;
  report.runs = static_cast<int>(per_run.size());
  auto gather = [&](auto field) {
    std::vector<double> vals;
    vals.reserve(per_run.size());
    for (const auto& m : per_run) vals.push_back(m.*field);
    return mean_ci(vals);
  };
  report.agg_rate_ratio = gather(&EvalMetrics::agg_rate_ratio);
  report.avg_usd = gather(&EvalMetrics::avg_usd);
  report.max_usd = gather(&EvalMetrics::max_usd);
  report.output_energy_ratio = gather(&EvalMetrics::output_energy_ratio);
  report.avg_eval_time_ms = gather(&EvalMetrics::avg_eval_time_ms);
  return report;
}

void save_eval_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("eval report: cannot write " + path);
  out << "metric,mean,ci95_half_width\n";
  out << "agg_demand,1,0\n";
  auto row = [&](const char* name, const MeanCi& ci) {
    out << name << ',' << format_double(ci.mean) << ','
        << format_double(ci.half_width) << '\n';
  };
  row("agg_rate_ratio", report.agg_rate_ratio);
  row("avg_usd", report.avg_usd);
  row("max_usd", report.max_usd);
  out << "opt_energy,1,0\n";
  row("output_energy_ratio", report.output_energy_ratio);
  out << "runs," << report.runs << ",0\n";
}

void save_eval_timeseries_csv(const EvalTimeseries& ts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("eval timeseries: cannot write " + path);
  out << "t,agg_demand,agg_rate,agg_power,agg_opt_power\n";
  for (std::size_t i = 0; i < ts.t.size(); ++i) {
    out << ts.t[i] << ',' << format_double(ts.agg_demand[i]) << ','
        << format_double(ts.agg_rate[i]) << ',' << format_double(ts.agg_power[i])
        << ',' << format_double(ts.agg_opt_power[i]) << '\n';
  }
}

}  // namespace beampower
