// beampower: multibeam satellite power-allocation benchmark CLI.
//
// Subcommands: gen-demand, train, eval, ga, compare. Each exits 0 on success
// and nonzero with a one-line diagnostic on stderr otherwise.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "beampower/demand.hpp"
#include "beampower/eval.hpp"
#include "beampower/ga.hpp"
#include "beampower/ppo.hpp"
#include "beampower/scenario.hpp"
#include "beampower/util.hpp"

namespace fs = std::filesystem;
using namespace beampower;

namespace {

#ifndef BEAMPOWER_DATA_DIR
#define BEAMPOWER_DATA_DIR "data"
#endif

std::string default_modcod_path() {
  return std::string(BEAMPOWER_DATA_DIR) + "/modcod_dvbs2.txt";
}

struct SplitRange {
  int begin = 0;
  int end = 0;
};

SplitRange resolve_split(const Scenario& sc, const std::string& split,
                         const DemandSeries& demand) {
  SplitRange r;
  if (split == "train") {
    r = {sc.train_begin, sc.train_end};
  } else if (split == "test") {
    r = {sc.test_begin, sc.test_end};
  } else if (split == "all") {
    r = {std::min(sc.train_begin, sc.test_begin), std::max(sc.train_end, sc.test_end)};
  } else {
    throw std::invalid_argument("unknown split '" + split + "'");
  }
  if (r.end > demand.n_steps || r.begin < 0 || r.begin >= r.end) {
    throw std::invalid_argument("split [" + std::to_string(r.begin) + ", " +
                                std::to_string(r.end) +
                                ") does not fit the demand series (" +
                                std::to_string(demand.n_steps) + " steps)");
  }
  return r;
}

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

double read_kv_double(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (trim(line.substr(0, eq)) == key) {
      return parse_double(line.substr(eq + 1), path + ":" + key);
    }
  }
  throw std::runtime_error(key + " not found in " + path);
}

int cmd_gen_demand(const std::string& out_path, int beams, int steps,
                   double step_minutes, uint64_t seed, double peak,
                   const std::string& config_path, double peak_fraction,
                   double noise_sigma) {
  if (peak <= 0.0) {
    if (config_path.empty()) {
      throw std::invalid_argument("--peak or --config required to size the demand");
    }
    auto sc = Scenario::load(config_path);
    auto cfg = sc.build_with_modcod(default_modcod_path());
    peak = auto_peak_demand(cfg, peak_fraction);
  }
  auto series = generate_synthetic(beams, steps, step_minutes, seed, peak, noise_sigma);
  save_csv(series, out_path);
  std::printf("wrote %dx%d demand (peak %.4g bps) to %s\n", steps, beams, peak,
              out_path.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& demand_path,
              const std::string& out_dir, int runs, PpoConfig ppo) {
  auto sc = Scenario::load(config_path);
  auto config = sc.build_with_modcod(default_modcod_path());
  auto demand = load_csv(demand_path);
  if (demand.n_beams != config.n_beams()) {
    throw std::invalid_argument("demand file has " + std::to_string(demand.n_beams) +
                                " beams, scenario expects " +
                                std::to_string(config.n_beams()));
  }

  std::printf("config: gamma=%g lr=%g clip=%g lambda=%g n_steps=%d minibatches=%d "
              "epochs=%d grad_clip=%g n_envs=%d timesteps=%ld alpha=%g seed=%llu\n",
              ppo.gamma, ppo.learning_rate, ppo.clip_range, ppo.lam, ppo.n_steps,
              ppo.n_minibatches, ppo.n_epochs, ppo.max_grad_norm, ppo.n_envs,
              ppo.total_timesteps, ppo.alpha,
              static_cast<unsigned long long>(ppo.seed));

  for (int run = 0; run < runs; ++run) {
    PpoConfig run_cfg = ppo;
    run_cfg.seed = mix_seed(ppo.seed, static_cast<uint64_t>(run));
    char name[32];
    std::snprintf(name, sizeof(name), "run_%02d", run);
    std::string run_dir = runs == 1 ? out_dir : out_dir + "/" + name;
    auto t0 = std::chrono::steady_clock::now();
    auto result = train(config, demand, sc.train_begin, sc.train_end, run_cfg, run_dir);
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double last = result.curve.empty() ? 0.0 : result.curve.back().mean_reward;
    std::printf("run %d: %zu updates, final mean reward %.3f, %.1f s -> %s\n", run,
                result.curve.size(), last, secs, run_dir.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& demand_path,
             const std::vector<std::string>& checkpoints, const std::string& split,
             const std::string& out_dir) {
  auto sc = Scenario::load(config_path);
  auto config = sc.build_with_modcod(default_modcod_path());
  auto demand = load_csv(demand_path);
  auto range = resolve_split(sc, split, demand);
  const double norm = demand.max_value();

  std::vector<EvalMetrics> metrics;
  EvalTimeseries mean_ts;
  for (const auto& ckpt : checkpoints) {
    auto params = load_checkpoint(ckpt);
    auto outcome = evaluate_policy(params, config, demand, range.begin, range.end,
                                   sc.reward_config(), norm);
    metrics.push_back(outcome.metrics);
    if (mean_ts.t.empty()) {
      mean_ts = outcome.timeseries;
    } else {
      for (std::size_t i = 0; i < mean_ts.t.size(); ++i) {
        mean_ts.agg_rate[i] += outcome.timeseries.agg_rate[i];
        mean_ts.agg_power[i] += outcome.timeseries.agg_power[i];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(checkpoints.size());
  for (std::size_t i = 0; i < mean_ts.t.size(); ++i) {
    mean_ts.agg_rate[i] *= inv;
    mean_ts.agg_power[i] *= inv;
  }

  auto report = aggregate_reports(metrics);
  fs::create_directories(out_dir);
  save_eval_report_csv(report, out_dir + "/eval_report.csv");
  save_eval_timeseries_csv(mean_ts, out_dir + "/eval_timeseries.csv");
  // Timing is machine noise; kept out of the deterministic CSVs.
  write_kv_file(out_dir + "/timing.txt",
                {{"avg_eval_time_ms", format_double(report.avg_eval_time_ms.mean)},
                 {"ci95_half_width", format_double(report.avg_eval_time_ms.half_width)},
                 {"runs", std::to_string(report.runs)}});

  std::printf("split=%s runs=%d\n", split.c_str(), report.runs);
  std::printf("  agg demand        1.0\n");
  std::printf("  agg rate ratio    %.4f +/- %.4f\n", report.agg_rate_ratio.mean,
              report.agg_rate_ratio.half_width);
  std::printf("  avg USD           %.6f +/- %.6f\n", report.avg_usd.mean,
              report.avg_usd.half_width);
  std::printf("  max USD           %.4f +/- %.4f\n", report.max_usd.mean,
              report.max_usd.half_width);
  std::printf("  opt energy        1.0\n");
  std::printf("  output energy     %.4f +/- %.4f\n", report.output_energy_ratio.mean,
              report.output_energy_ratio.half_width);
  std::printf("  avg eval time ms  %.4f\n", report.avg_eval_time_ms.mean);
  return 0;
}

int cmd_ga(const std::string& config_path, const std::string& demand_path,
           const std::vector<int>& iteration_counts, const std::string& split,
           int stride, GaConfig ga_cfg, const std::string& out_dir) {
  auto sc = Scenario::load(config_path);
  auto config = sc.build_with_modcod(default_modcod_path());
  auto demand = load_csv(demand_path);
  auto range = resolve_split(sc, split, demand);

  fs::create_directories(out_dir);
  std::ofstream summary(out_dir + "/ga_summary.csv");
  if (!summary) throw std::runtime_error("cannot write " + out_dir + "/ga_summary.csv");
  summary << "iterations,avg_usd,avg_usd_ratio,avg_energy_ratio,exec_time_s,"
             "wall_ms_per_timestep\n";

  for (int iters : iteration_counts) {
    GaConfig cfg = ga_cfg;
    cfg.iterations = iters;
    auto series = run_ga_series(demand, range.begin, range.end, stride, config,
                                sc.alpha, cfg);
    save_ga_series_csv(series, out_dir + "/ga_series_" + std::to_string(iters) + ".csv");

    double usd_sum = 0.0, usd_ratio_sum = 0.0, energy_sum = 0.0;
    for (const auto& row : series.rows) {
      usd_sum += row.usd;
      double d_sum = 0.0;
      for (int b = 0; b < demand.n_beams; ++b) d_sum += demand.at(row.t, b);
      usd_ratio_sum += d_sum > 0.0 ? row.usd / d_sum : 0.0;
      energy_sum += row.energy_ratio;
    }
    const double n = static_cast<double>(series.rows.size());
    summary << iters << ',' << format_double(usd_sum / n) << ','
            << format_double(usd_ratio_sum / n) << ','
            << format_double(energy_sum / n) << ','
            << format_double(series.total_wall_ms / 1000.0) << ','
            << format_double(series.total_wall_ms / n) << '\n';
    std::printf("GA %4d iterations: avg usd ratio %.5f, avg energy ratio %.4f, "
                "%.1f s over %zu timesteps\n",
                iters, usd_ratio_sum / n, energy_sum / n,
                series.total_wall_ms / 1000.0, series.rows.size());
  }
  return 0;
}

int cmd_compare(const std::string& eval_timing, const std::string& ga_summary,
                int iterations) {
  double eval_ms = read_kv_double(eval_timing, "avg_eval_time_ms");

  std::ifstream in(ga_summary);
  if (!in) throw std::runtime_error("cannot open " + ga_summary);
  std::string line;
  std::getline(in, line);  // header
  auto header = split(line, ",");
  int iters_col = -1, wall_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "iterations") iters_col = static_cast<int>(i);
    if (header[i] == "wall_ms_per_timestep") wall_col = static_cast<int>(i);
  }
  if (iters_col < 0 || wall_col < 0) {
    throw std::runtime_error(ga_summary + ": missing iterations/wall_ms_per_timestep");
  }
  double ga_ms = -1.0;
  while (std::getline(in, line)) {
    auto fields = split(line, ",");
    if (fields.size() <= static_cast<std::size_t>(std::max(iters_col, wall_col))) continue;
    if (parse_long(fields[iters_col], "iterations") == iterations) {
      ga_ms = parse_double(fields[wall_col], "wall_ms_per_timestep");
    }
  }
  if (ga_ms < 0.0) {
    throw std::runtime_error("no row with iterations=" + std::to_string(iterations) +
                             " in " + ga_summary);
  }
  double ratio = ga_ms / eval_ms;
  std::printf("policy eval: %.4f ms/timestep\n", eval_ms);
  std::printf("GA %d iterations: %.2f ms/timestep\n", iterations, ga_ms);
  std::printf("speedup: %.1fx\n", ratio);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multibeam satellite power allocation benchmark"};
  app.require_subcommand(1);

  // gen-demand
  auto* gen = app.add_subcommand("gen-demand", "generate a synthetic demand CSV");
  std::string gen_out = "demand.csv";
  int gen_beams = 30, gen_steps = 1440;
  double gen_step_minutes = 2.0, gen_peak = 0.0, gen_fraction = 0.6, gen_noise = 0.05;
  uint64_t gen_seed = 7;
  std::string gen_config;
  gen->add_option("--out", gen_out, "output CSV path");
  gen->add_option("--beams", gen_beams, "number of beams")->check(CLI::PositiveNumber);
  gen->add_option("--steps", gen_steps, "number of timesteps")->check(CLI::PositiveNumber);
  gen->add_option("--step-minutes", gen_step_minutes, "minutes per timestep");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--peak", gen_peak, "peak demand in bps (overrides --config sizing)");
  gen->add_option("--config", gen_config, "scenario file used to size the peak");
  gen->add_option("--peak-fraction", gen_fraction,
                  "peak as a fraction of the weakest beam's max rate");
  gen->add_option("--noise-sigma", gen_noise, "multiplicative noise sigma");

  // train
  auto* tr = app.add_subcommand("train", "train the PPO policy");
  std::string tr_config, tr_demand, tr_out = "runs";
  int tr_runs = 1;
  PpoConfig ppo;
  tr->add_option("--config", tr_config, "scenario file")->required();
  tr->add_option("--demand", tr_demand, "demand CSV")->required();
  tr->add_option("--out", tr_out, "output run directory");
  tr->add_option("--runs", tr_runs, "independent seeded runs")->check(CLI::PositiveNumber);
  tr->add_option("--seed", ppo.seed, "base seed");
  tr->add_option("--gamma", ppo.gamma, "discount factor");
  tr->add_option("--lr", ppo.learning_rate, "learning rate");
  tr->add_option("--clip-range", ppo.clip_range, "surrogate clip range");
  tr->add_option("--lambda", ppo.lam, "GAE trace decay");
  tr->add_option("--n-steps", ppo.n_steps, "steps per environment per update");
  tr->add_option("--minibatches", ppo.n_minibatches, "minibatches per update");
  tr->add_option("--epochs", ppo.n_epochs, "epochs per update");
  tr->add_option("--max-grad-norm", ppo.max_grad_norm, "gradient norm bound");
  tr->add_option("--n-envs", ppo.n_envs, "parallel environments");
  tr->add_option("--total-timesteps", ppo.total_timesteps,
                 "training steps per environment");
  tr->add_option("--alpha", ppo.alpha, "reward demand weight");
  tr->add_option("--value-coef", ppo.value_coef, "value loss coefficient");
  tr->add_option("--entropy-coef", ppo.entropy_coef, "entropy bonus coefficient");
  tr->add_option("--kl-target", ppo.kl_target, "per-update KL bound");
  tr->add_option("--log-std-init", ppo.log_std_init, "initial action log-stddev");
  tr->add_option("--checkpoint-every", ppo.checkpoint_every,
                 "updates between checkpoints (0 = final only)");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate checkpoints deterministically");
  std::string ev_config, ev_demand, ev_split = "test", ev_out = "eval";
  std::vector<std::string> ev_ckpts;
  ev->add_option("--config", ev_config, "scenario file")->required();
  ev->add_option("--demand", ev_demand, "demand CSV")->required();
  ev->add_option("--checkpoint", ev_ckpts, "checkpoint file (repeatable)")->required();
  ev->add_option("--split", ev_split, "train|test|all");
  ev->add_option("--out", ev_out, "output directory");

  // ga
  auto* ga = app.add_subcommand("ga", "genetic-algorithm baseline sweep");
  std::string ga_config, ga_demand, ga_split = "test", ga_out = "ga";
  std::vector<int> ga_iters{125, 250, 375, 500};
  int ga_stride = 10;
  GaConfig ga_cfg;
  ga->add_option("--config", ga_config, "scenario file")->required();
  ga->add_option("--demand", ga_demand, "demand CSV")->required();
  ga->add_option("--iterations", ga_iters, "iteration counts to sweep");
  ga->add_option("--split", ga_split, "train|test|all");
  ga->add_option("--stride", ga_stride, "sample every n-th timestep")
      ->check(CLI::PositiveNumber);
  ga->add_option("--population", ga_cfg.population, "population size");
  ga->add_option("--tournament-k", ga_cfg.tournament_k, "tournament size");
  ga->add_option("--crossover-rate", ga_cfg.crossover_rate, "crossover probability");
  ga->add_option("--mutation-sigma", ga_cfg.mutation_sigma,
                 "mutation stddev as a fraction of p_max");
  ga->add_option("--elitism", ga_cfg.elitism, "elites preserved per generation");
  ga->add_option("--seed", ga_cfg.seed, "base seed");
  ga->add_option("--workers", ga_cfg.n_workers, "fitness evaluation threads");
  ga->add_option("--out", ga_out, "output directory");

  // compare
  auto* cp = app.add_subcommand("compare", "policy vs GA wall-time ratio");
  std::string cp_eval, cp_ga;
  int cp_iters = 125;
  cp->add_option("--eval-timing", cp_eval, "timing.txt from eval")->required();
  cp->add_option("--ga-summary", cp_ga, "ga_summary.csv from ga")->required();
  cp->add_option("--iterations", cp_iters, "GA iteration row to compare against");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_demand(gen_out, gen_beams, gen_steps, gen_step_minutes,
                            gen_seed, gen_peak, gen_config, gen_fraction, gen_noise);
    }
    if (tr->parsed()) return cmd_train(tr_config, tr_demand, tr_out, tr_runs, ppo);
    if (ev->parsed()) return cmd_eval(ev_config, ev_demand, ev_ckpts, ev_split, ev_out);
    if (ga->parsed()) {
      return cmd_ga(ga_config, ga_demand, ga_iters, ga_split, ga_stride, ga_cfg, ga_out);
    }
    if (cp->parsed()) return cmd_compare(cp_eval, cp_ga, cp_iters);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
