#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "beampower/env.hpp"

namespace beampower {

struct GaConfig {
  int population = 200;
  int iterations = 500;
  int tournament_k = 3;
  double crossover_rate = 0.9;
  double mutation_sigma = 0.05;  // fraction of p_max per gene
  double mutation_rate = 0.0;    // per-gene probability; <= 0 means 1/n_genes
  int elitism = 2;
  uint64_t seed = 0;
  int n_workers = 8;

  void validate() const;  // throws std::invalid_argument
};

struct Individual {
  std::vector<double> genes;  // per-beam power, W, already feasible
  double fitness = 0.0;
};

// Per-timestep reward of a candidate allocation; identical to the
// environment reward (same evaluate_step), so GA and DRL optimize the same
// objective. Genes must already satisfy the constraints (use clip_action).
double evaluate_fitness(std::span<const double> genes,
                        std::span<const double> demand_row,
                        const SatelliteConfig& config, double alpha);

struct GaResult {
  Individual best;
  std::vector<double> history;  // best fitness after each generation
};

// Generational GA: tournament selection, per-gene arithmetic crossover,
// Gaussian mutation, elitism. Deterministic under seed for any worker count
// (mutation/crossover randomness is drawn sequentially; workers only
// evaluate fitness).
GaResult run_ga(std::span<const double> demand_row, const SatelliteConfig& config,
                double alpha, const GaConfig& ga_cfg);

struct GaSeriesEntry {
  int t = 0;
  double usd = 0.0;           // bps
  double energy_ratio = 0.0;  // sum(genes) / sum(P*)
  double best_fitness = 0.0;
  double wall_ms = 0.0;
};

struct GaSeriesResult {
  std::vector<GaSeriesEntry> rows;
  double total_wall_ms = 0.0;
};

// Independent GA run on every stride-th timestep of [begin, end); each
// timestep gets its own seed substream, so results are order-independent.
GaSeriesResult run_ga_series(const DemandSeries& demand, int begin, int end,
                             int stride, const SatelliteConfig& config,
                             double alpha, const GaConfig& ga_cfg);

void save_ga_series_csv(const GaSeriesResult& result, const std::string& path);

}  // namespace beampower
