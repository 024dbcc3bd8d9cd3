#pragma once

#include <cstdint>
#include <string>

#include "beampower/env.hpp"

namespace beampower {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Plain-text `key = value` scenario: beam count, per-beam parameter ranges,
// seed, power budget, reward weights and the train/test split. Per-beam
// values are drawn uniformly from the ranges at build time.
struct Scenario {
  int n_beams = 30;
  uint64_t beam_seed = 1;

  Range g_tx_db{50.2, 50.9};
  Range g_rx_db{39.3, 40.0};
  Range fspl_db{209.0, 210.1};
  Range bw_hz{655e6, 800e6};
  Range p_max_dbw{17.0, 18.0};
  double rolloff = 0.1;
  double margin_db = 0.5;
  double obo_db = 0.0;
  double t_sys_k = 290.0;

  double p_total_w = 0.0;       // 0 = derive from p_total_factor
  double p_total_factor = 1.5;  // sum(p_max_w) = factor * p_total_w

  double alpha = 100.0;
  double beta = 0.0;

  int train_begin = 0;
  int train_end = 720;
  int test_begin = 720;
  int test_end = 1440;

  std::string modcod_file;  // resolved relative to the scenario file

  static Scenario load(const std::string& path);
  void save(const std::string& path) const;

  // Draws beam parameters (seeded) and fills the watt-domain caches.
  SatelliteConfig build(const ModcodTable& modcod) const;

  // Loads the modcod table named by the scenario (or `fallback` when the
  // scenario does not name one) and builds the config.
  SatelliteConfig build_with_modcod(const std::string& fallback_path = "") const;

  RewardConfig reward_config() const { return {alpha, beta}; }
};

// Demand level at which every beam can still serve its own peak:
// fraction * min over beams of the rate achievable at p_max.
double auto_peak_demand(const SatelliteConfig& config, double fraction = 0.6);

}  // namespace beampower
