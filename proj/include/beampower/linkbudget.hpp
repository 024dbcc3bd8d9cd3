#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace beampower {

struct PhysicalConstants {
  double boltzmann = 1.38e-23;  // J/K
};

// Per-beam link constants. All dB quantities are plain dB (powers in dBW);
// the environment converts to linear watts only where powers are summed.
struct BeamParams {
  double g_tx_db = 0.0;    // transmit antenna gain
  double g_rx_db = 0.0;    // receive antenna gain
  double fspl_db = 0.0;    // free-space path loss
  double obo_db = 0.0;     // amplifier output back-off
  double t_sys_k = 290.0;  // system noise temperature
  double bw_hz = 0.0;      // allocated bandwidth
  double rolloff = 0.1;    // pulse-shaping roll-off
  double margin_db = 0.5;  // required link margin
  double p_max_dbw = 0.0;  // per-beam power ceiling

  void validate() const;  // throws std::invalid_argument
};

struct ModcodScheme {
  std::string name;
  double gamma = 0.0;             // spectral efficiency, bps/Hz
  double ebn_threshold_db = 0.0;  // minimum Eb/N for this scheme
};

// Ordered ACM ladder: strictly increasing efficiency, non-decreasing
// threshold (a costlier scheme always buys more rate).
class ModcodTable {
 public:
  explicit ModcodTable(std::vector<ModcodScheme> schemes);

  // Plain text file, one `name gamma ebn_threshold_db` per line, '#' comments.
  static ModcodTable load(const std::string& path);

  const std::vector<ModcodScheme>& schemes() const { return schemes_; }
  const ModcodScheme& lowest() const { return schemes_.front(); }
  const ModcodScheme& highest() const { return schemes_.back(); }
  std::size_t size() const { return schemes_.size(); }

 private:
  std::vector<ModcodScheme> schemes_;
};

inline double dbw_to_watts(double dbw) { return std::pow(10.0, dbw / 10.0); }
inline double watts_to_dbw(double w) { return 10.0 * std::log10(w); }

// C/N0 in dB-Hz: P - OBO + G_tx + G_rx - FSPL - 10log10(k*T_sys).
double carrier_to_noise_density(double power_dbw, const BeamParams& beam,
                                const PhysicalConstants& consts);

// Eb/N in dB: cn0 + 10log10(bw/rate). Throws on non-positive bw or rate.
double eb_over_n(double cn0_dbhz, double bw_hz, double rate_bps);

// Scheme data rate in bps: BW/(1+rolloff) * gamma.
double rate_for_modcod(const ModcodScheme& scheme, const BeamParams& beam);

// ACM forward map: rate of the most efficient scheme whose threshold plus
// margin is met at that scheme's own rate; 0 if no scheme closes.
double achieved_rate(double power_dbw, const BeamParams& beam,
                     const ModcodTable& table, const PhysicalConstants& consts);

// Minimum power keeping the lowest scheme closed (links never switch off).
double keepalive_power(const BeamParams& beam, const ModcodTable& table,
                       const PhysicalConstants& consts);

struct PowerSolution {
  double power_dbw = 0.0;
  bool satisfiable = false;
};

// Inverse map: cheapest power whose achieved rate covers `demand_bps`,
// floored at keepalive_power. Demand beyond the table (or power beyond
// p_max) yields (p_max, unsatisfiable). Throws on negative demand.
PowerSolution optimal_power(double demand_bps, const BeamParams& beam,
                            const ModcodTable& table,
                            const PhysicalConstants& consts);

}  // namespace beampower
