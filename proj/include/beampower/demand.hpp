#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace beampower {

// Per-beam demand time series in bps, row-major [t * n_beams + b].
struct DemandSeries {
  int n_beams = 0;
  int n_steps = 0;
  double step_minutes = 2.0;
  std::vector<double> values;

  double at(int t, int b) const { return values[static_cast<std::size_t>(t) * n_beams + b]; }
  std::span<const double> row(int t) const {
    return {values.data() + static_cast<std::size_t>(t) * n_beams,
            static_cast<std::size_t>(n_beams)};
  }
  double max_value() const;

  void validate() const;  // throws std::invalid_argument
};

// Comma-separated decimal text, row = timestep, column = beam. A non-numeric
// first row is treated as a header and skipped. Parse errors name the file
// line and column.
DemandSeries load_csv(const std::string& path, double step_minutes = 2.0);

// Values printed with round-trip precision: load_csv(save_csv(s)) is
// bit-identical. No header row.
void save_csv(const DemandSeries& series, const std::string& path);

// Diurnal synthetic demand: per beam, a ~20%-of-peak baseline plus two
// Gaussian-shaped peaks per 24 h (centers near 10:00 and 20:00 with a random
// per-beam phase within +/-2 h, amplitudes 50-100% of peak redrawn each day)
// and multiplicative noise. Deterministic for a fixed seed; values >= 0.
DemandSeries generate_synthetic(int n_beams, int n_steps, double step_minutes,
                                uint64_t seed, double peak_demand_bps,
                                double noise_sigma = 0.05);

}  // namespace beampower
