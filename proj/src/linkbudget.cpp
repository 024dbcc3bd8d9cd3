#include "beampower/linkbudget.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "beampower/util.hpp"

namespace beampower {

namespace {

// Power-independent part of the C/N0 budget for one beam.
double link_constant_db(const BeamParams& beam, const PhysicalConstants& consts) {
  return -beam.obo_db + beam.g_tx_db + beam.g_rx_db - beam.fspl_db -
         10.0 * std::log10(consts.boltzmann * beam.t_sys_k);
}

// Power at which `scheme` closes at its own rate. The tiny guard makes the
// forward check at exactly this power immune to rounding (well below the
// 1e-6 dB granularity any caller probes at).
constexpr double kInversionGuardDb = 1e-9;

double required_power_dbw(const ModcodScheme& scheme, const BeamParams& beam,
                          const PhysicalConstants& consts) {
  double rate = rate_for_modcod(scheme, beam);
  double bw_gain_db = 10.0 * std::log10(beam.bw_hz / rate);
  return scheme.ebn_threshold_db + beam.margin_db - bw_gain_db -
         link_constant_db(beam, consts) + kInversionGuardDb;
}

}  // namespace

void BeamParams::validate() const {
  if (!(bw_hz > 0.0)) throw std::invalid_argument("beam: bw_hz must be > 0");
  if (!(rolloff >= 0.0)) throw std::invalid_argument("beam: rolloff must be >= 0");
  if (!(t_sys_k > 0.0)) throw std::invalid_argument("beam: t_sys_k must be > 0");
  if (!(margin_db >= 0.0)) throw std::invalid_argument("beam: margin_db must be >= 0");
}

ModcodTable::ModcodTable(std::vector<ModcodScheme> schemes)
    : schemes_(std::move(schemes)) {
  if (schemes_.empty()) throw std::invalid_argument("modcod table: empty");
  for (std::size_t i = 0; i < schemes_.size(); ++i) {
    if (!(schemes_[i].gamma > 0.0)) {
      throw std::invalid_argument("modcod table: gamma must be > 0 ('" +
                                  schemes_[i].name + "')");
    }
    if (i > 0) {
      if (!(schemes_[i].gamma > schemes_[i - 1].gamma)) {
        throw std::invalid_argument(
            "modcod table: gamma must be strictly increasing ('" +
            schemes_[i].name + "')");
      }
      if (schemes_[i].ebn_threshold_db < schemes_[i - 1].ebn_threshold_db) {
        throw std::invalid_argument(
            "modcod table: threshold must be non-decreasing ('" +
            schemes_[i].name + "')");
      }
    }
  }
}

ModcodTable ModcodTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("modcod table: cannot open " + path);
  std::vector<ModcodScheme> schemes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto fields = split(line, " \t\r");
    if (fields.empty()) continue;
    if (fields.size() != 3) {
      throw std::invalid_argument("modcod table " + path + " line " +
                                  std::to_string(lineno) +
                                  ": expected 'name gamma threshold'");
    }
    std::string ctx = path + " line " + std::to_string(lineno);
    schemes.push_back({fields[0], parse_double(fields[1], ctx),
                       parse_double(fields[2], ctx)});
  }
  return ModcodTable(std::move(schemes));
}

double carrier_to_noise_density(double power_dbw, const BeamParams& beam,
                                const PhysicalConstants& consts) {
  return power_dbw + link_constant_db(beam, consts);
}

double eb_over_n(double cn0_dbhz, double bw_hz, double rate_bps) {
  if (!(bw_hz > 0.0)) throw std::invalid_argument("eb_over_n: bw must be > 0");
  if (!(rate_bps > 0.0)) throw std::invalid_argument("eb_over_n: rate must be > 0");
  return cn0_dbhz + 10.0 * std::log10(bw_hz / rate_bps);
}

double rate_for_modcod(const ModcodScheme& scheme, const BeamParams& beam) {
  return beam.bw_hz / (1.0 + beam.rolloff) * scheme.gamma;
}

double achieved_rate(double power_dbw, const BeamParams& beam,
                     const ModcodTable& table, const PhysicalConstants& consts) {
  double cn0 = carrier_to_noise_density(power_dbw, beam, consts);
  const auto& schemes = table.schemes();
  for (auto it = schemes.rbegin(); it != schemes.rend(); ++it) {
    double rate = rate_for_modcod(*it, beam);
    double ebn = cn0 + 10.0 * std::log10(beam.bw_hz / rate);
    if (it->ebn_threshold_db + beam.margin_db <= ebn) return rate;
  }
  return 0.0;
}

double keepalive_power(const BeamParams& beam, const ModcodTable& table,
                       const PhysicalConstants& consts) {
  return required_power_dbw(table.lowest(), beam, consts);
}

PowerSolution optimal_power(double demand_bps, const BeamParams& beam,
                            const ModcodTable& table,
                            const PhysicalConstants& consts) {
  if (demand_bps < 0.0) {
    throw std::invalid_argument("optimal_power: demand must be >= 0");
  }
  double floor_dbw = keepalive_power(beam, table, consts);
  for (const auto& scheme : table.schemes()) {
    if (rate_for_modcod(scheme, beam) >= demand_bps) {
      double power = std::max(required_power_dbw(scheme, beam, consts), floor_dbw);
      if (power > beam.p_max_dbw) return {beam.p_max_dbw, false};
      return {power, true};
    }
  }
  // Demand beyond the top scheme: cap at the ceiling, flag as unmet.
  return {beam.p_max_dbw, false};
}

}  // namespace beampower
