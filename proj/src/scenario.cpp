#include "beampower/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "beampower/util.hpp"

namespace beampower {

namespace {

Range parse_range(const std::string& value, const std::string& key) {
  auto fields = split(value, " \t");
  if (fields.size() == 1) {
    double v = parse_double(fields[0], key);
    return {v, v};
  }
  if (fields.size() == 2) {
    Range r{parse_double(fields[0], key), parse_double(fields[1], key)};
    if (r.hi < r.lo) throw std::invalid_argument(key + ": range hi < lo");
    return r;
  }
  throw std::invalid_argument(key + ": expected one or two numbers");
}

std::string range_text(const Range& r) {
  if (r.lo == r.hi) return format_double(r.lo);
  return format_double(r.lo) + " " + format_double(r.hi);
}

}  // namespace

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open " + path);

  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + " line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  Scenario sc;
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto set_d = [&](const char* key, double& out) {
    if (auto v = take(key); !v.empty()) out = parse_double(v, key);
  };
  auto set_i = [&](const char* key, int& out) {
    if (auto v = take(key); !v.empty()) out = static_cast<int>(parse_long(v, key));
  };
  auto set_r = [&](const char* key, Range& out) {
    if (auto v = take(key); !v.empty()) out = parse_range(v, key);
  };

  set_i("n_beams", sc.n_beams);
  if (auto v = take("beam_seed"); !v.empty()) {
    sc.beam_seed = static_cast<uint64_t>(parse_long(v, "beam_seed"));
  }
  set_r("g_tx_db", sc.g_tx_db);
  set_r("g_rx_db", sc.g_rx_db);
  set_r("fspl_db", sc.fspl_db);
  set_r("bw_hz", sc.bw_hz);
  set_r("p_max_dbw", sc.p_max_dbw);
  set_d("rolloff", sc.rolloff);
  set_d("margin_db", sc.margin_db);
  set_d("obo_db", sc.obo_db);
  set_d("t_sys_k", sc.t_sys_k);
  set_d("p_total_w", sc.p_total_w);
  set_d("p_total_factor", sc.p_total_factor);
  set_d("alpha", sc.alpha);
  set_d("beta", sc.beta);
  set_i("train_begin", sc.train_begin);
  set_i("train_end", sc.train_end);
  set_i("test_begin", sc.test_begin);
  set_i("test_end", sc.test_end);
  if (auto v = take("modcod_file"); !v.empty()) {
    std::filesystem::path p(v);
    if (p.is_relative()) {
      auto beside = std::filesystem::path(path).parent_path() / p;
      if (std::filesystem::exists(beside)) p = beside;
    }
    sc.modcod_file = p.string();
  }
  if (!kv.empty()) {
    throw std::invalid_argument(path + ": unknown key '" + kv.begin()->first + "'");
  }
  if (sc.n_beams < 1) throw std::invalid_argument(path + ": n_beams must be >= 1");
  if (sc.train_begin >= sc.train_end || sc.test_begin >= sc.test_end) {
    throw std::invalid_argument(path + ": empty train or test split");
  }
  if (!(sc.alpha > 0.0)) throw std::invalid_argument(path + ": alpha must be > 0");
  return sc;
}

void Scenario::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scenario: cannot write " + path);
  out << "n_beams = " << n_beams << '\n'
      << "beam_seed = " << beam_seed << '\n'
      << "g_tx_db = " << range_text(g_tx_db) << '\n'
      << "g_rx_db = " << range_text(g_rx_db) << '\n'
      << "fspl_db = " << range_text(fspl_db) << '\n'
      << "bw_hz = " << range_text(bw_hz) << '\n'
      << "p_max_dbw = " << range_text(p_max_dbw) << '\n'
      << "rolloff = " << format_double(rolloff) << '\n'
      << "margin_db = " << format_double(margin_db) << '\n'
      << "obo_db = " << format_double(obo_db) << '\n'
      << "t_sys_k = " << format_double(t_sys_k) << '\n'
      << "p_total_w = " << format_double(p_total_w) << '\n'
      << "p_total_factor = " << format_double(p_total_factor) << '\n'
      << "alpha = " << format_double(alpha) << '\n'
      << "beta = " << format_double(beta) << '\n'
      << "train_begin = " << train_begin << '\n'
      << "train_end = " << train_end << '\n'
      << "test_begin = " << test_begin << '\n'
      << "test_end = " << test_end << '\n';
  if (!modcod_file.empty()) out << "modcod_file = " << modcod_file << '\n';
}

SatelliteConfig Scenario::build(const ModcodTable& modcod) const {
  auto rng = make_rng(beam_seed, 0x6265616dULL);
  std::vector<BeamParams> beams(n_beams);
  double p_max_sum_w = 0.0;
  for (auto& b : beams) {
    b.g_tx_db = uniform(rng, g_tx_db.lo, g_tx_db.hi);
    b.g_rx_db = uniform(rng, g_rx_db.lo, g_rx_db.hi);
    b.fspl_db = uniform(rng, fspl_db.lo, fspl_db.hi);
    b.bw_hz = uniform(rng, bw_hz.lo, bw_hz.hi);
    b.p_max_dbw = uniform(rng, p_max_dbw.lo, p_max_dbw.hi);
    b.rolloff = rolloff;
    b.margin_db = margin_db;
    b.obo_db = obo_db;
    b.t_sys_k = t_sys_k;
    p_max_sum_w += dbw_to_watts(b.p_max_dbw);
  }
  double budget = p_total_w > 0.0 ? p_total_w : p_max_sum_w / p_total_factor;
  return SatelliteConfig::make(std::move(beams), budget, modcod);
}

SatelliteConfig Scenario::build_with_modcod(const std::string& fallback_path) const {
  std::string path = !modcod_file.empty() ? modcod_file : fallback_path;
  if (path.empty()) {
    throw std::invalid_argument("scenario: no modcod_file configured");
  }
  return build(ModcodTable::load(path));
}

double auto_peak_demand(const SatelliteConfig& config, double fraction) {
  double min_rate = std::numeric_limits<double>::infinity();
  for (const auto& b : config.beams) {
    min_rate = std::min(
        min_rate, achieved_rate(b.p_max_dbw, b, config.modcod, config.consts));
  }
  return fraction * min_rate;
}

}  // namespace beampower
