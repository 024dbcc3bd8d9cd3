#include "beampower/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "beampower/util.hpp"

namespace beampower {

double DemandSeries::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

void DemandSeries::validate() const {
  if (n_beams < 1 || n_steps < 1) {
    throw std::invalid_argument("demand series: empty dimensions");
  }
  if (values.size() != static_cast<std::size_t>(n_beams) * n_steps) {
    throw std::invalid_argument("demand series: value count does not match dimensions");
  }
  for (double v : values) {
    if (!(v >= 0.0)) throw std::invalid_argument("demand series: negative or NaN value");
  }
}

namespace {

// Comma split preserving empty fields, so "1.0,,3.0" fails loudly instead of
// silently collapsing to two columns.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool row_is_numeric(const std::vector<std::string>& fields) {
  for (const auto& f : fields) {
    try {
      parse_double(f, "probe");
    } catch (const std::invalid_argument&) {
      return false;
    }
  }
  return !fields.empty();
}

}  // namespace

DemandSeries load_csv(const std::string& path, double step_minutes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("demand csv: cannot open " + path);

  DemandSeries series;
  series.step_minutes = step_minutes;

  std::string line;
  int lineno = 0;
  bool may_be_header = true;  // only the very first row
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (may_be_header) {
      may_be_header = false;
      if (!row_is_numeric(fields)) continue;  // header row, skip
    }

    if (series.n_steps == 0) {
      series.n_beams = static_cast<int>(fields.size());
    } else if (static_cast<int>(fields.size()) != series.n_beams) {
      throw std::invalid_argument(path + " line " + std::to_string(lineno) +
                                  ": expected " + std::to_string(series.n_beams) +
                                  " columns, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      std::string ctx = path + " line " + std::to_string(lineno) + " column " +
                        std::to_string(c + 1);
      double v = parse_double(fields[c], ctx);
      if (v < 0.0) throw std::invalid_argument(ctx + ": negative demand");
      series.values.push_back(v);
    }
    ++series.n_steps;
  }
  if (series.n_steps == 0) {
    throw std::invalid_argument(path + ": no demand rows");
  }
  return series;
}

void save_csv(const DemandSeries& series, const std::string& path) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("demand csv: cannot write " + path);
  for (int t = 0; t < series.n_steps; ++t) {
    for (int b = 0; b < series.n_beams; ++b) {
      if (b) out << ',';
      out << format_double(series.at(t, b));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("demand csv: write failed for " + path);
}

DemandSeries generate_synthetic(int n_beams, int n_steps, double step_minutes,
                                uint64_t seed, double peak_demand_bps,
                                double noise_sigma) {
  if (n_beams < 1 || n_steps < 1) {
    throw std::invalid_argument("generate_synthetic: n_beams and n_steps must be >= 1");
  }
  DemandSeries series;
  series.n_beams = n_beams;
  series.n_steps = n_steps;
  series.step_minutes = step_minutes;
  series.values.assign(static_cast<std::size_t>(n_beams) * n_steps, 0.0);

  const double baseline = 0.2 * peak_demand_bps;
  const int n_days =
      std::max(1, static_cast<int>(std::ceil(n_steps * step_minutes / (24.0 * 60.0))));
  const double centers[2] = {10.0, 20.0};  // hours within the day

  for (int b = 0; b < n_beams; ++b) {
    auto rng = make_rng(seed, static_cast<uint64_t>(b));
    double phase[2] = {uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
    double width[2] = {uniform(rng, 1.0, 1.5), uniform(rng, 1.0, 1.5)};
    std::vector<double> amp(static_cast<std::size_t>(n_days) * 2);
    for (double& a : amp) a = uniform(rng, 0.5, 1.0) * peak_demand_bps;

    for (int t = 0; t < n_steps; ++t) {
      double minutes = t * step_minutes;
      int day = std::min(n_days - 1, static_cast<int>(minutes / (24.0 * 60.0)));
      double hour = std::fmod(minutes / 60.0, 24.0);
      double v = baseline;
      for (int p = 0; p < 2; ++p) {
        double dh = hour - (centers[p] + phase[p]);
        v += amp[day * 2 + p] * std::exp(-dh * dh / (2.0 * width[p] * width[p]));
      }
      if (noise_sigma > 0.0) v *= 1.0 + normal(rng, 0.0, noise_sigma);
      series.values[static_cast<std::size_t>(t) * n_beams + b] = std::max(0.0, v);
    }
  }
  return series;
}

}  // namespace beampower
