#include "beampower/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beampower {

SatelliteConfig SatelliteConfig::make(std::vector<BeamParams> beams,
                                      double p_total_w, ModcodTable modcod,
                                      PhysicalConstants consts) {
  if (beams.empty()) throw std::invalid_argument("satellite config: no beams");
  if (!(p_total_w > 0.0)) {
    throw std::invalid_argument("satellite config: p_total_w must be > 0");
  }
  for (const auto& b : beams) b.validate();

  SatelliteConfig cfg{std::move(beams), p_total_w, std::move(modcod), consts, {}, {}};
  cfg.p_max_w.reserve(cfg.beams.size());
  cfg.keepalive_w.reserve(cfg.beams.size());
  for (const auto& b : cfg.beams) {
    cfg.p_max_w.push_back(dbw_to_watts(b.p_max_dbw));
    cfg.keepalive_w.push_back(dbw_to_watts(keepalive_power(b, cfg.modcod, consts)));
  }
  return cfg;
}

std::vector<double> EnvState::flatten() const {
  std::vector<double> out;
  out.reserve(d_t.size() * 5);
  for (const auto* part : {&d_t, &d_t1, &d_t2, &p_opt_t1, &p_opt_t2}) {
    out.insert(out.end(), part->begin(), part->end());
  }
  return out;
}

double usd(std::span<const double> demands, std::span<const double> rates) {
  if (demands.size() != rates.size()) {
    throw std::invalid_argument("usd: demand/rate length mismatch");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < demands.size(); ++b) {
    total += std::max(demands[b] - rates[b], 0.0);
  }
  return total;
}

double step_reward(std::span<const double> demands, std::span<const double> rates,
                   std::span<const double> applied_w,
                   std::span<const double> optimal_w, double alpha) {
  double shortfall = 0.0;  // sum of min(R - D, 0), <= 0
  double demand_sum = 0.0;
  double sq_dev = 0.0;
  double opt_sum = 0.0;
  for (std::size_t b = 0; b < demands.size(); ++b) {
    shortfall += std::min(rates[b] - demands[b], 0.0);
    demand_sum += demands[b];
    double dp = applied_w[b] - optimal_w[b];
    sq_dev += dp * dp;
    opt_sum += optimal_w[b];
  }
  double demand_term = demand_sum > 0.0 ? alpha * shortfall / demand_sum : 0.0;
  return demand_term - sq_dev / opt_sum;
}

double objective(std::span<const StepOutcome> episode, double beta) {
  double total = 0.0;
  for (const auto& out : episode) {
    double power_sum = 0.0;
    for (double p : out.applied_power) power_sum += p;
    total += out.usd + beta * power_sum;
  }
  return total;
}

Action clip_action(std::vector<double> raw_w, const SatelliteConfig& config) {
  if (raw_w.size() != config.beams.size()) {
    throw std::invalid_argument("clip_action: wrong action length");
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < raw_w.size(); ++b) {
    raw_w[b] = std::clamp(raw_w[b], 0.0, config.p_max_w[b]);
    sum += raw_w[b];
  }
  // Proportional rescale keeps the mapping continuous in the raw action.
  // Iterate to absorb round-off so the budget holds exactly.
  for (int pass = 0; pass < 8 && sum > config.p_total_w; ++pass) {
    double scale = config.p_total_w / sum;
    sum = 0.0;
    for (double& p : raw_w) {
      p *= scale;
      sum += p;
    }
  }
  return Action{std::move(raw_w)};
}

StepEvaluation evaluate_step(std::span<const double> applied_w,
                             std::span<const double> demand_row,
                             const SatelliteConfig& config, double alpha) {
  const int nb = config.n_beams();
  if (static_cast<int>(applied_w.size()) != nb ||
      static_cast<int>(demand_row.size()) != nb) {
    throw std::invalid_argument("evaluate_step: length mismatch");
  }
  StepEvaluation ev;
  ev.rates.resize(nb);
  ev.optimal_power_w.resize(nb);
  for (int b = 0; b < nb; ++b) {
    double p = applied_w[b];
    ev.rates[b] = p > 0.0 ? achieved_rate(watts_to_dbw(p), config.beams[b],
                                          config.modcod, config.consts)
                          : 0.0;
    auto sol = optimal_power(demand_row[b], config.beams[b], config.modcod,
                             config.consts);
    ev.optimal_power_w[b] = dbw_to_watts(sol.power_dbw);
  }
  ev.reward = step_reward(demand_row, ev.rates, applied_w, ev.optimal_power_w, alpha);
  ev.usd = usd(demand_row, ev.rates);
  return ev;
}

Environment::Environment(const SatelliteConfig& config, const DemandSeries& demand,
                         int episode_begin, int episode_end, RewardConfig reward,
                         double demand_norm_bps)
    : config_(&config),
      demand_(&demand),
      begin_(episode_begin),
      end_(episode_end),
      reward_(reward),
      demand_norm_(demand_norm_bps) {
  if (begin_ >= end_) throw std::invalid_argument("environment: empty episode range");
  if (begin_ < 0 || end_ > demand.n_steps) {
    throw std::invalid_argument("environment: episode range outside demand series");
  }
  if (demand.n_beams != config.n_beams()) {
    throw std::invalid_argument("environment: demand/config beam count mismatch");
  }
  if (!(demand_norm_ > 0.0)) demand_norm_ = 1.0;
  reset();
}

EnvState Environment::reset() { return warm_start(0); }

EnvState Environment::warm_start(int offset) {
  if (offset < 0 || begin_ + offset >= end_) {
    throw std::invalid_argument("environment: warm_start offset outside episode");
  }
  const int nb = config_->n_beams();
  auto first = demand_->row(begin_ + offset);
  state_.d_t.assign(first.begin(), first.end());
  state_.d_t1.assign(nb, 0.0);
  state_.d_t2.assign(nb, 0.0);
  state_.p_opt_t1.assign(nb, 0.0);
  state_.p_opt_t2.assign(nb, 0.0);
  clock_ = begin_ + offset;
  return state_;
}

StepOutcome Environment::step(const Action& action) {
  const int t = clock_;
  auto demand_row = demand_->row(t);
  auto ev = evaluate_step(action.p_w, demand_row, *config_, reward_.alpha);

  StepOutcome out;
  out.reward = ev.reward;
  out.usd = ev.usd;
  out.rates = std::move(ev.rates);
  out.applied_power = action.p_w;
  out.optimal_power = ev.optimal_power_w;
  out.done = (t + 1 == end_);

  if (out.done) {
    reset();
  } else {
    state_.d_t2 = std::move(state_.d_t1);
    state_.d_t1 = std::move(state_.d_t);
    auto next_row = demand_->row(t + 1);
    state_.d_t.assign(next_row.begin(), next_row.end());
    state_.p_opt_t2 = std::move(state_.p_opt_t1);
    state_.p_opt_t1 = out.optimal_power;
    clock_ = t + 1;
  }
  out.next_state = state_;
  return out;
}

std::vector<double> Environment::observation() const {
  const int nb = config_->n_beams();
  std::vector<double> obs;
  obs.reserve(5 * nb);
  for (const auto* part : {&state_.d_t, &state_.d_t1, &state_.d_t2}) {
    for (double v : *part) obs.push_back(v / demand_norm_);
  }
  for (const auto* part : {&state_.p_opt_t1, &state_.p_opt_t2}) {
    for (int b = 0; b < nb; ++b) obs.push_back((*part)[b] / config_->p_max_w[b]);
  }
  return obs;
}

}  // namespace beampower
