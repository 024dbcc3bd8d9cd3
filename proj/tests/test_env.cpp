#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "beampower/env.hpp"
#include "beampower/scenario.hpp"
#include "beampower/util.hpp"

using namespace beampower;

namespace {

// Two-beam config with unit-style link maths so expected values are simple:
// kT = 1, no gains/losses, rolloff 0, margin 0, a single scheme of gamma 1.
SatelliteConfig tiny_config(double bw_hz = 100e6, double p_max_dbw = 20.0,
                            double p_total_w = 150.0) {
  BeamParams b;
  b.g_tx_db = 0.0;
  b.g_rx_db = 0.0;
  b.fspl_db = 0.0;
  b.obo_db = 0.0;
  b.t_sys_k = 1.0 / PhysicalConstants{}.boltzmann;
  b.bw_hz = bw_hz;
  b.rolloff = 0.0;
  b.margin_db = 0.0;
  b.p_max_dbw = p_max_dbw;
  return SatelliteConfig::make({b, b}, p_total_w,
                               ModcodTable({{"only", 1.0, 0.0}}));
}

DemandSeries ramp_series(int n_steps, int n_beams, double scale) {
  DemandSeries s;
  s.n_beams = n_beams;
  s.n_steps = n_steps;
  for (int t = 0; t < n_steps; ++t) {
    for (int b = 0; b < n_beams; ++b) {
      s.values.push_back(scale * (t + 1) * (b + 1));
    }
  }
  return s;
}

SatelliteConfig scenario_config() {
  auto sc = Scenario::load(std::string(BEAMPOWER_DATA_DIR) + "/scenario_nb8.txt");
  return sc.build_with_modcod();
}

}  // namespace

TEST_CASE("usd sums positive shortfalls only") {
  std::vector<double> d{100.0, 50.0};
  std::vector<double> r{80.0, 60.0};
  CHECK(usd(d, r) == 20.0);

  std::vector<double> covered{120.0, 60.0};
  CHECK(usd(d, covered) == 0.0);

  std::vector<double> zero{0.0, 0.0};
  CHECK(usd(d, zero) == 150.0);

  std::vector<double> wrong{1.0};
  CHECK_THROWS_AS((void)usd(d, wrong), std::invalid_argument);
}

TEST_CASE("step_reward hand values") {
  SUBCASE("single beam, unmet demand, matched power") {
    std::vector<double> d{100.0}, r{80.0}, p{10.0}, popt{10.0};
    CHECK(step_reward(d, r, p, popt, 100.0) == doctest::Approx(-20.0));
  }
  SUBCASE("single beam, met demand, power overshoot") {
    std::vector<double> d{100.0}, r{120.0}, p{12.0}, popt{10.0};
    CHECK(step_reward(d, r, p, popt, 100.0) == doctest::Approx(-0.4));
  }
  SUBCASE("exact optimum is exactly zero") {
    std::vector<double> d{100.0, 50.0}, r{100.0, 60.0}, p{7.0, 3.0}, popt{7.0, 3.0};
    CHECK(step_reward(d, r, p, popt, 100.0) == 0.0);
  }
  SUBCASE("zero aggregate demand guards the division") {
    std::vector<double> d{0.0}, r{0.0}, p{5.0}, popt{4.0};
    CHECK(step_reward(d, r, p, popt, 100.0) == doctest::Approx(-0.25));
  }
}

TEST_CASE("reward is never positive and zero only at the optimum") {
  auto config = scenario_config();
  auto demand = generate_synthetic(8, 64, 2.0, 3, auto_peak_demand(config));
  auto rng = make_rng(44);
  int zero_hits = 0;
  for (int t = 0; t < demand.n_steps; ++t) {
    std::vector<double> raw(8);
    for (auto& v : raw) v = uniform(rng, 0.0, 70.0);
    auto action = clip_action(raw, config);
    auto ev = evaluate_step(action.p_w, demand.row(t), config, 100.0);
    CHECK(ev.reward <= 0.0);
    if (ev.reward == 0.0) ++zero_hits;

    auto at_opt = evaluate_step(ev.optimal_power_w, demand.row(t), config, 100.0);
    CHECK(at_opt.reward == 0.0);
    ++zero_hits;
  }
  CHECK(zero_hits >= demand.n_steps);  // the optimum branch fired every step
}

TEST_CASE("clip_action enforces the box and the shared budget") {
  auto config = tiny_config(100e6, 10.0, 10.0);  // p_max = 10 W each, total 10 W

  SUBCASE("inside the box: identity") {
    auto a = clip_action({2.0, 3.0}, config);
    CHECK(a.p_w[0] == 2.0);
    CHECK(a.p_w[1] == 3.0);
  }
  SUBCASE("per-beam clamp") {
    auto a = clip_action({25.0, -4.0}, config);
    CHECK(a.p_w[0] == 10.0);
    CHECK(a.p_w[1] == 0.0);
  }
  SUBCASE("proportional rescale onto the budget") {
    auto a = clip_action({10.0, 10.0}, config);
    CHECK(a.p_w[0] == doctest::Approx(5.0));
    CHECK(a.p_w[1] == doctest::Approx(5.0));
  }
  SUBCASE("random actions always satisfy all constraints") {
    auto rng = make_rng(5);
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> raw{uniform(rng, -20, 40), uniform(rng, -20, 40)};
      auto a = clip_action(raw, config);
      double sum = 0.0;
      for (int b = 0; b < 2; ++b) {
        CHECK(a.p_w[b] >= 0.0);
        CHECK(a.p_w[b] <= config.p_max_w[b]);
        sum += a.p_w[b];
      }
      CHECK(sum <= config.p_total_w);
    }
  }
  SUBCASE("wrong length rejected") {
    CHECK_THROWS_AS(clip_action({1.0}, config), std::invalid_argument);
  }
}

TEST_CASE("reset builds the paper initial state") {
  auto config = tiny_config();
  auto demand = ramp_series(1440, 2, 1e6);
  RewardConfig rc{100.0, 0.0};

  Environment env(config, demand, 0, 720, rc, demand.max_value());
  auto s = env.reset();
  CHECK(s.d_t[0] == demand.at(0, 0));
  CHECK(s.d_t[1] == demand.at(0, 1));
  for (auto* part : {&s.d_t1, &s.d_t2, &s.p_opt_t1, &s.p_opt_t2}) {
    for (double v : *part) CHECK(v == 0.0);
  }
  CHECK(s.flatten().size() == 10);

  auto s2 = env.reset();
  CHECK(s.flatten() == s2.flatten());

  Environment offset(config, demand, 720, 1440, rc, demand.max_value());
  CHECK(offset.reset().d_t[0] == demand.at(720, 0));

  CHECK_THROWS_AS(Environment(config, demand, 10, 10, rc, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(Environment(config, demand, 0, 2000, rc, 1.0),
                  std::invalid_argument);
}

TEST_CASE("step shifts history and reports the oracle optima") {
  auto config = scenario_config();
  auto demand = generate_synthetic(8, 100, 2.0, 9, auto_peak_demand(config));
  RewardConfig rc{100.0, 0.0};
  Environment env(config, demand, 0, 100, rc, demand.max_value());
  env.reset();

  auto rng = make_rng(7);
  std::vector<double> raw(8);
  for (auto& v : raw) v = uniform(rng, 0.0, 60.0);
  auto out0 = env.step(clip_action(raw, config));
  for (auto& v : raw) v = uniform(rng, 0.0, 60.0);
  auto out1 = env.step(clip_action(raw, config));

  const auto& s = env.state();
  for (int b = 0; b < 8; ++b) {
    CHECK(s.d_t[b] == demand.at(2, b));
    CHECK(s.d_t1[b] == demand.at(1, b));
    CHECK(s.d_t2[b] == demand.at(0, b));
    // p_opt history must equal the direct linkbudget oracle
    auto sol1 = optimal_power(demand.at(1, b), config.beams[b], config.modcod,
                              config.consts);
    auto sol0 = optimal_power(demand.at(0, b), config.beams[b], config.modcod,
                              config.consts);
    CHECK(s.p_opt_t1[b] == dbw_to_watts(sol1.power_dbw));
    CHECK(s.p_opt_t2[b] == dbw_to_watts(sol0.power_dbw));
    CHECK(out0.optimal_power[b] == dbw_to_watts(sol0.power_dbw));
  }
  CHECK_FALSE(out0.done);
  CHECK_FALSE(out1.done);
  CHECK(out0.usd >= 0.0);
}

TEST_CASE("episode terminates at the range end and auto-resets") {
  auto config = tiny_config();
  auto demand = ramp_series(10, 2, 1e6);
  RewardConfig rc{100.0, 0.0};
  Environment env(config, demand, 2, 6, rc, demand.max_value());
  CHECK(env.episode_length() == 4);

  env.reset();
  Action idle{{1.0, 1.0}};
  for (int i = 0; i < 3; ++i) {
    auto out = env.step(idle);
    CHECK_FALSE(out.done);
  }
  auto last = env.step(idle);
  CHECK(last.done);
  // auto-reset: back at the episode start with a fresh state
  CHECK(env.clock() == 2);
  CHECK(last.next_state.d_t[0] == demand.at(2, 0));
  CHECK(last.next_state.p_opt_t1[0] == 0.0);
}

TEST_CASE("default scenario trains on 720-step episodes") {
  auto sc = Scenario::load(std::string(BEAMPOWER_DATA_DIR) + "/scenario_nb8.txt");
  CHECK(sc.train_end - sc.train_begin == 720);
  CHECK(sc.test_end - sc.test_begin == 720);
}

TEST_CASE("objective accumulates usd plus weighted power") {
  StepOutcome a;
  a.usd = 20.0;
  a.applied_power = {2.0, 3.0};
  StepOutcome b;
  b.usd = 0.0;
  b.applied_power = {1.0, 1.0};
  std::vector<StepOutcome> episode{a, b};

  CHECK(objective(episode, 0.0) == doctest::Approx(20.0));
  CHECK(objective(std::span<const StepOutcome>(episode.data(), 1), 1.0) ==
        doctest::Approx(25.0));
  CHECK(objective(episode, 1.0) == doctest::Approx(27.0));
  CHECK(objective(episode, 1.0) >= objective(std::span<const StepOutcome>(episode.data(), 1), 1.0));
}

TEST_CASE("shortfall and surplus decompose the rate-demand gap exactly") {
  auto config = scenario_config();
  auto demand = generate_synthetic(8, 32, 2.0, 11, auto_peak_demand(config));
  auto rng = make_rng(12);
  for (int t = 0; t < demand.n_steps; ++t) {
    std::vector<double> raw(8);
    for (auto& v : raw) v = uniform(rng, 0.0, 60.0);
    auto ev = evaluate_step(clip_action(raw, config).p_w, demand.row(t), config, 100.0);
    auto row = demand.row(t);
    for (int b = 0; b < 8; ++b) {
      double gap = ev.rates[b] - row[b];
      double shortfall = std::min(gap, 0.0);
      double surplus = std::max(gap, 0.0);
      CHECK(shortfall + surplus == gap);  // exact in floating point
    }
  }
}

TEST_CASE("normalized observation layout") {
  auto config = tiny_config();
  auto demand = ramp_series(20, 2, 1e6);
  RewardConfig rc{100.0, 0.0};
  double norm = demand.max_value();
  Environment env(config, demand, 0, 20, rc, norm);
  env.reset();
  auto obs = env.observation();
  REQUIRE(obs.size() == 10);
  CHECK(obs[0] == doctest::Approx(demand.at(0, 0) / norm));
  CHECK(obs[1] == doctest::Approx(demand.at(0, 1) / norm));
  for (std::size_t i = 2; i < obs.size(); ++i) CHECK(obs[i] == 0.0);

  env.step(Action{{1.0, 1.0}});
  obs = env.observation();
  CHECK(obs[2] == doctest::Approx(demand.at(0, 0) / norm));  // d_{t-1} slot
  CHECK(obs[6] > 0.0);  // p_opt_{t-1} slot, normalized by p_max
  CHECK(obs[6] == doctest::Approx(env.state().p_opt_t1[0] / config.p_max_w[0]));
}
