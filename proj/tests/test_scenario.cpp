#include <doctest.h>

#include <stdexcept>

#include <cstdio>
#include <fstream>

#include "beampower/scenario.hpp"
#include "beampower/util.hpp"

using namespace beampower;

namespace {

const std::string kDataDir = BEAMPOWER_DATA_DIR;

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("bundled scenarios parse with the expected knobs") {
  auto sc = Scenario::load(kDataDir + "/scenario_nb8.txt");
  CHECK(sc.n_beams == 8);
  CHECK(sc.alpha == 100.0);
  CHECK(sc.beta == 0.0);
  CHECK(sc.g_tx_db.lo == 50.2);
  CHECK(sc.g_tx_db.hi == 50.9);
  CHECK(sc.rolloff == 0.1);
  CHECK(sc.margin_db == 0.5);
  CHECK(sc.train_begin == 0);
  CHECK(sc.train_end == 720);
  CHECK(sc.test_begin == 720);
  CHECK(sc.test_end == 1440);
  CHECK(!sc.modcod_file.empty());

  auto big = Scenario::load(kDataDir + "/scenario_nb30.txt");
  CHECK(big.n_beams == 30);
}

TEST_CASE("build draws beams inside the configured ranges, deterministically") {
  auto sc = Scenario::load(kDataDir + "/scenario_nb8.txt");
  auto a = sc.build_with_modcod();
  auto b = sc.build_with_modcod();
  REQUIRE(a.n_beams() == 8);
  for (int i = 0; i < a.n_beams(); ++i) {
    CHECK(a.beams[i].g_tx_db >= sc.g_tx_db.lo);
    CHECK(a.beams[i].g_tx_db <= sc.g_tx_db.hi);
    CHECK(a.beams[i].g_rx_db >= sc.g_rx_db.lo);
    CHECK(a.beams[i].g_rx_db <= sc.g_rx_db.hi);
    CHECK(a.beams[i].fspl_db >= sc.fspl_db.lo);
    CHECK(a.beams[i].fspl_db <= sc.fspl_db.hi);
    CHECK(a.beams[i].bw_hz >= sc.bw_hz.lo);
    CHECK(a.beams[i].bw_hz <= sc.bw_hz.hi);
    CHECK(a.beams[i].g_tx_db == b.beams[i].g_tx_db);  // seeded draw
    CHECK(a.keepalive_w[i] > 0.0);
    CHECK(a.keepalive_w[i] < a.p_max_w[i]);
  }

  // distinct seeds give distinct beams
  auto sc2 = sc;
  sc2.beam_seed = sc.beam_seed + 1;
  auto c = sc2.build_with_modcod();
  CHECK(c.beams[0].g_tx_db != a.beams[0].g_tx_db);
}

TEST_CASE("total power budget follows the 1.5 rule unless pinned") {
  auto sc = Scenario::load(kDataDir + "/scenario_nb8.txt");
  auto cfg = sc.build_with_modcod();
  double pmax_sum = 0.0;
  for (double p : cfg.p_max_w) pmax_sum += p;
  CHECK(pmax_sum == doctest::Approx(1.5 * cfg.p_total_w));

  auto pinned = sc;
  pinned.p_total_w = 123.0;
  CHECK(pinned.build_with_modcod().p_total_w == 123.0);
}

TEST_CASE("scenario file errors") {
  TempFile f("scenario_bad.txt");
  {
    std::ofstream out(f.path);
    out << "n_beams = 4\nno_such_key = 1\n";
  }
  CHECK_THROWS_WITH_AS(Scenario::load(f.path), doctest::Contains("no_such_key"),
                       std::invalid_argument);
  {
    std::ofstream out(f.path);
    out << "this line has no equals sign\n";
  }
  CHECK_THROWS_AS(Scenario::load(f.path), std::invalid_argument);
  {
    std::ofstream out(f.path);
    out << "train_begin = 700\ntrain_end = 700\n";
  }
  CHECK_THROWS_AS(Scenario::load(f.path), std::invalid_argument);
  CHECK_THROWS_AS(Scenario::load("missing_scenario.txt"), std::runtime_error);
}

TEST_CASE("scenario save/load round-trip") {
  TempFile f("scenario_rt.txt");
  auto sc = Scenario::load(kDataDir + "/scenario_nb8.txt");
  sc.alpha = 77.0;
  sc.p_max_dbw = {16.5, 16.5};
  sc.save(f.path);
  auto r = Scenario::load(f.path);
  CHECK(r.alpha == 77.0);
  CHECK(r.p_max_dbw.lo == 16.5);
  CHECK(r.p_max_dbw.hi == 16.5);
  CHECK(r.n_beams == sc.n_beams);
  CHECK(r.beam_seed == sc.beam_seed);
}

TEST_CASE("auto peak demand stays serveable per beam") {
  auto sc = Scenario::load(kDataDir + "/scenario_nb8.txt");
  auto cfg = sc.build_with_modcod();
  double peak = auto_peak_demand(cfg, 0.6);
  CHECK(peak > 0.0);
  for (int b = 0; b < cfg.n_beams(); ++b) {
    double rmax = achieved_rate(cfg.beams[b].p_max_dbw, cfg.beams[b], cfg.modcod,
                                cfg.consts);
    CHECK(peak <= 0.6 * rmax + 1e-6);
  }
}
