#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "beampower/demand.hpp"
#include "beampower/util.hpp"

using namespace beampower;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("load_csv reads a plain matrix") {
  TempFile f("demand_t1.csv");
  write_file(f.path, "1.0,2.0\n3.0,4.0\n");
  auto s = load_csv(f.path);
  CHECK(s.n_steps == 2);
  CHECK(s.n_beams == 2);
  CHECK(s.at(1, 0) == 3.0);
  CHECK(s.at(0, 1) == 2.0);
}

TEST_CASE("load_csv skips an optional header row") {
  TempFile f("demand_t2.csv");
  write_file(f.path, "beam_0,beam_1\n1.5,2.5\n");
  auto s = load_csv(f.path);
  CHECK(s.n_steps == 1);
  CHECK(s.n_beams == 2);
  CHECK(s.at(0, 0) == 1.5);
}

TEST_CASE("load_csv error paths name the location") {
  TempFile f("demand_t3.csv");

  SUBCASE("empty file") {
    write_file(f.path, "");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("no demand rows"),
                         std::invalid_argument);
  }
  SUBCASE("ragged rows") {
    write_file(f.path, "1,2\n3\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("line 2"),
                         std::invalid_argument);
  }
  SUBCASE("malformed number") {
    write_file(f.path, "1,2\n3,x\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("column 2"),
                         std::invalid_argument);
  }
  SUBCASE("negative demand") {
    write_file(f.path, "1,2\n3,-4\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("negative"),
                         std::invalid_argument);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_csv("no_such_file.csv"), std::runtime_error);
  }
}

TEST_CASE("save/load round-trip is bit-exact on random matrices") {
  TempFile f("demand_t4.csv");
  auto rng = make_rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    DemandSeries s;
    s.n_beams = 1 + static_cast<int>(uniform(rng, 0, 6));
    s.n_steps = 1 + static_cast<int>(uniform(rng, 0, 12));
    for (int i = 0; i < s.n_beams * s.n_steps; ++i) {
      // awkward magnitudes on purpose
      s.values.push_back(uniform(rng, 0.0, 1.0) * std::pow(10.0, uniform(rng, -3, 9)));
    }
    save_csv(s, f.path);
    auto r = load_csv(f.path);
    REQUIRE(r.n_beams == s.n_beams);
    REQUIRE(r.n_steps == s.n_steps);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      CHECK(r.values[i] == s.values[i]);  // exact
    }
  }
}

TEST_CASE("save_csv degenerate shapes") {
  TempFile f("demand_t5.csv");

  SUBCASE("zeros persist") {
    DemandSeries s{2, 2, 2.0, {0, 0, 0, 0}};
    save_csv(s, f.path);
    auto r = load_csv(f.path);
    for (double v : r.values) CHECK(v == 0.0);
  }
  SUBCASE("1x1 matrix is a single line with a single field") {
    DemandSeries s{1, 1, 2.0, {42.5}};
    save_csv(s, f.path);
    std::ifstream in(f.path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "42.5");
    CHECK_FALSE(std::getline(in, line));
  }
}

TEST_CASE("synthetic generator determinism") {
  auto a = generate_synthetic(4, 200, 2.0, 123, 1e9);
  auto b = generate_synthetic(4, 200, 2.0, 123, 1e9);
  CHECK(a.values == b.values);

  auto c = generate_synthetic(4, 200, 2.0, 124, 1e9);
  CHECK(a.values != c.values);
}

TEST_CASE("synthetic generator shape") {
  const double peak = 1e9;

  SUBCASE("zero peak gives an all-zero series") {
    auto s = generate_synthetic(3, 100, 2.0, 5, 0.0);
    for (double v : s.values) CHECK(v == 0.0);
  }

  SUBCASE("one day holds exactly two peak episodes per beam (noise-free)") {
    auto s = generate_synthetic(6, 720, 2.0, 21, peak, /*noise_sigma=*/0.0);
    const double baseline = 0.2 * peak;
    for (int b = 0; b < s.n_beams; ++b) {
      int maxima = 0;
      for (int t = 1; t + 1 < s.n_steps; ++t) {
        double v = s.at(t, b);
        if (v > s.at(t - 1, b) && v > s.at(t + 1, b) && v > 1.5 * baseline) {
          ++maxima;
        }
      }
      CHECK(maxima == 2);
    }
  }

  SUBCASE("values are non-negative and bounded sanely") {
    auto s = generate_synthetic(8, 1440, 2.0, 7, peak);
    for (double v : s.values) CHECK(v >= 0.0);
    CHECK(s.max_value() < 3.0 * peak);
    CHECK(s.max_value() > 0.5 * peak);
  }

  SUBCASE("aggregate exhibits peaks: max >= 2x median") {
    auto s = generate_synthetic(8, 1440, 2.0, 7, peak);
    std::vector<double> agg(s.n_steps, 0.0);
    for (int t = 0; t < s.n_steps; ++t) {
      for (int b = 0; b < s.n_beams; ++b) agg[t] += s.at(t, b);
    }
    auto sorted = agg;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    double mx = sorted.back();
    CHECK(mx >= 2.0 * median);
  }
}

TEST_CASE("series validation") {
  DemandSeries bad{2, 1, 2.0, {1.0}};  // wrong element count
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  DemandSeries neg{1, 1, 2.0, {-1.0}};
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(0, 10, 2.0, 1, 1.0), std::invalid_argument);
}
