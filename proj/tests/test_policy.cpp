#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "beampower/policy.hpp"
#include "beampower/util.hpp"

using namespace beampower;

namespace {

std::vector<double> random_state(int dim, std::mt19937_64& rng) {
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng, 0.3, 0.6);
  return v;
}

// |a - b| relative to max(1, |a|, |b|); absolute near zero, relative at scale.
double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("forward dimensions and determinism") {
  auto params = PolicyParams::init(3, 1);
  CHECK(params.input_dim == 15);
  CHECK(params.hidden_dim == 45);
  CHECK(params.pi_layers.size() == 4);
  CHECK(params.vf_layers.size() == 4);

  auto rng = make_rng(2);
  auto s = random_state(15, rng);
  auto a = forward(params, s);
  auto b = forward(params, s);
  CHECK(a.dist.mean == b.dist.mean);
  CHECK(a.value == b.value);
  CHECK(a.dist.mean.size() == 3);
  for (double m : a.dist.mean) CHECK(std::isfinite(m));
  CHECK(std::isfinite(a.value));

  std::vector<double> wrong(14, 0.0);
  CHECK_THROWS_AS((void)forward(params, wrong), std::invalid_argument);
}

TEST_CASE("zero weights and biases give zero outputs") {
  auto params = PolicyParams::zeros_like(PolicyParams::init(2, 0));
  // zeros_like also cleared the layer-norm gains; that still yields zero
  // outputs, which is the identity being checked here.
  auto rng = make_rng(3);
  auto s = random_state(10, rng);
  auto out = forward(params, s);
  for (double m : out.dist.mean) CHECK(m == 0.0);
  CHECK(out.value == 0.0);
}

TEST_CASE("layer norm: per-sample mean 0, variance 1 before gain/offset") {
  auto params = PolicyParams::init(2, 7);
  auto rng = make_rng(5);
  auto s = random_state(10, rng);
  ForwardCache cache;
  forward(params, s, &cache);
  for (const auto* trunk : {&cache.pi_layers, &cache.vf_layers}) {
    for (const auto& lc : *trunk) {
      double mean = 0.0;
      for (double x : lc.xhat) mean += x;
      mean /= lc.xhat.size();
      double var = 0.0;
      for (double x : lc.xhat) var += (x - mean) * (x - mean);
      var /= lc.xhat.size();
      CHECK(std::fabs(mean) < 1e-6);
      CHECK(std::fabs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("diagonal gaussian: log_prob closed form and shift invariance") {
  DiagGaussian d{{0.0}, {0.0}};
  CHECK(d.log_prob(std::vector<double>{0.0}) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  DiagGaussian d2{{1.0, -2.0}, {0.3, -0.7}};
  std::vector<double> a{1.4, -1.1};
  std::vector<double> shift{5.0, -3.0};
  DiagGaussian d3{{d2.mean[0] + shift[0], d2.mean[1] + shift[1]}, d2.log_std};
  std::vector<double> a3{a[0] + shift[0], a[1] + shift[1]};
  CHECK(d2.log_prob(a) == doctest::Approx(d3.log_prob(a3)).epsilon(1e-12));

  CHECK_THROWS_AS((void)d2.log_prob(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("log_prob integrates to one (trapezoid over +/-8 sigma)") {
  DiagGaussian d{{0.7}, {0.4}};
  double sigma = std::exp(0.4);
  const int n = 8001;
  double lo = d.mean[0] - 8.0 * sigma;
  double hi = d.mean[0] + 8.0 * sigma;
  double h = (hi - lo) / (n - 1);
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = lo + i * h;
    double p = std::exp(d.log_prob(std::vector<double>{x}));
    integral += (i == 0 || i == n - 1) ? 0.5 * p : p;
  }
  integral *= h;
  CHECK(std::fabs(integral - 1.0) < 1e-6);
}

TEST_CASE("entropy closed form") {
  DiagGaussian d{{0.0, 0.0}, {0.0, 1.0}};
  double expected = (1.4189385332046727) + (1.0 + 1.4189385332046727);
  CHECK(d.entropy() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sampling: seeded reproducibility and vanishing noise") {
  DiagGaussian d{{1.0, -1.0}, {-50.0, -50.0}};
  auto rng = make_rng(9);
  auto s = d.sample(rng);
  CHECK(std::fabs(s[0] - 1.0) < 1e-10);
  CHECK(std::fabs(s[1] + 1.0) < 1e-10);

  auto r1 = make_rng(10);
  auto r2 = make_rng(10);
  DiagGaussian g{{0.0}, {0.2}};
  for (int i = 0; i < 5; ++i) CHECK(g.sample(r1) == g.sample(r2));
}

TEST_CASE("sampling: empirical mean within 3 sigma / sqrt(n)") {
  DiagGaussian d{{2.5, -1.0}, {0.5, -0.3}};
  auto rng = make_rng(77);
  const int n = 100000;
  std::vector<double> acc(2, 0.0);
  for (int i = 0; i < n; ++i) {
    auto s = d.sample(rng);
    acc[0] += s[0];
    acc[1] += s[1];
  }
  for (int j = 0; j < 2; ++j) {
    double mean = acc[j] / n;
    double bound = 3.0 * std::exp(d.log_std[j]) / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(mean - d.mean[j]) < bound);
  }
}

TEST_CASE("backward matches central finite differences on network outputs") {
  // Scalar projection L = c_mean . mean + c_value * value, random direction.
  for (int trial = 0; trial < 4; ++trial) {
    int nb = 1 + trial % 3;
    auto params = PolicyParams::init(nb, 40 + trial);
    auto rng = make_rng(60 + trial);
    auto s = random_state(5 * nb, rng);
    std::vector<double> c_mean(nb);
    for (auto& c : c_mean) c = normal(rng);
    double c_value = normal(rng);

    ForwardCache cache;
    forward(params, s, &cache);
    auto grads = PolicyParams::zeros_like(params);
    backward(params, cache, c_mean, c_value, grads);

    auto project = [&](const PolicyParams& p) {
      auto out = forward(p, s);
      double l = c_value * out.value;
      for (int j = 0; j < nb; ++j) l += c_mean[j] * out.dist.mean[j];
      return l;
    };

    std::vector<std::vector<double>*> parrs, garrs;
    params.for_each_array([&](std::vector<double>& a) { parrs.push_back(&a); });
    grads.for_each_array([&](std::vector<double>& a) { garrs.push_back(&a); });
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t a = 0; a < parrs.size(); ++a) {
      // subsample large arrays to keep the test quick
      std::size_t stride = std::max<std::size_t>(1, parrs[a]->size() / 40);
      for (std::size_t i = 0; i < parrs[a]->size(); i += stride) {
        double keep = (*parrs[a])[i];
        (*parrs[a])[i] = keep + h;
        double lp = project(params);
        (*parrs[a])[i] = keep - h;
        double lm = project(params);
        (*parrs[a])[i] = keep;
        worst = std::max(worst, rel_err((lp - lm) / (2 * h), (*garrs[a])[i]));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward structure") {
  auto params = PolicyParams::init(2, 3);

  SUBCASE("zero input with zero biases: first-layer weight grads vanish") {
    auto zeroed = params;
    for (auto& layer : zeroed.pi_layers) {
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    std::vector<double> s(zeroed.input_dim, 0.0);
    ForwardCache cache;
    forward(zeroed, s, &cache);
    auto grads = PolicyParams::zeros_like(zeroed);
    std::vector<double> d_mean{1.0, -1.0};
    backward(zeroed, cache, d_mean, 0.5, grads);
    for (double g : grads.pi_layers[0].w.data) CHECK(g == 0.0);
    for (double g : grads.vf_layers[0].w.data) CHECK(g == 0.0);
  }

  SUBCASE("log_std receives no gradient from the network backward pass") {
    auto rng = make_rng(8);
    auto s = random_state(params.input_dim, rng);
    ForwardCache cache;
    forward(params, s, &cache);
    auto grads = PolicyParams::zeros_like(params);
    std::vector<double> d_mean{0.3, 0.7};
    backward(params, cache, d_mean, 1.0, grads);
    for (double g : grads.log_std) CHECK(g == 0.0);
  }

  SUBCASE("value gradient does not touch the policy trunk and vice versa") {
    auto rng = make_rng(9);
    auto s = random_state(params.input_dim, rng);
    ForwardCache cache;
    forward(params, s, &cache);

    auto only_value = PolicyParams::zeros_like(params);
    std::vector<double> zero_mean(2, 0.0);
    backward(params, cache, zero_mean, 1.0, only_value);
    for (const auto& layer : only_value.pi_layers) {
      for (double g : layer.w.data) CHECK(g == 0.0);
    }
    for (double g : only_value.mean_w.data) CHECK(g == 0.0);

    auto only_mean = PolicyParams::zeros_like(params);
    std::vector<double> d_mean{1.0, 2.0};
    backward(params, cache, d_mean, 0.0, only_mean);
    for (const auto& layer : only_mean.vf_layers) {
      for (double g : layer.w.data) CHECK(g == 0.0);
    }
    for (double g : only_mean.value_w.data) CHECK(g == 0.0);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  const char* path = "policy_ckpt_tmp.bin";
  auto params = PolicyParams::init(4, 123);
  // touch a few values so the file is not a fresh init
  params.log_std[2] = -0.75;
  params.mean_b[0] = 1e-17;
  params.pi_layers[1].w(3, 5) = -0.123456789012345678;
  save_checkpoint(params, path);
  auto loaded = load_checkpoint(path);

  bool identical = true;
  std::vector<const std::vector<double>*> a, b;
  params.for_each_array([&](const std::vector<double>& v) { a.push_back(&v); });
  loaded.for_each_array([&](const std::vector<double>& v) { b.push_back(&v); });
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && (*a[i] == *b[i]);
  }
  CHECK(identical);
  CHECK(loaded.n_beams == 4);
  std::remove(path);
}

TEST_CASE("checkpoint rejects corrupt files") {
  const char* path = "policy_ckpt_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::remove(path);
  CHECK_THROWS_AS(load_checkpoint("nonexistent_ckpt.bin"), std::runtime_error);

  // truncated file
  auto params = PolicyParams::init(2, 5);
  save_checkpoint(params, path);
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() / 2);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::remove(path);
}
