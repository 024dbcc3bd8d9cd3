#include "beampower/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "beampower/util.hpp"

namespace beampower {

namespace {

constexpr int kHiddenLayers = 4;
constexpr int kWidthPerBeam = 15;
constexpr double kLayerNormEps = 1e-8;

// Orthogonal-ish init: Gaussian draw, modified Gram-Schmidt on the longer
// orientation, scaled by `gain`.
Matrix orthogonal_init(int rows, int cols, double gain, std::mt19937_64& rng) {
  int n = std::max(rows, cols);
  int m = std::min(rows, cols);
  std::vector<std::vector<double>> q(m, std::vector<double>(n));
  for (auto& col : q) {
    for (double& v : col) v = normal(rng);
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += q[i][k] * q[j][k];
      for (int k = 0; k < n; ++k) q[i][k] -= dot * q[j][k];
    }
    double norm = 0.0;
    for (double v : q[i]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) norm = 1.0;  // degenerate draw, keep finite
    for (double& v : q[i]) v /= norm;
  }
  Matrix w(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      w(r, c) = gain * (rows >= cols ? q[c][r] : q[r][c]);
    }
  }
  return w;
}

void matvec(const Matrix& w, std::span<const double> x, const std::vector<double>& b,
            std::vector<double>& out) {
  out.resize(w.rows);
  for (int r = 0; r < w.rows; ++r) {
    double acc = b[r];
    const double* row = w.data.data() + static_cast<std::size_t>(r) * w.cols;
    for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

std::vector<HiddenLayer> trunk_shape(int input_dim, int hidden_dim) {
  std::vector<HiddenLayer> layers(kHiddenLayers);
  int in = input_dim;
  for (auto& layer : layers) {
    layer.w = Matrix(hidden_dim, in);
    layer.b.assign(hidden_dim, 0.0);
    layer.ln_gain.assign(hidden_dim, 1.0);
    layer.ln_offset.assign(hidden_dim, 0.0);
    in = hidden_dim;
  }
  return layers;
}

PolicyParams with_shape(int n_beams) {
  if (n_beams < 1) throw std::invalid_argument("policy: n_beams must be >= 1");
  PolicyParams p;
  p.n_beams = n_beams;
  p.input_dim = 5 * n_beams;
  p.hidden_dim = kWidthPerBeam * n_beams;
  p.pi_layers = trunk_shape(p.input_dim, p.hidden_dim);
  p.vf_layers = trunk_shape(p.input_dim, p.hidden_dim);
  p.mean_w = Matrix(n_beams, p.hidden_dim);
  p.mean_b.assign(n_beams, 0.0);
  p.value_w = Matrix(1, p.hidden_dim);
  p.value_b.assign(1, 0.0);
  p.log_std.assign(n_beams, 0.0);
  return p;
}

void init_trunk(std::vector<HiddenLayer>& layers, int input_dim, int hidden_dim,
                std::mt19937_64& rng) {
  int in = input_dim;
  for (auto& layer : layers) {
    layer.w = orthogonal_init(hidden_dim, in, std::sqrt(2.0), rng);
    in = hidden_dim;
  }
}

// Runs one trunk; fills `cache_layers` when non-null.
void trunk_forward(const std::vector<HiddenLayer>& layers,
                   std::span<const double> input, int hidden_dim,
                   std::vector<ForwardCache::LayerCache>* cache_layers,
                   std::vector<double>& top) {
  const int h = hidden_dim;
  if (cache_layers) cache_layers->resize(layers.size());

  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> pre, relu, xhat;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    matvec(layer.w, cur, layer.b, pre);

    relu.resize(h);
    double mean_acc = 0.0;
    for (int i = 0; i < h; ++i) {
      relu[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      mean_acc += relu[i];
    }
    double mu = mean_acc / h;
    double var_acc = 0.0;
    for (int i = 0; i < h; ++i) {
      double d = relu[i] - mu;
      var_acc += d * d;
    }
    double inv_std = 1.0 / std::sqrt(var_acc / h + kLayerNormEps);

    xhat.resize(h);
    cur.resize(h);
    for (int i = 0; i < h; ++i) {
      xhat[i] = (relu[i] - mu) * inv_std;
      cur[i] = layer.ln_gain[i] * xhat[i] + layer.ln_offset[i];
    }
    if (cache_layers) {
      auto& lc = (*cache_layers)[l];
      lc.pre_act = pre;
      lc.relu = relu;
      lc.xhat = xhat;
      lc.inv_std = inv_std;
      lc.out = cur;
    }
  }
  top = std::move(cur);
}

// Backpropagates `d_top` through one trunk, accumulating into `grads`.
void trunk_backward(const std::vector<HiddenLayer>& layers,
                    const std::vector<ForwardCache::LayerCache>& cache_layers,
                    std::span<const double> input, int hidden_dim,
                    std::vector<double> d_top, std::vector<HiddenLayer>& grads) {
  const int h = hidden_dim;
  std::vector<double> d_xhat(h), d_relu(h), d_prev;
  std::vector<double> d_cur = std::move(d_top);

  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto& layer = layers[l];
    const auto& lc = cache_layers[l];

    double sum_dx = 0.0;
    double sum_dx_xhat = 0.0;
    for (int i = 0; i < h; ++i) {
      grads[l].ln_offset[i] += d_cur[i];
      grads[l].ln_gain[i] += d_cur[i] * lc.xhat[i];
      d_xhat[i] = d_cur[i] * layer.ln_gain[i];
      sum_dx += d_xhat[i];
      sum_dx_xhat += d_xhat[i] * lc.xhat[i];
    }
    double mean_dx = sum_dx / h;
    double mean_dx_xhat = sum_dx_xhat / h;
    for (int i = 0; i < h; ++i) {
      double da = lc.inv_std * (d_xhat[i] - mean_dx - lc.xhat[i] * mean_dx_xhat);
      d_relu[i] = lc.pre_act[i] > 0.0 ? da : 0.0;
    }

    std::span<const double> below =
        l == 0 ? input : std::span<const double>(cache_layers[l - 1].out);
    d_prev.assign(below.size(), 0.0);
    for (int r = 0; r < h; ++r) {
      grads[l].b[r] += d_relu[r];
      double g = d_relu[r];
      double* wg = grads[l].w.data.data() + static_cast<std::size_t>(r) * layer.w.cols;
      const double* wr = layer.w.data.data() + static_cast<std::size_t>(r) * layer.w.cols;
      for (int c = 0; c < layer.w.cols; ++c) {
        wg[c] += g * below[c];
        d_prev[c] += wr[c] * g;
      }
    }
    d_cur = d_prev;
  }
}

}  // namespace

PolicyParams PolicyParams::init(int n_beams, uint64_t seed) {
  PolicyParams p = with_shape(n_beams);
  auto rng = make_rng(seed, 0x706f6c69ULL);
  init_trunk(p.pi_layers, p.input_dim, p.hidden_dim, rng);
  init_trunk(p.vf_layers, p.input_dim, p.hidden_dim, rng);
  p.mean_w = orthogonal_init(n_beams, p.hidden_dim, 0.01, rng);
  p.value_w = orthogonal_init(1, p.hidden_dim, 1.0, rng);
  return p;
}

PolicyParams PolicyParams::zeros_like(const PolicyParams& other) {
  PolicyParams p = other;
  p.for_each_array([](std::vector<double>& a) { std::fill(a.begin(), a.end(), 0.0); });
  return p;
}

void PolicyParams::for_each_array(const std::function<void(std::vector<double>&)>& fn) {
  for (auto* trunk : {&pi_layers, &vf_layers}) {
    for (auto& layer : *trunk) {
      fn(layer.w.data);
      fn(layer.b);
      fn(layer.ln_gain);
      fn(layer.ln_offset);
    }
  }
  fn(mean_w.data);
  fn(mean_b);
  fn(value_w.data);
  fn(value_b);
  fn(log_std);
}

void PolicyParams::for_each_array(
    const std::function<void(const std::vector<double>&)>& fn) const {
  const_cast<PolicyParams*>(this)->for_each_array(
      [&](std::vector<double>& a) { fn(a); });
}

std::vector<double> DiagGaussian::sample(std::mt19937_64& rng) const {
  std::vector<double> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    out[i] = mean[i] + std::exp(log_std[i]) * normal(rng);
  }
  return out;
}

double DiagGaussian::log_prob(std::span<const double> action) const {
  if (action.size() != mean.size()) {
    throw std::invalid_argument("log_prob: action length mismatch");
  }
  constexpr double half_log_2pi = 0.9189385332046727;  // ln(2*pi)/2
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return lp;
}

double DiagGaussian::entropy() const {
  constexpr double half_log_2pi_e = 1.4189385332046727;  // (1 + ln(2*pi)) / 2
  double h = 0.0;
  for (double s : log_std) h += s + half_log_2pi_e;
  return h;
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> state,
                     ForwardCache* cache) {
  if (static_cast<int>(state.size()) != params.input_dim) {
    throw std::invalid_argument("policy forward: input length mismatch");
  }
  if (cache) cache->input.assign(state.begin(), state.end());

  std::vector<double> pi_top, vf_top;
  trunk_forward(params.pi_layers, state, params.hidden_dim,
                cache ? &cache->pi_layers : nullptr, pi_top);
  trunk_forward(params.vf_layers, state, params.hidden_dim,
                cache ? &cache->vf_layers : nullptr, vf_top);

  PolicyOutput result;
  matvec(params.mean_w, pi_top, params.mean_b, result.dist.mean);
  result.dist.log_std = params.log_std;
  std::vector<double> value_out;
  matvec(params.value_w, vf_top, params.value_b, value_out);
  result.value = value_out[0];
  return result;
}

void backward(const PolicyParams& params, const ForwardCache& cache,
              std::span<const double> d_mean, double d_value,
              PolicyParams& grads) {
  const int h = params.hidden_dim;
  const int nb = params.n_beams;
  if (static_cast<int>(d_mean.size()) != nb) {
    throw std::invalid_argument("policy backward: d_mean length mismatch");
  }

  // Policy head and trunk.
  const auto& pi_top = cache.pi_layers.back().out;
  std::vector<double> d_pi(h, 0.0);
  for (int r = 0; r < nb; ++r) {
    grads.mean_b[r] += d_mean[r];
    for (int c = 0; c < h; ++c) {
      grads.mean_w(r, c) += d_mean[r] * pi_top[c];
      d_pi[c] += params.mean_w(r, c) * d_mean[r];
    }
  }
  trunk_backward(params.pi_layers, cache.pi_layers, cache.input, h,
                 std::move(d_pi), grads.pi_layers);

  // Value head and trunk.
  const auto& vf_top = cache.vf_layers.back().out;
  std::vector<double> d_vf(h, 0.0);
  grads.value_b[0] += d_value;
  for (int c = 0; c < h; ++c) {
    grads.value_w(0, c) += d_value * vf_top[c];
    d_vf[c] += params.value_w(0, c) * d_value;
  }
  trunk_backward(params.vf_layers, cache.vf_layers, cache.input, h,
                 std::move(d_vf), grads.vf_layers);
}

double global_norm(const PolicyParams& grads) {
  double sq = 0.0;
  grads.for_each_array([&](const std::vector<double>& a) {
    for (double v : a) sq += v * v;
  });
  return std::sqrt(sq);
}

namespace {

constexpr char kMagic[8] = {'B', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, 1);  // format version
  write_u32(out, static_cast<uint32_t>(params.n_beams));
  write_u32(out, static_cast<uint32_t>(params.input_dim));
  write_u32(out, static_cast<uint32_t>(params.hidden_dim));
  write_u32(out, static_cast<uint32_t>(params.pi_layers.size()));
  params.for_each_array([&](const std::vector<double>& a) {
    out.write(reinterpret_cast<const char*>(a.data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  uint32_t version = read_u32(in);
  if (version != 1) {
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  }
  uint32_t n_beams = read_u32(in);
  uint32_t input_dim = read_u32(in);
  uint32_t hidden_dim = read_u32(in);
  uint32_t n_layers = read_u32(in);
  if (n_beams < 1 || input_dim != 5 * n_beams ||
      hidden_dim != static_cast<uint32_t>(kWidthPerBeam) * n_beams ||
      n_layers != kHiddenLayers) {
    throw std::runtime_error("checkpoint: inconsistent dimensions in " + path);
  }
  PolicyParams p = with_shape(static_cast<int>(n_beams));
  p.for_each_array([&](std::vector<double>& a) {
    in.read(reinterpret_cast<char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(double)));
  });
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  char extra;
  if (in.read(&extra, 1)) {
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  }
  return p;
}

}  // namespace beampower
