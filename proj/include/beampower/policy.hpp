#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace beampower {

// Row-major dense matrix, just enough for the policy network.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct HiddenLayer {
  Matrix w;
  std::vector<double> b;
  std::vector<double> ln_gain;    // layer-norm gain, applied after ReLU
  std::vector<double> ln_offset;  // layer-norm offset
};

// Actor-critic MLP: two independent trunks (4 hidden layers of width
// 15*n_beams each, ReLU + layer norm), a mean head on the policy trunk, a
// scalar head on the value trunk, plus a state-independent log-stddev.
// Separate trunks keep the large value-regression gradients out of the
// action pathway, which the clipped surrogate cannot protect on its own.
struct PolicyParams {
  int n_beams = 0;
  int input_dim = 0;
  int hidden_dim = 0;

  std::vector<HiddenLayer> pi_layers;
  std::vector<HiddenLayer> vf_layers;
  Matrix mean_w;
  std::vector<double> mean_b;
  Matrix value_w;  // 1 x hidden
  std::vector<double> value_b;
  std::vector<double> log_std;

  // Orthogonal init: gain sqrt(2) on the trunk, 0.01 on the mean head,
  // 1.0 on the value head; log_std starts at 0.
  static PolicyParams init(int n_beams, uint64_t seed);

  // Zero-filled parameter set with identical shapes (gradient accumulator).
  static PolicyParams zeros_like(const PolicyParams& other);

  // Visits every parameter array in a fixed order (serialization, Adam,
  // gradient clipping, gradient checks).
  void for_each_array(const std::function<void(std::vector<double>&)>& fn);
  void for_each_array(const std::function<void(const std::vector<double>&)>& fn) const;
};

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;

  std::vector<double> sample(std::mt19937_64& rng) const;
  double log_prob(std::span<const double> action) const;
  double entropy() const;
};

// Intermediate activations kept for the backward pass.
struct ForwardCache {
  std::vector<double> input;
  struct LayerCache {
    std::vector<double> pre_act;   // W x + b
    std::vector<double> relu;      // max(pre_act, 0)
    std::vector<double> xhat;      // normalized relu, before gain/offset
    double inv_std = 0.0;
    std::vector<double> out;       // gain * xhat + offset
  };
  std::vector<LayerCache> pi_layers;
  std::vector<LayerCache> vf_layers;
};

struct PolicyOutput {
  DiagGaussian dist;
  double value = 0.0;
};

// Deterministic forward pass; throws on input length mismatch. When `cache`
// is non-null it is filled for a subsequent backward() call.
PolicyOutput forward(const PolicyParams& params, std::span<const double> state,
                     ForwardCache* cache = nullptr);

// Accumulates exact reverse-mode gradients of (d_mean . mean + d_value * value)
// into `grads` (same shapes as `params`). log_std has no network path, so its
// gradient is the caller's responsibility.
void backward(const PolicyParams& params, const ForwardCache& cache,
              std::span<const double> d_mean, double d_value,
              PolicyParams& grads);

double global_norm(const PolicyParams& grads);

// Binary checkpoint with magic/version/dims header; round-trip is bit-exact.
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace beampower
