#pragma once

// Fully connected denoiser: [x_t, sin/cos time embedding] -> H -> H -> 2.
//
// Hidden activations are SiLU (x * sigmoid(x)), which is smooth, so central
// finite differences track the analytic gradient closely. The gradient is
// computed by hand-written reverse-mode accumulation through the three layers.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "snrforge/dataset.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/rng.hpp"

namespace snrforge {

/// Parameter-sized buffers. Eigen picks its vectorized kernels by address
/// alignment, so a fixed alignment keeps results bitwise reproducible.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct ModelConfig {
  int hidden = 128;
  /// Number of (sin, cos) frequency pairs; periods span 1 down to 1e-3.
  int freqs = 16;

  int input_dim() const { return 2 + 2 * freqs; }
  bool operator==(const ModelConfig &) const = default;
};

struct ModelParams {
  ModelConfig config;
  /// W1 (H x in), b1, W2 (H x H), b2, W3 (2 x H), b3; column-major.
  ParamVector values;
};

struct ParamLayout {
  std::size_t w1, b1, w2, b2, w3, b3, total;

  explicit ParamLayout(const ModelConfig &c) {
    const auto h = static_cast<std::size_t>(c.hidden);
    const auto in = static_cast<std::size_t>(c.input_dim());
    w1 = 0;
    b1 = w1 + h * in;
    w2 = b1 + h;
    b2 = w2 + h * h;
    w3 = b2 + h;
    b3 = w3 + 2 * h;
    total = b3 + 2;
  }
};

inline void validate(const ModelConfig &c) {
  if (c.hidden < 1 || c.freqs < 1) {
    throw domain_error("model config: hidden and freqs must be >= 1");
  }
}

inline ModelParams zero_params(const ModelConfig &config) {
  validate(config);
  return {config, ParamVector(ParamLayout(config).total, 0.0)};
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline ModelParams init_params(const ModelConfig &config, std::uint64_t seed) {
  ModelParams p = zero_params(config);
  const ParamLayout l(config);
  Engine rng = make_engine(seed, Stream::init);
  auto fill = [&](std::size_t begin, std::size_t end, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = begin; i < end; ++i) {
      p.values[i] = u(rng);
    }
  };
  fill(l.w1, l.b1, config.input_dim());
  fill(l.w2, l.b2, config.hidden);
  fill(l.w3, l.b3, config.hidden);
  return p;
}

/// Angular frequencies 2 pi / period, periods log-spaced from 1 to 1e-3.
inline std::vector<double> embedding_frequencies(int freqs) {
  std::vector<double> w(static_cast<std::size_t>(freqs));
  for (int k = 0; k < freqs; ++k) {
    const double exponent = freqs == 1 ? 0.0 : -3.0 * k / (freqs - 1.0);
    w[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi / std::pow(10.0, exponent);
  }
  return w;
}

/// Activations kept from the forward pass for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd z1, a1, z2, a2;
  Eigen::Matrix2Xd output;
};

namespace mlp_detail {

using CMap = Eigen::Map<const Eigen::MatrixXd>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void silu(const Eigen::MatrixXd &z, Eigen::MatrixXd &a) {
  a = z.unaryExpr([](double x) { return x * sigmoid(x); });
}

inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

} // namespace mlp_detail

/// Builds the (2 + 2F) x B input matrix from noisy points and conditioning times.
inline Eigen::MatrixXd embed_inputs(const ModelConfig &config, const Eigen::Matrix2Xd &x_t,
                                    std::span<const double> t) {
  const auto batch = x_t.cols();
  if (static_cast<std::size_t>(batch) != t.size()) {
    throw domain_error("model_forward: x_t and t batch sizes differ");
  }
  const auto omega = embedding_frequencies(config.freqs);
  Eigen::MatrixXd in(config.input_dim(), batch);
  in.topRows<2>() = x_t;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double tj = t[static_cast<std::size_t>(j)];
    for (int k = 0; k < config.freqs; ++k) {
      const double arg = omega[static_cast<std::size_t>(k)] * tj;
      in(2 + 2 * k, j) = std::sin(arg);
      in(3 + 2 * k, j) = std::cos(arg);
    }
  }
  return in;
}

/// Batched forward pass; columns of x_t are points, t holds one time per column.
inline void model_forward(const ModelParams &params, const Eigen::Matrix2Xd &x_t,
                          std::span<const double> t, ForwardCache &cache) {
  using namespace mlp_detail;
  const auto &c = params.config;
  const ParamLayout l(c);
  const int h = c.hidden;
  const double *v = params.values.data();

  cache.input = embed_inputs(c, x_t, t);
  cache.z1.noalias() = CMap(v + l.w1, h, c.input_dim()) * cache.input;
  cache.z1.colwise() += CVec(v + l.b1, h);
  silu(cache.z1, cache.a1);
  cache.z2.noalias() = CMap(v + l.w2, h, h) * cache.a1;
  cache.z2.colwise() += CVec(v + l.b2, h);
  silu(cache.z2, cache.a2);
  cache.output.noalias() = CMap(v + l.w3, 2, h) * cache.a2;
  cache.output.colwise() += CVec(v + l.b3, 2);
}

inline Eigen::Matrix2Xd model_forward(const ModelParams &params, const Eigen::Matrix2Xd &x_t,
                                      std::span<const double> t) {
  ForwardCache cache;
  model_forward(params, x_t, t, cache);
  return cache.output;
}

inline Vec2 model_forward(const ModelParams &params, const Vec2 &x_t, double t) {
  Eigen::Matrix2Xd x(2, 1);
  x.col(0) = x_t;
  return model_forward(params, x, std::span<const double>(&t, 1)).col(0);
}

/// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
inline void model_backward(const ModelParams &params, const ForwardCache &cache,
                           const Eigen::Matrix2Xd &d_output, std::span<double> grad) {
  using namespace mlp_detail;
  const auto &c = params.config;
  const ParamLayout l(c);
  if (grad.size() != l.total) {
    throw domain_error("model_backward: gradient buffer has the wrong size");
  }
  const int h = c.hidden;
  const double *v = params.values.data();
  double *g = grad.data();

  Map(g + l.w3, 2, h).noalias() += d_output * cache.a2.transpose();
  Vec(g + l.b3, 2) += d_output.rowwise().sum();

  Eigen::MatrixXd dz2 = CMap(v + l.w3, 2, h).transpose() * d_output;
  dz2.array() *= cache.z2.unaryExpr(&silu_grad).array();
  Map(g + l.w2, h, h).noalias() += dz2 * cache.a1.transpose();
  Vec(g + l.b2, h) += dz2.rowwise().sum();

  Eigen::MatrixXd dz1 = CMap(v + l.w2, h, h).transpose() * dz2;
  dz1.array() *= cache.z1.unaryExpr(&silu_grad).array();
  Map(g + l.w1, h, c.input_dim()).noalias() += dz1 * cache.input.transpose();
  Vec(g + l.b1, h) += dz1.rowwise().sum();
}

} // namespace snrforge
