#pragma once

// Training loop of the toy diffusion lab: draw t ~ U(0, 1), map it to lambda through
// the schedule, noise a minibatch, regress the chosen target, step Adam.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "snrforge/dataset.hpp"
#include "snrforge/diffusion.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/mlp.hpp"
#include "snrforge/rng.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/weighting.hpp"

namespace snrforge {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  ScheduleSpec schedule{};
  WeightStrategy weighting = weights::Constant{};
  PredictTarget target = PredictTarget::V;
  ModelConfig model{};
  AdamConfig adam{};
  std::size_t batch = 256;
  std::uint64_t seed = 0;
  /// Loss trace granularity: one record per window of this many steps.
  std::size_t log_every = 100;
};

inline void validate(const TrainConfig &c) {
  c.schedule.validate();
  validate(c.weighting);
  validate(c.model);
  if (!(c.adam.lr > 0.0) || !std::isfinite(c.adam.lr)) {
    throw domain_error("train config: lr must be > 0");
  }
  if (c.batch == 0) {
    throw domain_error("train config: batch must be >= 1");
  }
  if (c.log_every == 0) {
    throw domain_error("train config: log_every must be >= 1");
  }
}

struct TrainState {
  TrainConfig config;
  ModelParams params;
  ParamVector adam_m;
  ParamVector adam_v;
  std::int64_t step = 0;
  Engine data_rng;
  Engine time_rng;
  Engine noise_rng;
};

inline TrainState make_train_state(const TrainConfig &config) {
  validate(config);
  TrainState s{config,
               init_params(config.model, config.seed),
               {},
               {},
               0,
               make_engine(config.seed, Stream::data),
               make_engine(config.seed, Stream::time),
               make_engine(config.seed, Stream::noise)};
  s.adam_m.assign(s.params.values.size(), 0.0);
  s.adam_v.assign(s.params.values.size(), 0.0);
  return s;
}

/// One fully specified minibatch: clean points, noise, times and log-SNRs.
struct NoisedBatch {
  Eigen::Matrix2Xd x;
  Eigen::Matrix2Xd eps;
  std::vector<double> t;
  std::vector<double> lam;
};

/// Draws t from the time stream and eps from the noise stream for the given points.
inline NoisedBatch draw_noised_batch(std::span<const Vec2> points, const ScheduleSpec &schedule,
                                     Engine &time_rng, Engine &noise_rng) {
  const auto n = static_cast<Eigen::Index>(points.size());
  NoisedBatch b{Eigen::Matrix2Xd(2, n), Eigen::Matrix2Xd(2, n), {}, {}};
  b.t.resize(points.size());
  b.lam.resize(points.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = static_cast<std::size_t>(j);
    b.x.col(j) = points[i];
    b.t[i] = uniform_open(time_rng);
    b.lam[i] = lambda_of_t(schedule, b.t[i]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    b.eps(0, j) = gauss(noise_rng);
    b.eps(1, j) = gauss(noise_rng);
  }
  return b;
}

struct LossAndGrad {
  double loss = 0.0;
  double lambda_mean = 0.0;
  ParamVector grad;
};

/// Weighted epsilon-space loss of a fixed batch and, when want_grad, its exact gradient.
///
/// loss = mean_i m(lambda_i) * |eps_hat_i - eps_i|^2 / 2, with m = sample_multiplier
/// and eps_hat the epsilon implied by the model output in the chosen target convention.
inline LossAndGrad batch_loss(const ModelParams &params, const NoisedBatch &b,
                              const WeightStrategy &weighting, PredictTarget target,
                              bool want_grad = true) {
  const auto n = b.x.cols();
  if (n == 0) {
    throw domain_error("batch_loss: empty batch");
  }
  Eigen::Matrix2Xd x_t(2, n);
  std::vector<VpCoeffs> coeffs(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = static_cast<std::size_t>(j);
    coeffs[i] = alpha_sigma(b.lam[i]);
    x_t.col(j) = coeffs[i].alpha * b.x.col(j) + coeffs[i].sigma * b.eps.col(j);
  }

  ForwardCache cache;
  model_forward(params, x_t, b.t, cache);

  LossAndGrad out;
  Eigen::Matrix2Xd d_output(2, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss_sum = 0.0;
  double lam_sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = static_cast<std::size_t>(j);
    const double m = sample_multiplier(weighting, b.lam[i]);
    const Vec2 eps_hat = to_eps_residual(target, cache.output.col(j), x_t.col(j), b.lam[i]);
    const Vec2 r = eps_hat - b.eps.col(j);
    loss_sum += 0.5 * m * r.squaredNorm();
    lam_sum += b.lam[i];
    d_output.col(j) = inv_n * m * eps_jacobian(target, coeffs[i]) * r;
  }
  out.loss = loss_sum * inv_n;
  out.lambda_mean = lam_sum * inv_n;
  if (want_grad) {
    out.grad.assign(params.values.size(), 0.0);
    model_backward(params, cache, d_output, out.grad);
  }
  return out;
}

/// Loss and gradient for one batch, consuming t and eps from the state's streams.
inline LossAndGrad loss_and_grad(TrainState &state, std::span<const Vec2> batch,
                                 const ScheduleSpec &schedule, const WeightStrategy &weighting,
                                 PredictTarget target) {
  if (batch.empty()) {
    throw domain_error("loss_and_grad: empty batch");
  }
  const NoisedBatch b = draw_noised_batch(batch, schedule, state.time_rng, state.noise_rng);
  LossAndGrad out = batch_loss(state.params, b, weighting, target);
  if (!std::isfinite(out.loss)) {
    throw divergence_error("non-finite training loss", state.step + 1);
  }
  return out;
}

inline LossAndGrad loss_and_grad(TrainState &state, std::span<const Vec2> batch) {
  return loss_and_grad(state, batch, state.config.schedule, state.config.weighting,
                       state.config.target);
}

inline void adam_update(TrainState &state, std::span<const double> grad) {
  const auto &a = state.config.adam;
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(a.beta1, t);
  const double c2 = 1.0 - std::pow(a.beta2, t);
  auto &p = state.params.values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad[i];
    state.adam_m[i] = a.beta1 * state.adam_m[i] + (1.0 - a.beta1) * g;
    state.adam_v[i] = a.beta2 * state.adam_v[i] + (1.0 - a.beta2) * g * g;
    const double m_hat = state.adam_m[i] / c1;
    const double v_hat = state.adam_v[i] / c2;
    p[i] -= a.lr * m_hat / (std::sqrt(v_hat) + a.eps);
  }
}

/// Samples a minibatch (with replacement) from the data stream.
inline std::vector<Vec2> draw_minibatch(TrainState &state, const Dataset2D &data) {
  std::uniform_int_distribution<std::size_t> pick(0, data.points.size() - 1);
  std::vector<Vec2> batch;
  batch.reserve(state.config.batch);
  for (std::size_t i = 0; i < state.config.batch; ++i) {
    batch.push_back(data.points[pick(state.data_rng)]);
  }
  return batch;
}

struct StepResult {
  double loss;
  double lambda_mean;
};

/// One optimizer step; step increases by exactly one.
inline StepResult train_step(TrainState &state, const Dataset2D &data) {
  const auto batch = draw_minibatch(state, data);
  const auto lg = loss_and_grad(state, batch);
  for (double g : lg.grad) {
    if (!std::isfinite(g)) {
      throw divergence_error("non-finite gradient", state.step + 1);
    }
  }
  adam_update(state, lg.grad);
  ++state.step;
  return {lg.loss, lg.lambda_mean};
}

struct LossRecord {
  std::int64_t step;
  double loss;
  double lambda_mean;
};

struct TrainResult {
  TrainState state;
  std::vector<LossRecord> trace;
};

using StepCallback = std::function<void(const TrainState &)>;

/// Runs `iterations` Adam steps from a fresh state, recording windowed mean loss.
///
/// on_step, when set, is called after every step; on divergence the partial
/// trace is kept in `partial` (if given) before the error propagates.
inline TrainResult train(const TrainConfig &config, const Dataset2D &data, std::int64_t iterations,
                         const StepCallback &on_step = {},
                         std::vector<LossRecord> *partial = nullptr) {
  if (iterations < 1) {
    throw domain_error("train: iterations must be >= 1");
  }
  if (data.points.empty()) {
    throw domain_error("train: empty dataset");
  }
  TrainResult result{make_train_state(config), {}};
  double window_loss = 0.0;
  double window_lambda = 0.0;
  std::size_t window = 0;
  auto flush = [&] {
    result.trace.push_back({result.state.step, window_loss / static_cast<double>(window),
                            window_lambda / static_cast<double>(window)});
    window_loss = window_lambda = 0.0;
    window = 0;
  };
  try {
    for (std::int64_t i = 0; i < iterations; ++i) {
      const auto r = train_step(result.state, data);
      window_loss += r.loss;
      window_lambda += r.lambda_mean;
      ++window;
      if (window == config.log_every) {
        flush();
      }
      if (on_step) {
        on_step(result.state);
      }
    }
    if (window > 0) {
      flush();
    }
  } catch (const divergence_error &) {
    if (partial != nullptr) {
      *partial = result.trace;
    }
    throw;
  }
  return result;
}

} // namespace snrforge
