#pragma once

// Deterministic DDIM sampling on a log-SNR grid shared by all schedules.
//
// The grid is fixed by the cosine schedule: t_i = t_max (1 - i / steps) and
// lambda_i = lambda_cosine(t_i). A model trained under another schedule is
// conditioned on t'_i = P_schedule(lambda_i), the time at which that schedule
// reaches the same noise level, so every schedule is sampled through the same
// sequence of (alpha, sigma).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "snrforge/dataset.hpp"
#include "snrforge/diffusion.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/mlp.hpp"
#include "snrforge/rng.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/train.hpp"

namespace snrforge {

inline constexpr double kDefaultTMax = 0.99;

struct SamplePlan {
  ScheduleSpec schedule;
  int steps = 0;
  double t_max = kDefaultTMax;
  /// Uniform grid t_0 = t_max > ... > t_steps = 0.
  std::vector<double> t;
  /// Cosine log-SNR at each grid time; increases along the trajectory.
  std::vector<double> lambdas;
  /// Conditioning time of `schedule` at each lambda.
  std::vector<double> t_primes;
};

inline SamplePlan build_plan(const ScheduleSpec &schedule, int steps, double t_max = kDefaultTMax) {
  schedule.validate();
  if (steps < 1) {
    throw domain_error("build_plan: steps must be >= 1");
  }
  if (!(t_max > 0.0 && t_max <= 1.0)) {
    throw domain_error("build_plan: t_max must lie in (0, 1]");
  }
  const ScheduleSpec reference{family::Cosine{}, schedule.clamp};
  SamplePlan plan{schedule, steps, t_max, {}, {}, {}};
  const auto count = static_cast<std::size_t>(steps) + 1;
  plan.t.reserve(count);
  plan.lambdas.reserve(count);
  plan.t_primes.reserve(count);
  for (int i = 0; i <= steps; ++i) {
    const double t = t_max * (1.0 - static_cast<double>(i) / steps);
    const double lam = lambda_of_t(reference, t);
    // the endpoint conventions of lambda_of_t (0 -> lambda_max, 1 -> lambda_min) carry over
    double t_prime = survival(schedule, lam);
    if (t == 0.0) {
      t_prime = 0.0;
    } else if (t == 1.0) {
      t_prime = 1.0;
    }
    plan.t.push_back(t);
    plan.lambdas.push_back(lam);
    plan.t_primes.push_back(t_prime);
  }
  return plan;
}

/// x_next = alpha(lambda_next) x0_hat + sigma(lambda_next) eps_hat.
inline Vec2 ddim_step(const Vec2 & /*x_t*/, const Vec2 &x0_hat, const Vec2 &eps_hat,
                      double lam_next) {
  const auto [alpha, sigma] = alpha_sigma(lam_next);
  return alpha * x0_hat + sigma * eps_hat;
}

/// Initial noise of point i; depends only on (seed, i).
inline Vec2 initial_noise(std::uint64_t seed, std::size_t index) {
  Engine rng = make_engine(seed, Stream::sampling, index);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double a = gauss(rng);
  const double b = gauss(rng);
  return {a, b};
}

/// Points are integrated in chunks of this many columns; the last chunk is padded.
inline constexpr std::size_t kSampleChunk = 256;

/// Runs the plan with any batched predictor `(const Matrix2Xd &x_t, span<const double> t)
/// -> Matrix2Xd` whose outputs follow `target`'s convention.
///
/// The last step returns x0_hat directly. Every chunk has the same width, so the
/// result for point i depends only on (seed, i) and not on n or the thread count.
template <class Predictor>
std::vector<Vec2> sample_with(Predictor &&predict, PredictTarget target, const SamplePlan &plan,
                              std::size_t n, std::uint64_t seed, unsigned threads = 1) {
  if (plan.steps < 1 || plan.lambdas.size() != static_cast<std::size_t>(plan.steps) + 1) {
    throw domain_error("sample: malformed plan");
  }
  std::vector<Vec2> out(n);
  if (n == 0) {
    return out;
  }
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  const auto cols = static_cast<Eigen::Index>(kSampleChunk);

  // returns the failing step, or -1
  auto run_chunk = [&](std::size_t chunk) -> int {
    const std::size_t first = chunk * kSampleChunk;
    const std::size_t live = std::min(kSampleChunk, n - first);
    Eigen::Matrix2Xd x = Eigen::Matrix2Xd::Zero(2, cols);
    for (std::size_t j = 0; j < live; ++j) {
      x.col(static_cast<Eigen::Index>(j)) = initial_noise(seed, first + j);
    }
    std::vector<double> t_cond(kSampleChunk);
    for (int i = 0; i < plan.steps; ++i) {
      const auto si = static_cast<std::size_t>(i);
      std::fill(t_cond.begin(), t_cond.end(), plan.t_primes[si]);
      const Eigen::Matrix2Xd pred = predict(x, std::span<const double>(t_cond));
      const bool last = i + 1 == plan.steps;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const auto est = to_x0_eps(target, pred.col(j), x.col(j), plan.lambdas[si]);
        x.col(j) = last ? est.x0 : ddim_step(x.col(j), est.x0, est.eps, plan.lambdas[si + 1]);
      }
      if (!x.leftCols(static_cast<Eigen::Index>(live)).allFinite()) {
        return i;
      }
    }
    for (std::size_t j = 0; j < live; ++j) {
      out[first + j] = x.col(static_cast<Eigen::Index>(j));
    }
    return -1;
  };

  std::vector<int> failed(chunks, -1);
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      failed[c] = run_chunk(c);
    }
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = cursor++; c < chunks; c = cursor++) {
          failed[c] = run_chunk(c);
        }
      });
    }
  }
  int first_failure = -1;
  for (int f : failed) {
    if (f >= 0 && (first_failure < 0 || f < first_failure)) {
      first_failure = f;
    }
  }
  if (first_failure >= 0) {
    throw divergence_error("non-finite sampling state", first_failure);
  }
  return out;
}

inline std::vector<Vec2> sample(const ModelParams &params, PredictTarget target,
                                const SamplePlan &plan, std::size_t n, std::uint64_t seed,
                                unsigned threads = 1) {
  return sample_with(
      [&params](const Eigen::Matrix2Xd &x_t, std::span<const double> t) {
        return model_forward(params, x_t, t);
      },
      target, plan, n, seed, threads);
}

/// Samples from a trained state; the plan must be built for the state's schedule.
inline std::vector<Vec2> sample(const TrainState &state, const ScheduleSpec &schedule,
                                const SamplePlan &plan, std::size_t n, std::uint64_t seed,
                                unsigned threads = 1) {
  if (!(plan.schedule == schedule)) {
    throw domain_error("sample: plan was built for a different schedule");
  }
  return sample(state.params, state.config.target, plan, n, seed, threads);
}

} // namespace snrforge
