#pragma once

// Variance-preserving frame algebra: x_t = alpha x + sigma eps, v = alpha eps - sigma x.

#include <string>
#include <string_view>

#include "snrforge/dataset.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/schedule.hpp"

namespace snrforge {

enum class PredictTarget { Epsilon, X0, V };

inline std::string_view target_name(PredictTarget t) {
  switch (t) {
  case PredictTarget::Epsilon:
    return "epsilon";
  case PredictTarget::X0:
    return "x0";
  case PredictTarget::V:
    return "v";
  }
  return "unknown";
}

inline PredictTarget target_from_name(std::string_view name) {
  if (name == "epsilon" || name == "eps" || name == "noise") {
    return PredictTarget::Epsilon;
  }
  if (name == "x0") {
    return PredictTarget::X0;
  }
  if (name == "v") {
    return PredictTarget::V;
  }
  throw parse_error("unknown predict target '" + std::string(name) + "'");
}

/// Below this, dividing by alpha or sigma is refused.
inline constexpr double kMinCoefficient = 1e-12;

inline Vec2 forward_noise(const Vec2 &x, double lam, const Vec2 &eps) {
  const auto [alpha, sigma] = alpha_sigma(lam);
  return alpha * x + sigma * eps;
}

inline Vec2 make_target(PredictTarget target, const Vec2 &x, const Vec2 &eps, double lam) {
  switch (target) {
  case PredictTarget::Epsilon:
    return eps;
  case PredictTarget::X0:
    return x;
  case PredictTarget::V: {
    const auto [alpha, sigma] = alpha_sigma(lam);
    return alpha * eps - sigma * x;
  }
  }
  return eps;
}

/// d eps_hat / d prediction; the conversion is a scalar multiple of the identity.
inline double eps_jacobian(PredictTarget target, const VpCoeffs &c) {
  switch (target) {
  case PredictTarget::Epsilon:
    return 1.0;
  case PredictTarget::V:
    return c.alpha;
  case PredictTarget::X0:
    return -c.alpha / c.sigma;
  }
  return 1.0;
}

/// The epsilon estimate implied by a prediction in any target convention.
inline Vec2 to_eps_residual(PredictTarget target, const Vec2 &prediction, const Vec2 &x_t,
                            double lam) {
  const auto c = alpha_sigma(lam);
  switch (target) {
  case PredictTarget::Epsilon:
    return prediction;
  case PredictTarget::V:
    return c.sigma * x_t + c.alpha * prediction;
  case PredictTarget::X0:
    if (c.sigma < kMinCoefficient) {
      throw degenerate_conversion_error("to_eps_residual: sigma underflow at lambda = " +
                                        std::to_string(lam));
    }
    return (x_t - c.alpha * prediction) / c.sigma;
  }
  return prediction;
}

struct DenoiseEstimate {
  Vec2 x0;
  Vec2 eps;
};

/// Both x0 and eps estimates from one prediction.
inline DenoiseEstimate to_x0_eps(PredictTarget target, const Vec2 &prediction, const Vec2 &x_t,
                                 double lam) {
  const auto c = alpha_sigma(lam);
  switch (target) {
  case PredictTarget::Epsilon:
    if (c.alpha < kMinCoefficient) {
      throw degenerate_conversion_error("to_x0_eps: alpha underflow");
    }
    return {(x_t - c.sigma * prediction) / c.alpha, prediction};
  case PredictTarget::X0:
    return {prediction, to_eps_residual(target, prediction, x_t, lam)};
  case PredictTarget::V:
    return {c.alpha * x_t - c.sigma * prediction, c.sigma * x_t + c.alpha * prediction};
  }
  return {prediction, prediction};
}

} // namespace snrforge
