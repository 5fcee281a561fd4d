#pragma once

// Noise schedules viewed as distributions over log-SNR.
//
// Every schedule is described by a density p(lambda) over lambda = log(alpha^2 / sigma^2),
// its survival function t = P(lambda) = 1 - CDF(lambda), and the inverse map
// lambda(t) = P^{-1}(t). Drawing t ~ U(0, 1) and mapping it through lambda(t)
// yields lambda ~ p. All functions here are pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "snrforge/errors.hpp"
#include "snrforge/normal.hpp"

namespace snrforge {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

/// Survival and inverse of the standard cosine schedule, alpha_t = cos(pi t / 2).
namespace cosine_base {

inline double pdf(double lam) noexcept {
  return 1.0 / (2.0 * std::numbers::pi * std::cosh(0.5 * lam));
}

// (2/pi) atan(exp(-lam/2)); each branch keeps the small tail exact.
inline double survival(double lam) noexcept {
  if (lam >= 0.0) {
    return 2.0 / std::numbers::pi * std::atan(std::exp(-0.5 * lam));
  }
  return 1.0 - 2.0 / std::numbers::pi * std::atan(std::exp(0.5 * lam));
}

// 2 log cot(pi t / 2), using 1 - t (exact for t >= 0.5) on the upper half.
inline double inverse(double t) noexcept {
  if (t < 0.5) {
    return -2.0 * std::log(std::tan(0.5 * std::numbers::pi * t));
  }
  return 2.0 * std::log(std::tan(0.5 * std::numbers::pi * (1.0 - t)));
}

} // namespace cosine_base

/// Polynomial warp of uniform timesteps: density C t'^n below 1/2, mirrored above.
inline double poly_time_warp(double t, int n) {
  if (n < 0) {
    throw domain_error("poly_time_warp: n must be >= 0");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw domain_error("poly_time_warp: t must lie in [0, 1]");
  }
  const double k = 1.0 / (n + 1.0);
  const double scale = std::pow(0.5, n * k);
  if (t < 0.5) {
    return scale * std::pow(t, k);
  }
  return 1.0 - scale * std::pow(1.0 - t, k);
}

/// Inverse of poly_time_warp: t = 2^n t'^(n+1) below 1/2, mirrored above.
inline double poly_time_unwarp(double t_warped, int n) {
  if (n < 0) {
    throw domain_error("poly_time_unwarp: n must be >= 0");
  }
  const double c = std::ldexp(1.0, n);
  if (t_warped < 0.5) {
    return c * std::pow(t_warped, n + 1.0);
  }
  return 1.0 - c * std::pow(1.0 - t_warped, n + 1.0);
}

namespace family {

struct Cosine {
  static constexpr std::string_view name = "cosine";
  void validate() const {}
  double pdf(double lam) const { return cosine_base::pdf(lam); }
  double survival(double lam) const { return cosine_base::survival(lam); }
  double inverse(double t) const { return cosine_base::inverse(t); }
  bool operator==(const Cosine &) const = default;
};

struct Laplace {
  static constexpr std::string_view name = "laplace";
  double mu = 0.0;
  double b = 0.5;

  void validate() const {
    if (!std::isfinite(mu) || !(b > 0.0) || !std::isfinite(b)) {
      throw domain_error("laplace: requires finite mu and b > 0");
    }
  }
  double pdf(double lam) const { return std::exp(-std::abs(lam - mu) / b) / (2.0 * b); }
  double survival(double lam) const {
    const double z = (lam - mu) / b;
    return z >= 0.0 ? 0.5 * std::exp(-z) : 1.0 - 0.5 * std::exp(z);
  }
  // mu - b sgn(0.5 - t) ln(1 - 2|t - 0.5|)
  double inverse(double t) const {
    if (t < 0.5) {
      return mu - b * std::log(2.0 * t);
    }
    if (t > 0.5) {
      return mu + b * std::log(2.0 * (1.0 - t));
    }
    return mu;
  }
  bool operator==(const Laplace &) const = default;
};

struct Cauchy {
  static constexpr std::string_view name = "cauchy";
  double mu = 0.0;
  double gamma = 0.5;

  void validate() const {
    if (!std::isfinite(mu) || !(gamma > 0.0) || !std::isfinite(gamma)) {
      throw domain_error("cauchy: requires finite mu and gamma > 0");
    }
  }
  double pdf(double lam) const {
    const double d = lam - mu;
    return gamma / (std::numbers::pi * (d * d + gamma * gamma));
  }
  // 1/2 - atan(z)/pi, rewritten as atan(1/z)/pi in the upper tail.
  double survival(double lam) const {
    const double z = (lam - mu) / gamma;
    if (z > 1.0) {
      return std::atan(1.0 / z) / std::numbers::pi;
    }
    if (z < -1.0) {
      return 1.0 - std::atan(-1.0 / z) / std::numbers::pi;
    }
    return 0.5 - std::atan(z) / std::numbers::pi;
  }
  // mu + gamma tan(pi/2 (1 - 2t)) = mu + gamma cot(pi t)
  double inverse(double t) const {
    if (t <= 0.5) {
      return mu + gamma / std::tan(std::numbers::pi * t);
    }
    return mu - gamma / std::tan(std::numbers::pi * (1.0 - t));
  }
  bool operator==(const Cauchy &) const = default;
};

struct CosineShifted {
  static constexpr std::string_view name = "cosine_shifted";
  double mu = 0.0;

  void validate() const {
    if (!std::isfinite(mu)) {
      throw domain_error("cosine_shifted: mu must be finite");
    }
  }
  double pdf(double lam) const { return cosine_base::pdf(lam - mu); }
  double survival(double lam) const { return cosine_base::survival(lam - mu); }
  double inverse(double t) const { return mu + cosine_base::inverse(t); }
  bool operator==(const CosineShifted &) const = default;
};

struct CosineScaled {
  static constexpr std::string_view name = "cosine_scaled";
  double s = 1.0;

  void validate() const {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw domain_error("cosine_scaled: requires s > 0");
    }
  }
  double pdf(double lam) const { return s * cosine_base::pdf(s * lam); }
  double survival(double lam) const { return cosine_base::survival(s * lam); }
  double inverse(double t) const { return cosine_base::inverse(t) / s; }
  bool operator==(const CosineScaled &) const = default;
};

/// Cosine schedule driven by polynomially warped timesteps.
struct CosinePoly {
  static constexpr std::string_view name = "cosine_poly";
  int n = 2;

  void validate() const {
    if (n < 0) {
      throw domain_error("cosine_poly: n must be >= 0");
    }
  }
  // (n+1) 4^n / pi^(n+1) * atan^n(e^{-|l|/2}) * e^{-|l|/2} / (1 + e^{-|l|})
  double pdf(double lam) const {
    const double a = std::abs(lam);
    const double e = std::exp(-0.5 * a);
    const double scale = (n + 1.0) * std::pow(4.0, n) / std::pow(std::numbers::pi, n + 1.0);
    return scale * std::pow(std::atan(e), n) * e / (1.0 + e * e);
  }
  // Exact composition: t' = cosine survival, then undo the warp.
  double survival(double lam) const {
    if (lam >= 0.0) {
      return poly_time_unwarp(cosine_base::survival(lam), n);
    }
    return 1.0 - poly_time_unwarp(cosine_base::survival(-lam), n);
  }
  double inverse(double t) const { return cosine_base::inverse(poly_time_warp(t, n)); }
  bool operator==(const CosinePoly &) const = default;
};

/// Gaussian over lambda induced by a log-normal sigma; EDM uses N(2.4, 2.4^2).
struct EdmLogNormal {
  static constexpr std::string_view name = "edm_log_normal";
  double mean = 2.4;
  double stddev = 2.4;

  void validate() const {
    if (!std::isfinite(mean) || !(stddev > 0.0) || !std::isfinite(stddev)) {
      throw domain_error("edm_log_normal: requires finite mean and std > 0");
    }
  }
  double pdf(double lam) const { return normal::pdf((lam - mean) / stddev) / stddev; }
  double survival(double lam) const { return normal::upper_cdf((lam - mean) / stddev); }
  double inverse(double t) const { return mean + stddev * normal::upper_quantile(t); }
  bool operator==(const EdmLogNormal &) const = default;
};

/// Rectified flow with uniform t: lambda = 2 log((1 - t) / t).
struct FlowMatchOT {
  static constexpr std::string_view name = "flow_match_ot";
  void validate() const {}
  double pdf(double lam) const {
    const double c = std::cosh(0.25 * lam);
    return 1.0 / (8.0 * c * c);
  }
  double survival(double lam) const {
    if (lam >= 0.0) {
      const double e = std::exp(-0.5 * lam);
      return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(0.5 * lam));
  }
  double inverse(double t) const { return 2.0 * (std::log1p(-t) - std::log(t)); }
  bool operator==(const FlowMatchOT &) const = default;
};

/// Flow matching with logit-normal timesteps; lambda ~ N(-2 mu, 4 sigma^2).
struct FmLogitNormal {
  static constexpr std::string_view name = "fm_logit_normal";
  double mu = 0.0;
  double sigma = 1.0;

  void validate() const {
    if (!std::isfinite(mu) || !(sigma > 0.0) || !std::isfinite(sigma)) {
      throw domain_error("fm_logit_normal: requires finite mu and sigma > 0");
    }
  }
  double lambda_mean() const { return -2.0 * mu; }
  double lambda_std() const { return 2.0 * sigma; }
  double pdf(double lam) const {
    return normal::pdf((lam - lambda_mean()) / lambda_std()) / lambda_std();
  }
  double survival(double lam) const {
    return normal::upper_cdf((lam - lambda_mean()) / lambda_std());
  }
  double inverse(double t) const { return lambda_mean() + lambda_std() * normal::upper_quantile(t); }
  bool operator==(const FmLogitNormal &) const = default;
};

} // namespace family

using ScheduleParams =
    std::variant<family::Cosine, family::Laplace, family::Cauchy, family::CosineShifted,
                 family::CosineScaled, family::CosinePoly, family::EdmLogNormal,
                 family::FlowMatchOT, family::FmLogitNormal>;

struct LambdaClamp {
  double lo = -15.0;
  double hi = 15.0;
  bool operator==(const LambdaClamp &) const = default;
};

struct ScheduleSpec {
  ScheduleParams params = family::Cosine{};
  LambdaClamp clamp{};

  bool operator==(const ScheduleSpec &) const = default;

  std::string_view family_name() const {
    return std::visit([](const auto &f) { return std::decay_t<decltype(f)>::name; }, params);
  }

  /// Throws domain_error unless every scale parameter is positive and lo < 0 < hi.
  void validate() const {
    std::visit([](const auto &f) { f.validate(); }, params);
    if (!std::isfinite(clamp.lo) || !std::isfinite(clamp.hi) || !(clamp.lo < 0.0) ||
        !(clamp.hi > 0.0)) {
      throw domain_error("lambda_clamp must satisfy lambda_min < 0 < lambda_max");
    }
  }
};

inline ScheduleSpec make_schedule(ScheduleParams params, LambdaClamp clamp = {}) {
  ScheduleSpec spec{std::move(params), clamp};
  spec.validate();
  return spec;
}

/// Density p(lambda), normalized over the whole real line.
inline double pdf(const ScheduleSpec &spec, double lam) {
  spec.validate();
  if (!std::isfinite(lam)) {
    throw domain_error("pdf: lambda must be finite");
  }
  return std::visit([lam](const auto &f) { return f.pdf(lam); }, spec.params);
}

/// t = P(lambda) = 1 - integral of p up to lambda. Non-increasing in lambda.
inline double survival(const ScheduleSpec &spec, double lam) {
  spec.validate();
  if (std::isnan(lam)) {
    throw domain_error("survival: lambda is NaN");
  }
  if (lam == -INFINITY) {
    return 1.0;
  }
  if (lam == INFINITY) {
    return 0.0;
  }
  return std::clamp(std::visit([lam](const auto &f) { return f.survival(lam); }, spec.params),
                    0.0, 1.0);
}

/// Unclamped lambda(t) for t strictly inside (0, 1).
inline double lambda_of_t_unclamped(const ScheduleSpec &spec, double t) {
  return std::visit([t](const auto &f) { return f.inverse(t); }, spec.params);
}

/// lambda(t) = P^{-1}(t), clamped to [lambda_min, lambda_max].
///
/// t = 0 maps to lambda_max and t = 1 to lambda_min; t outside [0, 1] is a domain error.
inline double lambda_of_t(const ScheduleSpec &spec, double t) {
  spec.validate();
  if (!(t >= 0.0 && t <= 1.0)) {
    throw domain_error("lambda_of_t: t must lie in [0, 1]");
  }
  if (t == 0.0) {
    return spec.clamp.hi;
  }
  if (t == 1.0) {
    return spec.clamp.lo;
  }
  const double lam = lambda_of_t_unclamped(spec, t);
  if (std::isnan(lam)) {
    throw domain_error("lambda_of_t: schedule produced NaN");
  }
  return std::clamp(lam, spec.clamp.lo, spec.clamp.hi);
}

/// (alpha, sigma) of the variance-preserving forward process at a given log-SNR.
struct VpCoeffs {
  double alpha;
  double sigma;
};

inline VpCoeffs alpha_sigma(double lam) {
  if (!std::isfinite(lam)) {
    throw domain_error("alpha_sigma: lambda must be finite");
  }
  // alpha^2 = sigmoid(lam), sigma^2 = sigmoid(-lam)
  const double a2 = lam >= 0.0 ? 1.0 / (1.0 + std::exp(-lam)) : std::exp(lam) / (1.0 + std::exp(lam));
  const double s2 = lam >= 0.0 ? std::exp(-lam) / (1.0 + std::exp(-lam)) : 1.0 / (1.0 + std::exp(lam));
  return {std::sqrt(a2), std::sqrt(s2)};
}

/// Self-consistency diagnostics of a schedule over its clamp range.
struct ScheduleReport {
  /// |quadrature of pdf over the clamp range - analytic in-range mass|.
  double normalization_error = 0.0;
  /// max |lambda_of_t(survival(l)) - l| over interior grid points.
  double max_roundtrip_error = 0.0;
  /// max |pdf(l) + dP/dl| with central differences of survival.
  double max_density_vs_derivative_error = 0.0;
  std::size_t grid_size = 0;
  /// survival(lambda_min) - survival(lambda_max); the rest sits in the clamp atoms.
  double in_range_mass = 0.0;
  /// Quadrature of pdf over the clamp range.
  double integral = 0.0;
};

inline constexpr double kRoundtripTailMass = 1e-8;
inline constexpr double kDerivativeStep = 1e-4;

/// Composite Simpson over [lo, hi] using an odd number of nodes >= 3.
template <class F> double simpson(F &&f, double lo, double hi, std::size_t nodes) {
  if (nodes < 3) {
    nodes = 3;
  }
  if (nodes % 2 == 0) {
    ++nodes;
  }
  const std::size_t intervals = nodes - 1;
  const double h = (hi - lo) / static_cast<double>(intervals);
  double acc = f(lo) + f(hi);
  for (std::size_t i = 1; i < intervals; ++i) {
    acc += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(i));
  }
  return acc * h / 3.0;
}

/// Checks normalization, lambda(t)/survival roundtrip and pdf = -dP/dl on a uniform grid.
///
/// The roundtrip is only measured where both tails keep at least kRoundtripTailMass,
/// since t itself cannot resolve smaller tail masses near t = 1.
inline ScheduleReport validate_schedule(const ScheduleSpec &spec, std::size_t grid_points) {
  spec.validate();
  if (grid_points < 100) {
    throw domain_error("validate_schedule: grid_points must be >= 100");
  }
  const double lo = spec.clamp.lo;
  const double hi = spec.clamp.hi;

  ScheduleReport report;
  report.grid_size = grid_points;
  report.integral = simpson([&](double l) { return pdf(spec, l); }, lo, hi, grid_points);
  report.in_range_mass = survival(spec, lo) - survival(spec, hi);
  report.normalization_error = std::abs(report.integral - report.in_range_mass);

  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double h = kDerivativeStep;
  for (std::size_t i = 1; i + 1 < grid_points; ++i) {
    const double lam = lo + step * static_cast<double>(i);
    const double t = survival(spec, lam);
    if (std::min(t, 1.0 - t) >= kRoundtripTailMass) {
      report.max_roundtrip_error =
          std::max(report.max_roundtrip_error, std::abs(lambda_of_t(spec, t) - lam));
    }
    if (lam - h >= lo && lam + h <= hi) {
      const double fd = (survival(spec, lam - h) - survival(spec, lam + h)) / (2.0 * h);
      report.max_density_vs_derivative_error =
          std::max(report.max_density_vs_derivative_error, std::abs(pdf(spec, lam) - fd));
    }
  }
  return report;
}

inline constexpr double kNormalizationTolerance = 1e-4;
/// Normalization bound for the Cauchy family.
inline constexpr double kCauchyNormalizationTolerance = 1e-6;
inline constexpr double kRoundtripTolerance = 1e-6;
inline constexpr double kDensityTolerance = 1e-3;

/// Names of the report fields at or above their documented threshold.
inline std::vector<std::string> failing_fields(const ScheduleSpec &spec,
                                               const ScheduleReport &report) {
  const bool cauchy = std::holds_alternative<family::Cauchy>(spec.params);
  std::vector<std::string> out;
  if (!(report.normalization_error <
        (cauchy ? kCauchyNormalizationTolerance : kNormalizationTolerance))) {
    out.emplace_back("normalization_error");
  }
  if (!(report.max_roundtrip_error < kRoundtripTolerance)) {
    out.emplace_back("max_roundtrip_error");
  }
  if (!(report.max_density_vs_derivative_error < kDensityTolerance)) {
    out.emplace_back("max_density_vs_derivative_error");
  }
  return out;
}

/// The three named settings from the ablations.
inline ScheduleSpec preset(std::string_view name) {
  if (name == "laplace_best") {
    return make_schedule(family::Laplace{0.0, 0.5});
  }
  if (name == "cauchy_best") {
    return make_schedule(family::Cauchy{0.0, 0.5});
  }
  if (name == "cosine_scaled_best") {
    return make_schedule(family::CosineScaled{2.0});
  }
  if (name == "cosine") {
    return make_schedule(family::Cosine{});
  }
  throw domain_error("unknown preset '" + std::string(name) + "'");
}

} // namespace snrforge
