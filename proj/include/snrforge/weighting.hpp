#pragma once

// Loss weights w(lambda) of the unified epsilon-space objective
//
//   L = 1/2 E_{lambda ~ p} [ w(lambda) / p(lambda) * |eps_hat - eps|^2 ].
//
// Two coefficients are exposed. effective_coefficient() is the literal w / p for
// an arbitrary sampling density, the quantity whose expectation is independent
// of p. sample_multiplier() is the per-sample factor a method applies to
// 1/2 |eps_hat - eps|^2 when lambda is drawn from the training schedule; the
// training loop uses it, see its comment for how each strategy defines it.

#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "snrforge/errors.hpp"
#include "snrforge/normal.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/schedule_json.hpp"

namespace snrforge {

inline constexpr double kDefaultSnrGamma = 5.0;
inline constexpr double kMinDensity = 1e-300;

namespace weights {

/// w = 1: plain epsilon MSE.
struct Constant {
  bool operator==(const Constant &) const = default;
};
/// Cosine baseline, w = e^{-lambda/2} against p = sech(lambda/2).
struct CosineEps {
  bool operator==(const CosineEps &) const = default;
};
struct MinSnr {
  double gamma = kDefaultSnrGamma;
  bool operator==(const MinSnr &) const = default;
};
struct SoftMinSnr {
  double gamma = kDefaultSnrGamma;
  bool operator==(const SoftMinSnr &) const = default;
};
struct FmOt {
  bool operator==(const FmOt &) const = default;
};
struct Edm {
  bool operator==(const Edm &) const = default;
};
/// Importance sampling recast as a weight: pdf_numerator / pdf_denominator.
struct ScheduleAsWeight {
  ScheduleSpec numerator;
  ScheduleSpec denominator;
  bool operator==(const ScheduleAsWeight &) const = default;
};

} // namespace weights

using WeightStrategy = std::variant<weights::Constant, weights::CosineEps, weights::MinSnr,
                                    weights::SoftMinSnr, weights::FmOt, weights::Edm,
                                    weights::ScheduleAsWeight>;

inline void validate(const WeightStrategy &strategy) {
  std::visit(overloaded{
                 [](const weights::MinSnr &w) {
                   if (!(w.gamma > 0.0) || !std::isfinite(w.gamma)) {
                     throw domain_error("min_snr: gamma must be > 0");
                   }
                 },
                 [](const weights::SoftMinSnr &w) {
                   if (!(w.gamma > 0.0) || !std::isfinite(w.gamma)) {
                     throw domain_error("soft_min_snr: gamma must be > 0");
                   }
                 },
                 [](const weights::ScheduleAsWeight &w) {
                   w.numerator.validate();
                   w.denominator.validate();
                 },
                 [](const auto &) {},
             },
             strategy);
}

namespace weight_detail {

inline double edm_gaussian(double lam) { return normal::pdf((lam - 2.4) / 2.4) / 2.4; }

inline double checked_ratio(double num, double den, const char *what) {
  if (!(den >= kMinDensity)) {
    throw degenerate_weight_error(std::string(what) + ": denominator density underflow");
  }
  return num / den;
}

} // namespace weight_detail

/// w(lambda) as tabulated for each method.
inline double weight(const WeightStrategy &strategy, double lam) {
  validate(strategy);
  if (!std::isfinite(lam)) {
    throw domain_error("weight: lambda must be finite");
  }
  return std::visit(
      overloaded{
          [](const weights::Constant &) { return 1.0; },
          [lam](const weights::CosineEps &) { return std::exp(-0.5 * lam); },
          [lam](const weights::MinSnr &w) {
            return std::exp(-0.5 * lam) * std::min(1.0, w.gamma * std::exp(-lam));
          },
          [lam](const weights::SoftMinSnr &w) {
            return std::exp(-0.5 * lam) * w.gamma / (std::exp(lam) + w.gamma);
          },
          [lam](const weights::FmOt &) {
            const double c = std::cosh(0.25 * lam);
            return (1.0 + std::exp(-lam)) / (c * c);
          },
          [lam](const weights::Edm &) {
            return (1.0 + std::exp(-lam)) * (0.25 + std::exp(-lam)) *
                   weight_detail::edm_gaussian(lam);
          },
          [lam](const weights::ScheduleAsWeight &w) {
            return weight_detail::checked_ratio(pdf(w.numerator, lam), pdf(w.denominator, lam),
                                                "schedule_as_weight");
          },
      },
      strategy);
}

/// w(lambda) / p_sampling(lambda); its expectation under p_sampling is integral of w.
inline double effective_coefficient(const WeightStrategy &strategy, const ScheduleSpec &sampling,
                                    double lam) {
  return weight_detail::checked_ratio(weight(strategy, lam), pdf(sampling, lam),
                                      "effective_coefficient");
}

/// The density each tabulated weight was paired with, unnormalized as tabulated.
/// Empty for Constant and ScheduleAsWeight, which are already per-sample factors.
inline double reference_density(const WeightStrategy &strategy, double lam) {
  return std::visit(
      overloaded{
          [lam](const weights::CosineEps &) { return 1.0 / std::cosh(0.5 * lam); },
          [lam](const weights::MinSnr &) { return 1.0 / std::cosh(0.5 * lam); },
          [lam](const weights::SoftMinSnr &) { return 1.0 / std::cosh(0.5 * lam); },
          [lam](const weights::FmOt &) {
            const double c = std::cosh(0.25 * lam);
            return 1.0 / (8.0 * c * c);
          },
          [lam](const weights::Edm &) {
            return (0.25 + std::exp(-lam)) * weight_detail::edm_gaussian(lam);
          },
          [](const auto &) { return 1.0; },
      },
      strategy);
}

/// Per-sample multiplier on 1/2 |eps_hat - eps|^2 used by training.
///
/// Constant gives 1 and ScheduleAsWeight gives pdf_num / pdf_den, so sampling
/// from the denominator schedule reproduces, in expectation, plain training
/// under the numerator schedule. The tabulated methods divide w by the density
/// they were tabulated against, e.g. CosineEps gives (1 + e^{-lambda}) / 2,
/// which is the v-prediction MSE written in epsilon space.
inline double sample_multiplier(const WeightStrategy &strategy, double lam) {
  const double w = weight(strategy, lam);
  if (std::holds_alternative<weights::Constant>(strategy) ||
      std::holds_alternative<weights::ScheduleAsWeight>(strategy)) {
    return w;
  }
  return weight_detail::checked_ratio(w, reference_density(strategy, lam), "sample_multiplier");
}

inline std::string weight_kind_name(const WeightStrategy &strategy) {
  return std::visit(overloaded{
                        [](const weights::Constant &) { return "constant"; },
                        [](const weights::CosineEps &) { return "cosine_eps"; },
                        [](const weights::MinSnr &) { return "min_snr"; },
                        [](const weights::SoftMinSnr &) { return "soft_min_snr"; },
                        [](const weights::FmOt &) { return "fm_ot"; },
                        [](const weights::Edm &) { return "edm"; },
                        [](const weights::ScheduleAsWeight &) { return "schedule_as_weight"; },
                    },
                    strategy);
}

inline nlohmann::json to_json(const WeightStrategy &strategy) {
  nlohmann::json j;
  j["kind"] = weight_kind_name(strategy);
  std::visit(overloaded{
                 [&](const weights::MinSnr &w) { j["gamma"] = w.gamma; },
                 [&](const weights::SoftMinSnr &w) { j["gamma"] = w.gamma; },
                 [&](const weights::ScheduleAsWeight &w) {
                   j["numerator"] = to_json(w.numerator);
                   j["denominator"] = to_json(w.denominator);
                 },
                 [](const auto &) {},
             },
             strategy);
  return j;
}

/// {"kind": "min_snr", "gamma": 5.0}; gamma defaults to 5.
inline WeightStrategy weighting_from_json(const nlohmann::json &j) {
  using namespace json_detail;
  constexpr std::string_view ctx = "weighting";
  if (!j.is_object()) {
    throw parse_error("weighting: expected a JSON object");
  }
  const auto &kind_field = require(j, ctx, "kind");
  if (!kind_field.is_string()) {
    throw parse_error("weighting: 'kind' must be a string");
  }
  const auto kind = kind_field.get<std::string>();
  auto gamma_or_default = [&] {
    return j.contains("gamma") ? require_number(j, ctx, "gamma") : kDefaultSnrGamma;
  };

  WeightStrategy strategy;
  if (kind == "constant") {
    reject_unknown(j, ctx, {"kind"});
    strategy = weights::Constant{};
  } else if (kind == "cosine_eps") {
    reject_unknown(j, ctx, {"kind"});
    strategy = weights::CosineEps{};
  } else if (kind == "min_snr") {
    reject_unknown(j, ctx, {"kind", "gamma"});
    strategy = weights::MinSnr{gamma_or_default()};
  } else if (kind == "soft_min_snr") {
    reject_unknown(j, ctx, {"kind", "gamma"});
    strategy = weights::SoftMinSnr{gamma_or_default()};
  } else if (kind == "fm_ot") {
    reject_unknown(j, ctx, {"kind"});
    strategy = weights::FmOt{};
  } else if (kind == "edm") {
    reject_unknown(j, ctx, {"kind"});
    strategy = weights::Edm{};
  } else if (kind == "schedule_as_weight") {
    reject_unknown(j, ctx, {"kind", "numerator", "denominator"});
    strategy = weights::ScheduleAsWeight{schedule_from_json(require(j, ctx, "numerator")),
                                         schedule_from_json(require(j, ctx, "denominator"))};
  } else {
    throw parse_error("weighting: unknown kind '" + kind + "'");
  }
  validate(strategy);
  return strategy;
}

} // namespace snrforge
