#pragma once

// JSON form of a schedule: {"family": "laplace", "mu": 0.0, "b": 0.5, "lambda_clamp": [-15, 15]}.

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "snrforge/errors.hpp"
#include "snrforge/schedule.hpp"

namespace snrforge {

namespace json_detail {

using nlohmann::json;

inline void reject_unknown(const json &j, std::string_view context,
                           std::initializer_list<std::string_view> allowed) {
  for (const auto &[key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) {
      known = known || key == a;
    }
    if (!known) {
      throw parse_error(std::string(context) + ": unknown field '" + key + "'");
    }
  }
}

inline const json &require(const json &j, std::string_view context, const char *key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw parse_error(std::string(context) + ": missing field '" + key + "'");
  }
  return *it;
}

inline double require_number(const json &j, std::string_view context, const char *key) {
  const auto &v = require(j, context, key);
  if (!v.is_number()) {
    throw parse_error(std::string(context) + ": field '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline int require_int(const json &j, std::string_view context, const char *key) {
  const auto &v = require(j, context, key);
  if (!v.is_number_integer()) {
    throw parse_error(std::string(context) + ": field '" + key + "' must be an integer");
  }
  return v.get<int>();
}

} // namespace json_detail

inline nlohmann::json to_json(const ScheduleSpec &spec) {
  nlohmann::json j;
  j["family"] = std::string(spec.family_name());
  std::visit(overloaded{
                 [](const family::Cosine &) {},
                 [&](const family::Laplace &f) {
                   j["mu"] = f.mu;
                   j["b"] = f.b;
                 },
                 [&](const family::Cauchy &f) {
                   j["mu"] = f.mu;
                   j["gamma"] = f.gamma;
                 },
                 [&](const family::CosineShifted &f) { j["mu"] = f.mu; },
                 [&](const family::CosineScaled &f) { j["s"] = f.s; },
                 [&](const family::CosinePoly &f) { j["n"] = f.n; },
                 [&](const family::EdmLogNormal &f) {
                   j["mean"] = f.mean;
                   j["std"] = f.stddev;
                 },
                 [](const family::FlowMatchOT &) {},
                 [&](const family::FmLogitNormal &f) {
                   j["mu"] = f.mu;
                   j["sigma"] = f.sigma;
                 },
             },
             spec.params);
  j["lambda_clamp"] = {spec.clamp.lo, spec.clamp.hi};
  return j;
}

/// Parses and validates a schedule object. Throws parse_error on shape problems,
/// domain_error on out-of-range parameters.
inline ScheduleSpec schedule_from_json(const nlohmann::json &j) {
  using namespace json_detail;
  constexpr std::string_view ctx = "schedule";
  if (!j.is_object()) {
    throw parse_error("schedule: expected a JSON object");
  }
  const auto &fam = require(j, ctx, "family");
  if (!fam.is_string()) {
    throw parse_error("schedule: 'family' must be a string");
  }
  const auto name = fam.get<std::string>();

  ScheduleSpec spec;
  if (name == "cosine") {
    reject_unknown(j, ctx, {"family", "lambda_clamp"});
    spec.params = family::Cosine{};
  } else if (name == "laplace") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "mu", "b"});
    spec.params = family::Laplace{require_number(j, ctx, "mu"), require_number(j, ctx, "b")};
  } else if (name == "cauchy") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "mu", "gamma"});
    spec.params = family::Cauchy{require_number(j, ctx, "mu"), require_number(j, ctx, "gamma")};
  } else if (name == "cosine_shifted") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "mu"});
    spec.params = family::CosineShifted{require_number(j, ctx, "mu")};
  } else if (name == "cosine_scaled") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "s"});
    spec.params = family::CosineScaled{require_number(j, ctx, "s")};
  } else if (name == "cosine_poly") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "n"});
    spec.params = family::CosinePoly{require_int(j, ctx, "n")};
  } else if (name == "edm_log_normal") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "mean", "std"});
    spec.params =
        family::EdmLogNormal{require_number(j, ctx, "mean"), require_number(j, ctx, "std")};
  } else if (name == "flow_match_ot") {
    reject_unknown(j, ctx, {"family", "lambda_clamp"});
    spec.params = family::FlowMatchOT{};
  } else if (name == "fm_logit_normal") {
    reject_unknown(j, ctx, {"family", "lambda_clamp", "mu", "sigma"});
    spec.params =
        family::FmLogitNormal{require_number(j, ctx, "mu"), require_number(j, ctx, "sigma")};
  } else {
    throw parse_error("schedule: unknown family '" + name + "'");
  }

  if (auto it = j.find("lambda_clamp"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
      throw parse_error("schedule: 'lambda_clamp' must be [lambda_min, lambda_max]");
    }
    spec.clamp = {(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  spec.validate();
  return spec;
}

inline ScheduleSpec schedule_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw parse_error(std::string("schedule: malformed JSON: ") + e.what());
  }
  return schedule_from_json(j);
}

} // namespace snrforge
