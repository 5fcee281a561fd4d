#pragma once

// Run configuration files: one JSON object per run, an array for comparisons.

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "snrforge/dataset.hpp"
#include "snrforge/diffusion.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/eval.hpp"
#include "snrforge/sampler.hpp"
#include "snrforge/schedule_json.hpp"
#include "snrforge/train.hpp"
#include "snrforge/weighting.hpp"

namespace snrforge {

struct DatasetSpec {
  DatasetKind kind = DatasetKind::GaussianMixture8;
  std::size_t n = 8192;
  std::uint64_t seed = 0;
  bool operator==(const DatasetSpec &) const = default;
};

struct SamplerSpec {
  int steps = 50;
  double t_max = kDefaultTMax;
  bool operator==(const SamplerSpec &) const = default;
};

struct EvalSpec {
  std::int64_t every = 0; // 0: only at the end
  std::size_t n_eval = 2048;
  int projections = kDefaultProjections;
  bool operator==(const EvalSpec &) const = default;
};

struct RunConfig {
  TrainConfig train;
  DatasetSpec dataset;
  std::int64_t iterations = 1;
  SamplerSpec sampler;
  EvalSpec eval;
};

inline nlohmann::json to_json(const ModelConfig &m) {
  return {{"hidden", m.hidden}, {"freqs", m.freqs}};
}

inline nlohmann::json to_json(const DatasetSpec &d) {
  return {{"kind", std::string(dataset_kind_name(d.kind))}, {"n", d.n}, {"seed", d.seed}};
}

/// The training part of a run config (schedule, weighting, target, optimizer, model).
inline nlohmann::json to_json(const TrainConfig &c) {
  return {{"schedule", to_json(c.schedule)},
          {"weighting", to_json(c.weighting)},
          {"target", std::string(target_name(c.target))},
          {"batch", c.batch},
          {"lr", c.adam.lr},
          {"seed", c.seed},
          {"log_every", c.log_every},
          {"model", to_json(c.model)}};
}

inline nlohmann::json to_json(const RunConfig &r) {
  auto j = to_json(r.train);
  j["dataset"] = to_json(r.dataset);
  j["iterations"] = r.iterations;
  j["sampler"] = {{"steps", r.sampler.steps}, {"t_max", r.sampler.t_max}};
  j["eval"] = {{"every", r.eval.every},
               {"n_eval", r.eval.n_eval},
               {"projections", r.eval.projections}};
  return j;
}

namespace config_detail {

using namespace json_detail;

inline std::uint64_t require_uint(const nlohmann::json &j, std::string_view ctx, const char *key) {
  const auto &v = require(j, ctx, key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw parse_error(std::string(ctx) + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline ModelConfig model_from_json(const nlohmann::json &j) {
  reject_unknown(j, "model", {"hidden", "freqs"});
  ModelConfig m;
  if (j.contains("hidden")) {
    m.hidden = require_int(j, "model", "hidden");
  }
  if (j.contains("freqs")) {
    m.freqs = require_int(j, "model", "freqs");
  }
  validate(m);
  return m;
}

inline DatasetSpec dataset_from_json(const nlohmann::json &j) {
  if (!j.is_object()) {
    throw parse_error("dataset: expected a JSON object");
  }
  reject_unknown(j, "dataset", {"kind", "n", "seed"});
  const auto &kind = require(j, "dataset", "kind");
  if (!kind.is_string()) {
    throw parse_error("dataset: 'kind' must be a string");
  }
  DatasetSpec d;
  d.kind = dataset_kind_from_name(kind.get<std::string>());
  d.n = require_uint(j, "dataset", "n");
  d.seed = j.contains("seed") ? require_uint(j, "dataset", "seed") : 0;
  if (d.n == 0) {
    throw domain_error("dataset: n must be >= 1");
  }
  return d;
}

} // namespace config_detail

/// Parses the fields shared by checkpoints and run configs.
inline TrainConfig train_config_from_json(const nlohmann::json &j, std::string_view ctx) {
  using namespace config_detail;
  TrainConfig c;
  c.schedule = schedule_from_json(require(j, ctx, "schedule"));
  c.weighting = weighting_from_json(require(j, ctx, "weighting"));
  const auto &target = require(j, ctx, "target");
  if (!target.is_string()) {
    throw parse_error(std::string(ctx) + ": 'target' must be a string");
  }
  c.target = target_from_name(target.get<std::string>());
  c.batch = require_uint(j, ctx, "batch");
  c.adam.lr = require_number(j, ctx, "lr");
  c.seed = require_uint(j, ctx, "seed");
  if (j.contains("log_every")) {
    c.log_every = require_uint(j, ctx, "log_every");
  }
  if (j.contains("model")) {
    c.model = model_from_json(j.at("model"));
  }
  validate(c);
  return c;
}

inline RunConfig run_config_from_json(const nlohmann::json &j) {
  using namespace config_detail;
  constexpr std::string_view ctx = "config";
  if (!j.is_object()) {
    throw parse_error("config: expected a JSON object");
  }
  reject_unknown(j, ctx,
                 {"schedule", "weighting", "target", "dataset", "iterations", "batch", "lr", "seed",
                  "log_every", "model", "sampler", "eval"});
  RunConfig r;
  // required fields are checked in a fixed order so the first missing one is reported
  for (const char *key :
       {"schedule", "weighting", "target", "dataset", "iterations", "batch", "lr", "seed"}) {
    require(j, ctx, key);
  }
  r.train = train_config_from_json(j, ctx);
  r.dataset = dataset_from_json(j.at("dataset"));
  r.iterations = static_cast<std::int64_t>(require_uint(j, ctx, "iterations"));
  if (r.iterations < 1) {
    throw domain_error("config: iterations must be >= 1");
  }
  if (j.contains("sampler")) {
    const auto &s = j.at("sampler");
    reject_unknown(s, "sampler", {"steps", "t_max"});
    if (s.contains("steps")) {
      r.sampler.steps = require_int(s, "sampler", "steps");
    }
    if (s.contains("t_max")) {
      r.sampler.t_max = require_number(s, "sampler", "t_max");
    }
    if (r.sampler.steps < 1 || !(r.sampler.t_max > 0.0 && r.sampler.t_max <= 1.0)) {
      throw domain_error("sampler: need steps >= 1 and 0 < t_max <= 1");
    }
  }
  if (j.contains("eval")) {
    const auto &e = j.at("eval");
    reject_unknown(e, "eval", {"every", "n_eval", "projections"});
    if (e.contains("every")) {
      r.eval.every = static_cast<std::int64_t>(require_uint(e, "eval", "every"));
    }
    if (e.contains("n_eval")) {
      r.eval.n_eval = require_uint(e, "eval", "n_eval");
    }
    if (e.contains("projections")) {
      r.eval.projections = require_int(e, "eval", "projections");
    }
    if (r.eval.n_eval == 0 || r.eval.projections < 1) {
      throw domain_error("eval: n_eval and projections must be >= 1");
    }
  }
  return r;
}

} // namespace snrforge
