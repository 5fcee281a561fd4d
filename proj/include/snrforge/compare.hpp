#pragma once

// Trains several configurations on one dataset and tracks sample quality over training.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "snrforge/dataset.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/eval.hpp"
#include "snrforge/sampler.hpp"
#include "snrforge/train.hpp"

namespace snrforge {

struct CompareSettings {
  std::int64_t iterations = 20000;
  /// Evaluation cadence in steps; the final step is always evaluated.
  std::int64_t eval_every = 4000;
  std::size_t n_eval = 2048;
  int projections = kDefaultProjections;
  int sampler_steps = 50;
  double t_max = kDefaultTMax;
  /// Seed of the held-out reference set, initial sampling noise and projections.
  std::uint64_t eval_seed = 0;
  unsigned threads = 1;
};

struct CompareRow {
  std::size_t config_id;
  std::int64_t step;
  double sliced_wasserstein;
  double energy_distance;
};

struct ConfigOutcome {
  std::vector<CompareRow> rows;
  std::optional<std::string> error;
};

struct CompareResult {
  std::vector<ConfigOutcome> per_config;

  /// Rows of all configs, ordered by config index then step.
  std::vector<CompareRow> rows() const {
    std::vector<CompareRow> all;
    for (const auto &o : per_config) {
      all.insert(all.end(), o.rows.begin(), o.rows.end());
    }
    return all;
  }
};

inline std::vector<std::int64_t> eval_steps(std::int64_t iterations, std::int64_t every) {
  std::vector<std::int64_t> steps;
  if (every > 0) {
    for (std::int64_t s = every; s < iterations; s += every) {
      steps.push_back(s);
    }
  }
  steps.push_back(iterations);
  return steps;
}

/// Held-out reference points drawn from the same generator as the training data.
inline Dataset2D reference_set(const Dataset2D &data, std::size_t n, std::uint64_t eval_seed) {
  return make_dataset(data.kind, n, splitmix64(data.seed) ^ splitmix64(eval_seed + 0x5eed));
}

/// Trains every config on `data` and scores samples at each evaluation step.
///
/// Configs keep their own seeds; giving them the same seed shares the data,
/// time and noise streams (common random numbers). Every config is sampled on
/// the cosine-aligned lambda grid with the same initial noise. A config that
/// fails keeps its rows so far and records the error; the others continue.
inline CompareResult compare_schedules(const std::vector<TrainConfig> &configs,
                                       const Dataset2D &data, const CompareSettings &settings) {
  if (configs.size() < 2) {
    throw domain_error("compare_schedules: need at least 2 configs");
  }
  if (settings.iterations < 1) {
    throw domain_error("compare_schedules: iterations must be >= 1");
  }
  for (const auto &c : configs) {
    validate(c);
  }
  const Dataset2D reference = reference_set(data, settings.n_eval, settings.eval_seed);
  const auto checkpoints = eval_steps(settings.iterations, settings.eval_every);

  CompareResult result;
  result.per_config.resize(configs.size());

  auto run_one = [&](std::size_t id) {
    auto &outcome = result.per_config[id];
    try {
      const auto plan = build_plan(configs[id].schedule, settings.sampler_steps, settings.t_max);
      std::size_t next = 0;
      auto on_step = [&](const TrainState &state) {
        if (next < checkpoints.size() && state.step == checkpoints[next]) {
          const auto gen = sample(state, configs[id].schedule, plan, settings.n_eval,
                                  settings.eval_seed);
          const auto rep = evaluate(gen, reference.points, settings.eval_seed, settings.projections);
          outcome.rows.push_back({id, state.step, rep.sliced_wasserstein, rep.energy_distance});
          ++next;
        }
      };
      train(configs[id], data, settings.iterations, on_step);
    } catch (const std::exception &e) {
      outcome.error = e.what();
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(settings.threads, static_cast<unsigned>(configs.size())));
  if (workers == 1) {
    for (std::size_t id = 0; id < configs.size(); ++id) {
      run_one(id);
    }
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t id = cursor++; id < configs.size(); id = cursor++) {
          run_one(id);
        }
      });
    }
  }
  return result;
}

} // namespace snrforge
