// snrforge: schedule inspection, validation, training, sampling and comparison.
//
// Exit codes: 0 success, 1 validation threshold exceeded, 2 bad input, 3 runtime divergence.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "snrforge/checkpoint.hpp"
#include "snrforge/compare.hpp"
#include "snrforge/config.hpp"
#include "snrforge/io.hpp"
#include "snrforge/sampler.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/schedule_json.hpp"
#include "snrforge/train.hpp"

namespace {

using namespace snrforge;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitThreshold = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitDivergence = 3;

struct ScheduleInput {
  std::string json_text;
  std::string file;
  std::string preset;

  void attach(CLI::App *cmd) {
    auto *a = cmd->add_option("--schedule", json_text, "schedule as inline JSON");
    auto *b = cmd->add_option("--schedule-file", file, "path to a schedule JSON file");
    auto *c = cmd->add_option("--preset", preset, "laplace_best | cauchy_best | cosine_scaled_best");
    a->excludes(b)->excludes(c);
    b->excludes(c);
  }

  bool given() const { return !json_text.empty() || !file.empty() || !preset.empty(); }

  ScheduleSpec resolve() const {
    if (!preset.empty()) {
      return snrforge::preset(preset);
    }
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) {
        throw domain_error("cannot read schedule file " + file);
      }
      std::stringstream ss;
      ss << in.rdbuf();
      return schedule_from_json_text(ss.str());
    }
    if (!json_text.empty()) {
      return schedule_from_json_text(json_text);
    }
    throw parse_error("one of --schedule, --schedule-file or --preset is required");
  }
};

json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw domain_error("cannot read " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw parse_error(path + ": malformed JSON: " + e.what());
  }
}

/// Writes to `path`, or to stdout when it is empty.
void emit(const std::string &path, const std::function<void(std::ostream &)> &write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw domain_error("cannot write " + path);
  }
  write(out);
  if (!out) {
    throw domain_error("write failed: " + path);
  }
}

/// Hardware concurrency, capped by SNRFORGE_THREADS when set.
unsigned thread_budget() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("SNRFORGE_THREADS"); env != nullptr && *env != '\0') {
    char *end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || cap < 1) {
      throw domain_error("SNRFORGE_THREADS must be a positive integer");
    }
    n = std::min<unsigned>(n, static_cast<unsigned>(std::min<long>(cap, 4096)));
  }
  return n;
}

json report_json(const ScheduleReport &r) {
  return {{"normalization_error", r.normalization_error},
          {"max_roundtrip_error", r.max_roundtrip_error},
          {"max_density_vs_derivative_error", r.max_density_vs_derivative_error},
          {"grid_size", r.grid_size},
          {"in_range_mass", r.in_range_mass},
          {"integral", r.integral}};
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  ScheduleInput schedule;
  double lambda_min = -15.0;
  double lambda_max = 15.0;
  std::size_t points = 301;
  std::string out;
};

int run_schedule_plot(const PlotArgs &a) {
  const auto spec = a.schedule.resolve();
  if (a.points < 2) {
    throw domain_error("--points must be >= 2");
  }
  if (!(a.lambda_min < a.lambda_max)) {
    throw domain_error("--lambda-min must be below --lambda-max");
  }
  emit(a.out, [&](std::ostream &os) {
    io::write_schedule_table(os, spec, a.lambda_min, a.lambda_max, a.points);
  });
  return kExitOk;
}

struct ValidateArgs {
  ScheduleInput schedule;
  std::size_t grid = 10000;
};

int run_validate(const ValidateArgs &a) {
  const auto spec = a.schedule.resolve();
  const auto report = validate_schedule(spec, a.grid);
  const auto failing = failing_fields(spec, report);
  json j = report_json(report);
  j["schedule"] = to_json(spec);
  j["pass"] = failing.empty();
  j["failing_fields"] = failing;
  std::cout << j.dump(2) << '\n';
  for (const auto &f : failing) {
    std::cerr << "validate: threshold exceeded: " << f << '\n';
  }
  return failing.empty() ? kExitOk : kExitThreshold;
}

struct SampleLambdaArgs {
  ScheduleInput schedule;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_sample_lambda(const SampleLambdaArgs &a) {
  const auto spec = a.schedule.resolve();
  auto rng = make_engine(a.seed, Stream::uniform);
  emit(a.out, [&](std::ostream &os) {
    os << "t,lambda\n";
    for (std::size_t i = 0; i < a.n; ++i) {
      const double t = uniform_open(rng);
      os << io::num(t) << ',' << io::num(lambda_of_t(spec, t)) << '\n';
    }
  });
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string checkpoint;
  std::string loss_out;
};

int run_train(const TrainArgs &a) {
  const auto run = run_config_from_json(read_json_file(a.config));
  const auto data = make_dataset(run.dataset.kind, run.dataset.n, run.dataset.seed);
  std::vector<LossRecord> partial;
  auto write_trace = [&](const std::vector<LossRecord> &trace) {
    if (!a.loss_out.empty()) {
      emit(a.loss_out, [&](std::ostream &os) { io::write_loss_trace(os, trace); });
    }
  };
  TrainResult result;
  try {
    result = train(run.train, data, run.iterations, {}, &partial);
  } catch (const divergence_error &e) {
    write_trace(partial);
    std::cerr << "train: " << e.what() << '\n';
    return kExitDivergence;
  }
  write_trace(result.trace);
  if (!a.checkpoint.empty()) {
    save_checkpoint(result.state, a.checkpoint);
  }
  json summary = {{"step", result.state.step},
                  {"final_loss", result.trace.back().loss},
                  {"final_lambda_mean", result.trace.back().lambda_mean},
                  {"log_every", run.train.log_every}};
  std::cout << summary.dump() << '\n';
  return kExitOk;
}

struct SampleArgs {
  std::string checkpoint;
  ScheduleInput schedule;
  bool override_schedule = false;
  int steps = 50;
  double t_max = kDefaultTMax;
  std::size_t n = 2048;
  std::uint64_t seed = 0;
  std::string out;
  std::string plan_out;
};

int run_sample(const SampleArgs &a) {
  const auto state = load_checkpoint(a.checkpoint);
  ScheduleSpec schedule = state.config.schedule;
  if (a.schedule.given()) {
    const auto requested = a.schedule.resolve();
    if (requested != schedule && !a.override_schedule) {
      throw domain_error("sample: schedule differs from the checkpoint's " +
                         to_json(schedule).dump() + "; pass --override-schedule to use it");
    }
    schedule = requested;
  }
  const auto plan = build_plan(schedule, a.steps, a.t_max);
  const auto points = sample(state, schedule, plan, a.n, a.seed, thread_budget());
  if (!a.plan_out.empty()) {
    emit(a.plan_out, [&](std::ostream &os) { io::write_plan(os, plan); });
  }
  emit(a.out, [&](std::ostream &os) { io::write_points(os, points); });
  return kExitOk;
}

struct CompareArgs {
  std::string configs;
  std::string out;
  std::string summary_out;
  std::uint64_t eval_seed = 0;
};

json compare_summary(const std::vector<RunConfig> &runs, const CompareResult &result,
                     std::int64_t final_step) {
  json configs = json::array();
  struct Best {
    double value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> ids;
  };
  std::vector<std::pair<std::string, Best>> best;
  for (std::size_t id = 0; id < runs.size(); ++id) {
    const auto &o = result.per_config[id];
    const std::string target(target_name(runs[id].train.target));
    json c = {{"config_id", id},
              {"schedule", to_json(runs[id].train.schedule)},
              {"weighting", to_json(runs[id].train.weighting)},
              {"target", target}};
    const bool finished = !o.error && !o.rows.empty() && o.rows.back().step == final_step;
    if (o.error) {
      c["error"] = *o.error;
    }
    if (finished) {
      const double sw = o.rows.back().sliced_wasserstein;
      c["final_sliced_wasserstein"] = sw;
      c["final_energy_distance"] = o.rows.back().energy_distance;
      auto it = std::find_if(best.begin(), best.end(), [&](const auto &b) { return b.first == target; });
      if (it == best.end()) {
        best.emplace_back(target, Best{});
        it = std::prev(best.end());
      }
      if (sw < it->second.value) {
        it->second = {sw, {id}};
      } else if (sw == it->second.value) {
        it->second.ids.push_back(id);
      }
    }
    configs.push_back(std::move(c));
  }
  json per_target = json::object();
  for (const auto &[target, b] : best) {
    per_target[target] = {{"best_config_ids", b.ids},
                          {"final_sliced_wasserstein", b.value},
                          {"tie", b.ids.size() > 1}};
  }
  return {{"metric", "sliced_wasserstein"},
          {"final_step", final_step},
          {"configs", configs},
          {"best_by_target", per_target}};
}

int run_compare(const CompareArgs &a) {
  const auto j = read_json_file(a.configs);
  if (!j.is_array()) {
    throw parse_error("compare: expected a JSON array of run configs");
  }
  std::vector<RunConfig> runs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      runs.push_back(run_config_from_json(j[i]));
    } catch (const domain_error &e) {
      throw parse_error("configs[" + std::to_string(i) + "]: " + e.what());
    }
  }
  if (runs.size() < 2) {
    throw domain_error("compare: need at least 2 configs");
  }
  const auto &first = runs.front();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto &r = runs[i];
    if (!(r.dataset == first.dataset) || r.iterations != first.iterations ||
        !(r.sampler == first.sampler) || !(r.eval == first.eval)) {
      throw domain_error("configs[" + std::to_string(i) +
                         "]: dataset, iterations, sampler and eval must match configs[0]");
    }
  }

  CompareSettings settings;
  settings.iterations = first.iterations;
  settings.eval_every = first.eval.every;
  settings.n_eval = first.eval.n_eval;
  settings.projections = first.eval.projections;
  settings.sampler_steps = first.sampler.steps;
  settings.t_max = first.sampler.t_max;
  settings.eval_seed = a.eval_seed;
  settings.threads = thread_budget();

  std::vector<TrainConfig> configs;
  std::vector<std::string> schedules;
  for (const auto &r : runs) {
    configs.push_back(r.train);
    schedules.push_back(to_json(r.train.schedule).dump());
  }
  const auto data = make_dataset(first.dataset.kind, first.dataset.n, first.dataset.seed);
  const auto result = compare_schedules(configs, data, settings);

  const auto rows = result.rows();
  emit(a.out, [&](std::ostream &os) { io::write_compare(os, rows, schedules); });
  const auto summary = compare_summary(runs, result, settings.iterations);
  if (!a.summary_out.empty()) {
    emit(a.summary_out, [&](std::ostream &os) { os << summary.dump(2) << '\n'; });
  } else {
    std::cerr << summary.dump(2) << '\n';
  }
  bool failed = false;
  for (std::size_t id = 0; id < result.per_config.size(); ++id) {
    if (const auto &err = result.per_config[id].error) {
      std::cerr << "compare: config " << id << ": " << *err << '\n';
      failed = true;
    }
  }
  return failed ? kExitDivergence : kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Noise schedules as distributions over log-SNR"};
  app.require_subcommand(1);

  PlotArgs plot;
  auto *c_plot = app.add_subcommand("schedule-plot", "pdf, survival, alpha, sigma on a lambda grid");
  plot.schedule.attach(c_plot);
  c_plot->add_option("--lambda-min", plot.lambda_min);
  c_plot->add_option("--lambda-max", plot.lambda_max);
  c_plot->add_option("--points", plot.points);
  c_plot->add_option("--out", plot.out, "CSV path (default stdout)");

  ValidateArgs val;
  auto *c_val = app.add_subcommand("validate", "self-consistency report of a schedule");
  val.schedule.attach(c_val);
  c_val->add_option("--grid", val.grid);

  SampleLambdaArgs sl;
  auto *c_sl = app.add_subcommand("sample-lambda", "Monte-Carlo draws of (t, lambda)");
  sl.schedule.attach(c_sl);
  c_sl->add_option("--n", sl.n);
  c_sl->add_option("--seed", sl.seed);
  c_sl->add_option("--out", sl.out, "CSV path (default stdout)");

  TrainArgs tr;
  auto *c_tr = app.add_subcommand("train", "train the toy denoiser from a run config");
  c_tr->add_option("--config", tr.config, "run config JSON")->required();
  c_tr->add_option("--checkpoint", tr.checkpoint, "checkpoint prefix (.bin and .json)");
  c_tr->add_option("--loss-out", tr.loss_out, "loss trace CSV path");

  SampleArgs sa;
  auto *c_sa = app.add_subcommand("sample", "DDIM samples from a checkpoint");
  c_sa->add_option("--checkpoint", sa.checkpoint, "checkpoint prefix")->required();
  sa.schedule.attach(c_sa);
  c_sa->add_flag("--override-schedule", sa.override_schedule,
                 "sample with a schedule other than the checkpoint's");
  c_sa->add_option("--steps", sa.steps);
  c_sa->add_option("--t-max", sa.t_max);
  c_sa->add_option("--n", sa.n);
  c_sa->add_option("--seed", sa.seed);
  c_sa->add_option("--out", sa.out, "samples CSV path (default stdout)");
  c_sa->add_option("--plan-out", sa.plan_out, "sampling plan CSV path");

  CompareArgs cmp;
  auto *c_cmp = app.add_subcommand("compare", "train several configs and track sample quality");
  c_cmp->add_option("--configs", cmp.configs, "JSON array of run configs")->required();
  c_cmp->add_option("--out", cmp.out, "long-format CSV path (default stdout)");
  c_cmp->add_option("--summary-out", cmp.summary_out, "summary JSON path (default stderr)");
  c_cmp->add_option("--eval-seed", cmp.eval_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (c_plot->parsed()) {
      return run_schedule_plot(plot);
    }
    if (c_val->parsed()) {
      return run_validate(val);
    }
    if (c_sl->parsed()) {
      return run_sample_lambda(sl);
    }
    if (c_tr->parsed()) {
      return run_train(tr);
    }
    if (c_sa->parsed()) {
      return run_sample(sa);
    }
    if (c_cmp->parsed()) {
      return run_compare(cmp);
    }
  } catch (const divergence_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const degenerate_conversion_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const degenerate_weight_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
  return kExitBadInput;
}
