#pragma once

// CSV emitters. Header row, '\n' line endings, '.' decimal separator.

#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "snrforge/compare.hpp"
#include "snrforge/dataset.hpp"
#include "snrforge/sampler.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/train.hpp"

namespace snrforge::io {

/// Shortest round-trippable decimal form, independent of the global locale.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// RFC 4180 quoting for a single field.
inline std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') {
      out += '"';
    }
  }
  return out + '"';
}

inline void write_schedule_table(std::ostream &os, const ScheduleSpec &spec, double lo, double hi,
                                 std::size_t points) {
  os << "lambda,pdf,survival,alpha,sigma\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double lam =
        points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const auto c = alpha_sigma(lam);
    os << num(lam) << ',' << num(pdf(spec, lam)) << ',' << num(survival(spec, lam)) << ','
       << num(c.alpha) << ',' << num(c.sigma) << '\n';
  }
}

inline void write_plan(std::ostream &os, const SamplePlan &plan) {
  os << "i,t,lambda,t_prime,alpha,sigma\n";
  for (std::size_t i = 0; i < plan.lambdas.size(); ++i) {
    const auto c = alpha_sigma(plan.lambdas[i]);
    os << i << ',' << num(plan.t[i]) << ',' << num(plan.lambdas[i]) << ',' << num(plan.t_primes[i])
       << ',' << num(c.alpha) << ',' << num(c.sigma) << '\n';
  }
}

inline void write_points(std::ostream &os, std::span<const Vec2> points) {
  os << "x,y\n";
  for (const auto &p : points) {
    os << num(p.x()) << ',' << num(p.y()) << '\n';
  }
}

inline void write_loss_trace(std::ostream &os, std::span<const LossRecord> trace) {
  os << "step,loss,lambda_mean\n";
  for (const auto &r : trace) {
    os << r.step << ',' << num(r.loss) << ',' << num(r.lambda_mean) << '\n';
  }
}

/// Long format: config_id,schedule_json,step,sliced_wasserstein,energy_distance.
inline void write_compare(std::ostream &os, std::span<const CompareRow> rows,
                          std::span<const std::string> schedule_json) {
  os << "config_id,schedule_json,step,sliced_wasserstein,energy_distance\n";
  for (const auto &r : rows) {
    os << r.config_id << ',' << csv_field(schedule_json[r.config_id]) << ',' << r.step << ','
       << num(r.sliced_wasserstein) << ',' << num(r.energy_distance) << '\n';
  }
}

} // namespace snrforge::io
