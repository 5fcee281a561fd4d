#pragma once

// Two-sample distances for 2D point clouds and a Kolmogorov-Smirnov check for lambda samplers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "snrforge/dataset.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/rng.hpp"
#include "snrforge/schedule.hpp"

namespace snrforge {

inline constexpr int kDefaultProjections = 128;

/// Exact 1D Wasserstein-1 distance between two sorted samples, integral of |F_a - F_b|.
inline double wasserstein_1d_sorted(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::size_t i = 0;
  std::size_t j = 0;
  double fa = 0.0;
  double fb = 0.0;
  double prev = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < n || j < m) {
    const bool take_a = j >= m || (i < n && a[i] <= b[j]);
    const double next = take_a ? a[i] : b[j];
    total += std::abs(fa - fb) * (next - prev);
    prev = next;
    if (take_a) {
      fa = static_cast<double>(++i) / static_cast<double>(n);
    } else {
      fb = static_cast<double>(++j) / static_cast<double>(m);
    }
  }
  return total;
}

/// Mean over random unit directions of the 1D W1 distance between projections.
inline double sliced_wasserstein(std::span<const Vec2> a, std::span<const Vec2> b,
                                 int n_projections = kDefaultProjections, std::uint64_t seed = 0) {
  if (a.empty() || b.empty()) {
    throw domain_error("sliced_wasserstein: empty point set");
  }
  if (n_projections < 1) {
    throw domain_error("sliced_wasserstein: n_projections must be >= 1");
  }
  Engine rng = make_engine(seed, Stream::projections);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<double> pa(a.size());
  std::vector<double> pb(b.size());
  double acc = 0.0;
  for (int k = 0; k < n_projections; ++k) {
    const double th = angle(rng);
    const Vec2 u{std::cos(th), std::sin(th)};
    std::transform(a.begin(), a.end(), pa.begin(), [&](const Vec2 &p) { return p.dot(u); });
    std::transform(b.begin(), b.end(), pb.begin(), [&](const Vec2 &p) { return p.dot(u); });
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    acc += wasserstein_1d_sorted(pa, pb);
  }
  return acc / n_projections;
}

/// 2 E|X - Y| - E|X - X'| - E|Y - Y'| with V-statistics, so identical sets give 0.
inline double energy_distance(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.empty() || b.empty()) {
    throw domain_error("energy_distance: empty point set");
  }
  auto mean_dist = [](std::span<const Vec2> p, std::span<const Vec2> q) {
    double s = 0.0;
    for (const auto &x : p) {
      for (const auto &y : q) {
        s += (x - y).norm();
      }
    }
    return s / (static_cast<double>(p.size()) * static_cast<double>(q.size()));
  };
  const double d = 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
  return std::max(d, 0.0);
}

struct EvalReport {
  double sliced_wasserstein = 0.0;
  double energy_distance = 0.0;
  std::size_t n_generated = 0;
  std::size_t n_reference = 0;
  std::uint64_t seed = 0;
};

inline EvalReport evaluate(std::span<const Vec2> generated, std::span<const Vec2> reference,
                           std::uint64_t seed, int n_projections = kDefaultProjections) {
  return {sliced_wasserstein(generated, reference, n_projections, seed),
          energy_distance(generated, reference), generated.size(), reference.size(), seed};
}

/// KS statistic of sorted samples against the CDF of the clamped schedule.
///
/// Clamping turns the tails beyond [lambda_min, lambda_max] into point masses,
/// so the reference CDF jumps at both bounds; the sup is taken over both sides
/// of every distinct sample value.
inline double ks_statistic_clamped(const ScheduleSpec &spec, std::span<const double> sorted) {
  const auto n = static_cast<double>(sorted.size());
  const double lo = spec.clamp.lo;
  const double hi = spec.clamp.hi;
  auto cdf = [&](double x) { return x >= hi ? 1.0 : 1.0 - survival(spec, x); };
  auto cdf_left = [&](double x) {
    if (x <= lo) {
      return 0.0;
    }
    return 1.0 - survival(spec, std::min(x, hi));
  };
  double d = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double v = sorted[i];
    std::size_t k = i;
    while (k < sorted.size() && sorted[k] == v) {
      ++k;
    }
    const double before = static_cast<double>(i) / n;
    const double after = static_cast<double>(k) / n;
    d = std::max({d, std::abs(cdf(v) - after), std::abs(cdf_left(v) - before)});
    i = k;
  }
  return d;
}

/// KS statistic between lambda_of_t(spec, U_i) for n uniform draws and 1 - survival.
inline double ks_conformance(const ScheduleSpec &spec, std::size_t n_samples, std::uint64_t seed) {
  spec.validate();
  if (n_samples < 1000) {
    throw domain_error("ks_conformance: n_samples must be >= 1000");
  }
  Engine rng = make_engine(seed, Stream::uniform);
  std::vector<double> lam(n_samples);
  for (auto &l : lam) {
    l = lambda_of_t(spec, uniform_open(rng));
  }
  std::sort(lam.begin(), lam.end());
  return ks_statistic_clamped(spec, lam);
}

inline double median(std::vector<double> v) {
  if (v.empty()) {
    throw domain_error("median: empty input");
  }
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

} // namespace snrforge
