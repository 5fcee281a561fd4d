#pragma once

// Synthetic 2D datasets for the toy diffusion lab.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "snrforge/errors.hpp"
#include "snrforge/rng.hpp"

namespace snrforge {

using Vec2 = Eigen::Vector2d;

enum class DatasetKind { GaussianMixture8, Checkerboard, TwoMoons };

inline std::string_view dataset_kind_name(DatasetKind k) {
  switch (k) {
  case DatasetKind::GaussianMixture8:
    return "gaussian_mixture8";
  case DatasetKind::Checkerboard:
    return "checkerboard";
  case DatasetKind::TwoMoons:
    return "two_moons";
  }
  return "unknown";
}

inline DatasetKind dataset_kind_from_name(std::string_view name) {
  if (name == "gaussian_mixture8") {
    return DatasetKind::GaussianMixture8;
  }
  if (name == "checkerboard") {
    return DatasetKind::Checkerboard;
  }
  if (name == "two_moons") {
    return DatasetKind::TwoMoons;
  }
  throw parse_error("unknown dataset kind '" + std::string(name) + "'");
}

struct Dataset2D {
  std::vector<Vec2> points;
  DatasetKind kind = DatasetKind::GaussianMixture8;
  std::uint64_t seed = 0;
};

namespace dataset_detail {

inline Vec2 draw(DatasetKind kind, Engine &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (kind) {
  case DatasetKind::GaussianMixture8: {
    // eight modes on a circle of radius 2, std 0.2 each
    const auto mode = static_cast<int>(unit(rng) * 8.0) % 8;
    const double angle = 2.0 * std::numbers::pi * mode / 8.0;
    return {2.0 * std::cos(angle) + 0.2 * gauss(rng), 2.0 * std::sin(angle) + 0.2 * gauss(rng)};
  }
  case DatasetKind::Checkerboard: {
    // 4x4 board on [-2, 2]^2, alternate cells filled
    const double x = 4.0 * unit(rng) - 2.0;
    const double u = unit(rng);
    const auto col = static_cast<int>(std::floor(x + 2.0));
    const auto row = static_cast<int>(std::floor(u * 2.0)) * 2 + (col % 2 == 0 ? 1 : 0);
    const double y = row + (u * 2.0 - std::floor(u * 2.0)) - 2.0;
    return {x, y};
  }
  case DatasetKind::TwoMoons: {
    const double a = std::numbers::pi * unit(rng);
    const bool upper = unit(rng) < 0.5;
    Vec2 p = upper ? Vec2{std::cos(a), std::sin(a)} : Vec2{1.0 - std::cos(a), 0.5 - std::sin(a)};
    return p + Vec2{0.05 * gauss(rng), 0.05 * gauss(rng)};
  }
  }
  return Vec2::Zero();
}

} // namespace dataset_detail

/// n points of the given kind, normalized to zero mean and unit per-axis
/// variance (centering only when n < 2). Deterministic in (kind, n, seed).
inline Dataset2D make_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) {
    throw domain_error("make_dataset: n must be >= 1");
  }
  Engine rng = make_engine(seed, Stream::dataset);
  Dataset2D ds{{}, kind, seed};
  ds.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.points.push_back(dataset_detail::draw(kind, rng));
  }

  Vec2 mean = Vec2::Zero();
  for (const auto &p : ds.points) {
    mean += p;
  }
  mean /= static_cast<double>(n);
  for (auto &p : ds.points) {
    p -= mean;
  }
  if (n >= 2) {
    Vec2 var = Vec2::Zero();
    for (const auto &p : ds.points) {
      var += p.cwiseProduct(p);
    }
    var /= static_cast<double>(n);
    for (int axis = 0; axis < 2; ++axis) {
      if (var[axis] > 0.0) {
        const double inv = 1.0 / std::sqrt(var[axis]);
        for (auto &p : ds.points) {
          p[axis] *= inv;
        }
      }
    }
  }
  return ds;
}

} // namespace snrforge
