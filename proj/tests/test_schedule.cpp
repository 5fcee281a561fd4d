#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/schedule_json.hpp"

using namespace snrforge;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<ScheduleSpec> all_families() {
  return {
      make_schedule(family::Cosine{}),
      make_schedule(family::Laplace{0.0, 0.5}),
      make_schedule(family::Cauchy{0.0, 0.5}),
      make_schedule(family::CosineShifted{1.0}),
      make_schedule(family::CosineScaled{2.0}),
      make_schedule(family::CosinePoly{2}),
      make_schedule(family::EdmLogNormal{2.4, 2.4}),
      make_schedule(family::FlowMatchOT{}),
      make_schedule(family::FmLogitNormal{0.0, 1.0}),
  };
}

} // namespace

TEST(Pdf, ClosedFormPeaks) {
  EXPECT_NEAR(pdf(make_schedule(family::Cosine{}), 0.0), 1.0 / (2.0 * kPi), 1e-15);
  EXPECT_NEAR(pdf(make_schedule(family::Laplace{0.0, 0.5}), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(pdf(make_schedule(family::Cauchy{0.0, 1.0}), 0.0), 1.0 / kPi, 1e-15);
}

TEST(Pdf, CosinePolyMatchesFiniteDifferenceOfSurvival) {
  const auto spec = make_schedule(family::CosinePoly{2});
  // the closed form is symmetric with a kink at 0, so test both one-sided limits
  const double h = 1e-6;
  const double right = (survival(spec, 0.0) - survival(spec, h)) / h;
  const double left = (survival(spec, -h) - survival(spec, 0.0)) / h;
  EXPECT_NEAR(pdf(spec, 0.0), right, 1e-5);
  EXPECT_NEAR(pdf(spec, 0.0), left, 1e-5);
  // 3 * 16 / pi^3 * (pi/4)^2 * 1/2
  EXPECT_NEAR(pdf(spec, 0.0), 3.0 / (2.0 * kPi), 1e-14);
  for (double lam : {-4.0, -1.3, 0.7, 2.0, 5.5}) {
    EXPECT_NEAR(pdf(spec, lam), oracle::neg_derivative(spec, lam, 1e-5), 1e-8) << lam;
  }
}

TEST(Pdf, RejectsInvalidParameters) {
  ScheduleSpec bad{family::Laplace{0.0, -1.0}};
  EXPECT_THROW(pdf(bad, 0.0), domain_error);
  EXPECT_THROW(make_schedule(family::Cauchy{0.0, 0.0}), domain_error);
  EXPECT_THROW(make_schedule(family::CosineScaled{-2.0}), domain_error);
  EXPECT_THROW(make_schedule(family::EdmLogNormal{0.0, 0.0}), domain_error);
  EXPECT_THROW(make_schedule(family::FmLogitNormal{0.0, -0.1}), domain_error);
  EXPECT_THROW(make_schedule(family::CosinePoly{-1}), domain_error);
  EXPECT_THROW(make_schedule(family::Cosine{}, {1.0, 15.0}), domain_error);
  EXPECT_THROW(make_schedule(family::Cosine{}, {-15.0, -1.0}), domain_error);
}

TEST(Survival, SymmetryPoints) {
  EXPECT_DOUBLE_EQ(survival(make_schedule(family::Laplace{1.5, 0.7}), 1.5), 0.5);
  EXPECT_NEAR(survival(make_schedule(family::Cosine{}), 0.0), 0.5, 1e-15);
}

TEST(Survival, CauchyAgainstQuadrature) {
  const auto spec = make_schedule(family::Cauchy{0.0, 0.5});
  EXPECT_NEAR(survival(spec, 0.5), 0.25, 1e-15);
  EXPECT_NEAR(oracle::cauchy_upper_tail_quadrature(0.0, 0.5, 0.5), 0.25, 1e-10);
}

TEST(Survival, MonotoneAndBounded) {
  for (const auto &spec : all_families()) {
    double prev = 1.0;
    for (double lam = -15.0; lam <= 15.0; lam += 0.01) {
      const double t = survival(spec, lam);
      ASSERT_GE(t, 0.0);
      ASSERT_LE(t, 1.0);
      ASSERT_LE(t, prev + 1e-15) << spec.family_name() << " at " << lam;
      prev = t;
    }
  }
}

TEST(LambdaOfT, ClosedFormValues) {
  EXPECT_NEAR(lambda_of_t(make_schedule(family::Cosine{}), 0.5), 0.0, 1e-15);
  const auto laplace = make_schedule(family::Laplace{0.0, 0.5});
  EXPECT_NEAR(lambda_of_t(laplace, 0.25), 0.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(oracle::bisect_survival(laplace, 0.25), 0.5 * std::log(2.0), 1e-12);
  EXPECT_NEAR(lambda_of_t(make_schedule(family::CosineShifted{1.0}), 0.5), 1.0, 1e-15);
  const auto scaled = make_schedule(family::CosineScaled{2.0});
  // log cot(pi/8) = log(1 + sqrt 2)
  EXPECT_NEAR(lambda_of_t(scaled, 0.25), std::log(1.0 + std::sqrt(2.0)), 1e-14);
  EXPECT_NEAR(oracle::bisect_survival(scaled, 0.25), 0.881373587019543, 1e-12);
}

TEST(LambdaOfT, EndpointsAndClamp) {
  for (const auto &spec : all_families()) {
    EXPECT_EQ(lambda_of_t(spec, 0.0), spec.clamp.hi);
    EXPECT_EQ(lambda_of_t(spec, 1.0), spec.clamp.lo);
    EXPECT_THROW(lambda_of_t(spec, -1e-9), domain_error);
    EXPECT_THROW(lambda_of_t(spec, 1.0 + 1e-9), domain_error);
    EXPECT_THROW(lambda_of_t(spec, std::nan("")), domain_error);
  }
  // Cauchy diverges near the ends; the clamp bounds it
  const auto cauchy = make_schedule(family::Cauchy{0.0, 1.0}, {-15.0, 15.0});
  EXPECT_EQ(lambda_of_t(cauchy, 1e-6), 15.0);
  EXPECT_EQ(lambda_of_t(cauchy, 1.0 - 1e-6), -15.0);
}

TEST(LambdaOfT, StrictlyDecreasingInInterior) {
  for (const auto &spec : all_families()) {
    double prev = INFINITY;
    for (int i = 1; i < 1000; ++i) {
      const double t = i / 1000.0;
      const double lam = lambda_of_t(spec, t);
      if (lam > spec.clamp.lo && lam < spec.clamp.hi) {
        ASSERT_LT(lam, prev) << spec.family_name() << " t=" << t;
      }
      prev = lam;
    }
  }
}

TEST(LambdaOfT, RoundtripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lam_dist(-12.0, 12.0);
  for (const auto &spec : all_families()) {
    for (int i = 0; i < 2000; ++i) {
      const double lam = lam_dist(rng);
      const double t = survival(spec, lam);
      if (std::min(t, 1.0 - t) < kRoundtripTailMass) {
        continue;
      }
      ASSERT_NEAR(lambda_of_t(spec, t), lam, 1e-6) << spec.family_name() << " lam=" << lam;
    }
  }
}

TEST(LambdaOfT, SpecialCaseReductions) {
  const auto cosine = make_schedule(family::Cosine{});
  const auto scaled = make_schedule(family::CosineScaled{1.0});
  const auto shifted = make_schedule(family::CosineShifted{0.0});
  const auto poly = make_schedule(family::CosinePoly{0});
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    const double ref = lambda_of_t(cosine, t);
    ASSERT_NEAR(lambda_of_t(scaled, t), ref, 1e-10);
    ASSERT_NEAR(lambda_of_t(shifted, t), ref, 1e-10);
    ASSERT_NEAR(lambda_of_t(poly, t), ref, 1e-10);
  }
}

TEST(LambdaOfT, GaussianFamiliesAgainstBisection) {
  for (const auto &spec : {make_schedule(family::EdmLogNormal{2.4, 2.4}),
                           make_schedule(family::FmLogitNormal{0.3, 0.8})}) {
    for (double t : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-7}) {
      EXPECT_NEAR(lambda_of_t(spec, t), oracle::bisect_survival(spec, t), 1e-9) << t;
    }
  }
}

TEST(AlphaSigma, Values) {
  const auto c0 = alpha_sigma(0.0);
  EXPECT_NEAR(c0.alpha, std::sqrt(0.5), 1e-16);
  EXPECT_NEAR(c0.sigma, std::sqrt(0.5), 1e-16);
  const auto c2 = alpha_sigma(2.0);
  EXPECT_NEAR(c2.alpha * c2.alpha, 0.8807970779778823, 1e-15);
  EXPECT_NEAR(c2.sigma * c2.sigma, 0.11920292202211755, 1e-15);
  EXPECT_NEAR(std::log(c2.alpha * c2.alpha / (c2.sigma * c2.sigma)), 2.0, 1e-12);
  const auto hi = alpha_sigma(15.0);
  EXPECT_GT(hi.alpha, 0.9999996);
  EXPECT_GT(hi.sigma, 0.0);
  EXPECT_LT(hi.sigma, 6e-4);
}

TEST(AlphaSigma, VariancePreservingProperty) {
  for (double lam = -30.0; lam <= 30.0; lam += 0.37) {
    const auto c = alpha_sigma(lam);
    ASSERT_NEAR(c.alpha * c.alpha + c.sigma * c.sigma, 1.0, 1e-12);
    ASSERT_GT(c.alpha, 0.0);
    ASSERT_GT(c.sigma, 0.0);
    ASSERT_NEAR(std::log(c.alpha * c.alpha) - std::log(c.sigma * c.sigma), lam, 1e-10);
  }
}

TEST(PolyTimeWarp, FixedPointsAndValues) {
  EXPECT_DOUBLE_EQ(poly_time_warp(0.3, 0), 0.3);
  for (int n : {0, 1, 2, 5}) {
    EXPECT_NEAR(poly_time_warp(0.5, n), 0.5, 1e-15);
    EXPECT_EQ(poly_time_warp(0.0, n), 0.0);
    EXPECT_NEAR(poly_time_warp(1.0, n), 1.0, 1e-15);
  }
  EXPECT_NEAR(poly_time_warp(0.125, 2), std::pow(0.5, 2.0 / 3.0) * 0.5, 1e-15);
  EXPECT_NEAR(poly_time_warp(0.125, 2), 0.31498026247371830, 1e-15);
  EXPECT_THROW(poly_time_warp(0.3, -1), domain_error);
}

TEST(PolyTimeWarp, WarpedUniformHasPolynomialDensity) {
  // CDF of t' under density C t'^n (C = (n+1) 2^n) is 2^n x^(n+1) below 1/2
  const int n = 2;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int samples = 200000;
  std::vector<double> warped(samples);
  for (auto &w : warped) {
    w = poly_time_warp(u(rng), n);
  }
  for (double x : {0.1, 0.25, 0.4, 0.6, 0.9}) {
    double count = 0;
    for (double w : warped) {
      count += w <= x ? 1.0 : 0.0;
    }
    const double expected = x < 0.5 ? std::pow(2.0, n) * std::pow(x, n + 1)
                                    : 1.0 - std::pow(2.0, n) * std::pow(1.0 - x, n + 1);
    EXPECT_NEAR(count / samples, expected, 0.005) << x;
  }
}

TEST(PolyTimeWarp, MonotoneBijection) {
  for (int n : {1, 2, 3}) {
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double t = i / 1000.0;
      const double w = poly_time_warp(t, n);
      ASSERT_GT(w, prev);
      ASSERT_NEAR(poly_time_unwarp(w, n), t, 1e-12);
      prev = w;
    }
  }
}

TEST(ValidateSchedule, DocumentedExamples) {
  const auto cos_rep = validate_schedule(make_schedule(family::Cosine{}), 10000);
  EXPECT_LT(cos_rep.normalization_error, 1e-6);
  EXPECT_EQ(cos_rep.grid_size, 10000u);

  const auto lap = make_schedule(family::Laplace{0.0, 1.0}, {-10.0, 10.0});
  EXPECT_LT(validate_schedule(lap, 10000).max_roundtrip_error, 1e-9);

  const auto cauchy = make_schedule(family::Cauchy{1.0, 1.0});
  const auto rep = validate_schedule(cauchy, 10000);
  EXPECT_LT(rep.max_density_vs_derivative_error, 1e-4);
  const double analytic_mass = (std::atan(16.0) + std::atan(14.0)) / kPi;
  EXPECT_NEAR(rep.in_range_mass, analytic_mass, 1e-12);
  EXPECT_NEAR(rep.integral, analytic_mass, 1e-6);

  EXPECT_THROW(validate_schedule(lap, 99), domain_error);
}

TEST(ValidateSchedule, NormalizationWithinClamp) {
  // raw in-range integral lies in [0.999, 1] wherever the tails beyond +-15 are negligible
  for (const auto &spec : {make_schedule(family::Cosine{}), make_schedule(family::Laplace{0, 0.5}),
                           make_schedule(family::CosineScaled{2.0}),
                           make_schedule(family::CosinePoly{2}),
                           make_schedule(family::EdmLogNormal{}),
                           make_schedule(family::FmLogitNormal{0.0, 1.0})}) {
    const auto rep = validate_schedule(spec, 10000);
    EXPECT_GE(rep.integral, 0.999) << spec.family_name();
    EXPECT_LE(rep.integral, 1.0 + 1e-9) << spec.family_name();
  }
}

TEST(ValidateSchedule, DensityDerivativeConsistency) {
  for (const auto &spec : all_families()) {
    const auto rep = validate_schedule(spec, 4001);
    EXPECT_LT(rep.max_density_vs_derivative_error, 1e-4) << spec.family_name();
    EXPECT_LT(rep.max_roundtrip_error, 1e-6) << spec.family_name();
  }
}

TEST(NormalQuantile, AgainstBisection) {
  for (double p : {1e-12, 1e-6, 0.01, 0.02425, 0.3, 0.5, 0.8, 0.97575, 0.999999}) {
    // Upper half by symmetry, so the reference sees the same rounded tail mass 1 - p.
    const double ref =
        p > 0.5 ? -oracle::bisect_normal_quantile(1.0 - p) : oracle::bisect_normal_quantile(p);
    EXPECT_NEAR(normal::quantile(p), ref, 1e-12 * std::max(1.0, std::abs(ref))) << p;
    EXPECT_NEAR(normal::quantile_approx(p), ref, 1.2e-9 * std::max(1.0, std::abs(ref))) << p;
  }
  EXPECT_THROW(normal::quantile(0.0), domain_error);
  EXPECT_THROW(normal::quantile(1.0), domain_error);
}

TEST(ScheduleJson, RoundTripAllFamilies) {
  for (const auto &spec : all_families()) {
    const auto j = to_json(spec);
    EXPECT_EQ(schedule_from_json(j), spec) << j.dump();
  }
  const auto custom = make_schedule(family::Laplace{0.25, 0.75}, {-12.0, 9.0});
  EXPECT_EQ(schedule_from_json(to_json(custom)), custom);
}

TEST(ScheduleJson, ParsesDocumentedForm) {
  const auto spec = schedule_from_json_text(
      R"({"family": "laplace", "mu": 0.0, "b": 0.5, "lambda_clamp": [-15.0, 15.0]})");
  EXPECT_EQ(spec, make_schedule(family::Laplace{0.0, 0.5}));
  EXPECT_EQ(spec.family_name(), "laplace");
}

TEST(ScheduleJson, RejectsBadInput) {
  EXPECT_THROW(schedule_from_json_text(R"({"family": "laplace", "mu": 0, "b": 0.5, "x": 1})"),
               parse_error);
  EXPECT_THROW(schedule_from_json_text(R"({"family": "laplace", "mu": 0})"), parse_error);
  EXPECT_THROW(schedule_from_json_text(R"({"family": "sigmoid"})"), parse_error);
  EXPECT_THROW(schedule_from_json_text(R"({"family": "cosine", "lambda_clamp": [1]})"),
               parse_error);
  EXPECT_THROW(schedule_from_json_text("{not json"), parse_error);
  EXPECT_THROW(schedule_from_json_text(R"({"family": "laplace", "mu": 0, "b": -1})"),
               domain_error);
}

TEST(Presets, NamedSettings) {
  EXPECT_EQ(preset("laplace_best"), make_schedule(family::Laplace{0.0, 0.5}));
  EXPECT_EQ(preset("cauchy_best"), make_schedule(family::Cauchy{0.0, 0.5}));
  EXPECT_EQ(preset("cosine_scaled_best"), make_schedule(family::CosineScaled{2.0}));
  EXPECT_THROW(preset("nope"), domain_error);
}
