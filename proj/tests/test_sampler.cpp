#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "snrforge/eval.hpp"
#include "snrforge/sampler.hpp"

using namespace snrforge;

namespace {

/// Predicts the exact target for a dataset made of the single point `x`.
auto oracle_predictor(const ScheduleSpec &schedule, PredictTarget target, const Vec2 &x) {
  return [schedule, target, x](const Eigen::Matrix2Xd &x_t, std::span<const double> t) {
    Eigen::Matrix2Xd out(2, x_t.cols());
    for (Eigen::Index j = 0; j < x_t.cols(); ++j) {
      const double lam = lambda_of_t(schedule, t[static_cast<std::size_t>(j)]);
      const auto [alpha, sigma] = alpha_sigma(lam);
      const Vec2 eps = (Vec2(x_t.col(j)) - alpha * x) / sigma;
      out.col(j) = make_target(target, x, eps, lam);
    }
    return out;
  };
}

} // namespace

TEST(BuildPlan, CosineIsSelfAligned) {
  const auto plan = build_plan(make_schedule(family::Cosine{}), 50, 1.0);
  ASSERT_EQ(plan.t.size(), 51u);
  ASSERT_EQ(plan.lambdas.size(), 51u);
  ASSERT_EQ(plan.t_primes.size(), 51u);
  for (std::size_t i = 0; i < plan.t.size(); ++i) {
    EXPECT_NEAR(plan.t_primes[i], plan.t[i], 1e-9) << i;
    EXPECT_NEAR(plan.t[i], 1.0 - static_cast<double>(i) / 50.0, 1e-15);
  }
  EXPECT_EQ(plan.lambdas.front(), -15.0);
  EXPECT_EQ(plan.lambdas.back(), 15.0);
}

TEST(BuildPlan, DefaultTMax) {
  const auto plan = build_plan(make_schedule(family::Cosine{}), 50);
  EXPECT_EQ(plan.t.front(), 0.99);
  EXPECT_NEAR(plan.lambdas.front(), 2.0 * std::log(std::tan(0.005 * std::numbers::pi)), 1e-12);
  for (std::size_t i = 0; i < plan.t.size(); ++i) {
    EXPECT_NEAR(plan.t_primes[i], plan.t[i], 1e-9) << i;
  }
}

TEST(BuildPlan, LaplaceMidpoint) {
  const auto plan = build_plan(make_schedule(family::Laplace{0.0, 0.5}), 2, 1.0);
  EXPECT_NEAR(plan.lambdas[1], 0.0, 1e-15);
  EXPECT_NEAR(plan.t_primes[1], 0.5, 1e-15);
}

TEST(BuildPlan, LaplaceVisitsCosineNoiseLevels) {
  const auto lap = make_schedule(family::Laplace{0.0, 0.5});
  const auto plan = build_plan(lap, 50);
  for (std::size_t i = 0; i < plan.t.size(); ++i) {
    const auto want = alpha_sigma(plan.lambdas[i]);
    const auto got = alpha_sigma(lambda_of_t(lap, plan.t_primes[i]));
    EXPECT_NEAR(got.alpha, want.alpha, 1e-8) << i;
    EXPECT_NEAR(got.sigma, want.sigma, 1e-8) << i;
  }
}

TEST(BuildPlan, LambdasAreSharedAcrossSchedules) {
  const std::vector<ScheduleSpec> schedules = {
      make_schedule(family::Cosine{}),          make_schedule(family::Laplace{0.0, 0.5}),
      make_schedule(family::Cauchy{0.0, 0.5}),  make_schedule(family::CosineScaled{2.0}),
      make_schedule(family::FlowMatchOT{}),     make_schedule(family::EdmLogNormal{2.4, 2.4}),
  };
  const auto ref = build_plan(schedules[0], 30, 0.95);
  for (const auto &s : schedules) {
    const auto p = build_plan(s, 30, 0.95);
    ASSERT_EQ(p.lambdas.size(), ref.lambdas.size());
    for (std::size_t i = 0; i < p.lambdas.size(); ++i) {
      EXPECT_NEAR(p.lambdas[i], ref.lambdas[i], 1e-9);
      if (i > 0) {
        EXPECT_GT(p.lambdas[i], p.lambdas[i - 1]);
        EXPECT_LE(p.t_primes[i], p.t_primes[i - 1]);
      }
    }
  }
}

TEST(BuildPlan, RejectsBadArguments) {
  const auto cos = make_schedule(family::Cosine{});
  EXPECT_THROW(build_plan(cos, 0), domain_error);
  EXPECT_THROW(build_plan(cos, 10, 0.0), domain_error);
  EXPECT_THROW(build_plan(cos, 10, 1.5), domain_error);
}

TEST(DdimStep, Algebra) {
  const Vec2 x(0.7, -1.2);
  const Vec2 eps(-0.4, 0.9);
  for (double lam : {-4.0, 0.0, 2.5, 9.0}) {
    const Vec2 expected = forward_noise(x, lam, eps);
    EXPECT_LT((ddim_step(Vec2::Zero(), x, eps, lam) - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
  const Vec2 end = ddim_step(Vec2::Zero(), x, eps, 15.0);
  EXPECT_LT((end - x).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Sample, OracleRecoversSinglePoint) {
  const Vec2 point(1.25, -0.5);
  for (const auto &schedule :
       {make_schedule(family::Cosine{}), make_schedule(family::Laplace{0.0, 0.5})}) {
    const auto plan = build_plan(schedule, 50);
    for (auto target : {PredictTarget::Epsilon, PredictTarget::X0, PredictTarget::V}) {
      const auto out =
          sample_with(oracle_predictor(schedule, target, point), target, plan, 16, 3);
      for (const auto &p : out) {
        EXPECT_LT((p - point).cwiseAbs().maxCoeff(), 1e-6) << target_name(target);
      }
    }
  }
}

TEST(Sample, OracleSingleStepIsExact) {
  const Vec2 point(-2.0, 0.25);
  const auto schedule = make_schedule(family::Cosine{});
  const auto plan = build_plan(schedule, 1);
  const auto out =
      sample_with(oracle_predictor(schedule, PredictTarget::V, point), PredictTarget::V, plan, 4, 9);
  for (const auto &p : out) {
    EXPECT_LT((p - point).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Sample, ZeroModelRescalesInitialNoise) {
  const auto schedule = make_schedule(family::Laplace{0.0, 0.5});
  const auto plan = build_plan(schedule, 20);
  const auto params = zero_params({16, 2});
  const auto out = sample(params, PredictTarget::Epsilon, plan, 5, 42);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    // hand simulation: eps_hat = 0, x0_hat = x / alpha_i, x <- alpha_{i+1} x0_hat
    Vec2 x = initial_noise(42, i);
    for (int s = 0; s < plan.steps; ++s) {
      const double a = alpha_sigma(plan.lambdas[static_cast<std::size_t>(s)]).alpha;
      const Vec2 x0 = x / a;
      x = s + 1 == plan.steps ? x0 : alpha_sigma(plan.lambdas[static_cast<std::size_t>(s) + 1]).alpha * x0;
    }
    EXPECT_LT((out[i] - x).cwiseAbs().maxCoeff(), 1e-12);
    const Vec2 closed = initial_noise(42, i) / alpha_sigma(plan.lambdas.front()).alpha;
    EXPECT_LT((out[i] - closed).cwiseAbs().maxCoeff(), 1e-9 * closed.norm());
  }
}

TEST(Sample, EmptyAndDeterministic) {
  const auto schedule = make_schedule(family::Cosine{});
  const auto plan = build_plan(schedule, 10);
  const auto params = init_params({16, 2}, 1);
  EXPECT_TRUE(sample(params, PredictTarget::V, plan, 0, 1).empty());
  const auto a = sample(params, PredictTarget::V, plan, 64, 7);
  const auto b = sample(params, PredictTarget::V, plan, 64, 7);
  const auto c = sample(params, PredictTarget::V, plan, 64, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // per-point noise depends only on (seed, index)
  const auto prefix = sample(params, PredictTarget::V, plan, 10, 7);
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    EXPECT_EQ(prefix[i], a[i]);
  }
  const auto serial = sample(params, PredictTarget::V, plan, 600, 7);
  EXPECT_EQ(sample(params, PredictTarget::V, plan, 600, 7, 3), serial);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(serial[i], a[i]);
  }
}

TEST(Sample, NonFiniteStateIsDivergence) {
  const auto plan = build_plan(make_schedule(family::Cosine{}), 10);
  auto bad = [](const Eigen::Matrix2Xd &x, std::span<const double>) {
    return Eigen::Matrix2Xd::Constant(2, x.cols(), std::numeric_limits<double>::quiet_NaN());
  };
  try {
    sample_with(bad, PredictTarget::V, plan, 3, 0);
    FAIL() << "expected divergence";
  } catch (const divergence_error &e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(Sample, PlanMustMatchSchedule) {
  TrainConfig c;
  c.model = {8, 2};
  const auto state = make_train_state(c);
  const auto lap = make_schedule(family::Laplace{0.0, 0.5});
  EXPECT_THROW(sample(state, lap, build_plan(make_schedule(family::Cosine{}), 5), 4, 0),
               domain_error);
  EXPECT_NO_THROW(sample(state, lap, build_plan(lap, 5), 4, 0));
}

TEST(Sample, TrainedModelBeatsUntrained) {
  TrainConfig c;
  c.schedule = make_schedule(family::Cosine{});
  c.weighting = weights::CosineEps{};
  c.target = PredictTarget::V;
  c.adam.lr = 1e-3;
  c.seed = 2;
  const auto data = make_dataset(DatasetKind::GaussianMixture8, 8192, 2);
  const auto held_out = make_dataset(DatasetKind::GaussianMixture8, 2048, 99);
  const auto plan = build_plan(c.schedule, 50);
  const auto untrained = make_train_state(c);
  const auto trained = train(c, data, 2000).state;
  const double before =
      sliced_wasserstein(sample(untrained, c.schedule, plan, 2048, 5), held_out.points, 128, 1);
  const double after =
      sliced_wasserstein(sample(trained, c.schedule, plan, 2048, 5), held_out.points, 128, 1);
  EXPECT_LT(after, before);
}
