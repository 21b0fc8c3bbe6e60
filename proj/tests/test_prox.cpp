#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsemirror/iterate.hpp"
#include "sparsemirror/prox.hpp"

namespace sparsemirror {
namespace {

TEST(Prox, StartPoints) {
  EXPECT_EQ(start_point(ProxSetup::entropy_simplex(4)), (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(start_point(ProxSetup::euclidean_free(3)), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(start_point(ProxSetup::euclidean_orthant({1, 2})), (std::vector<double>{1, 2}));
  EXPECT_THROW(ProxSetup::euclidean_orthant({1, 0}), std::invalid_argument);
  EXPECT_THROW(ProxSetup::euclidean_orthant({-1, 2}), std::invalid_argument);
}

TEST(Prox, EuclideanFreeStep) {
  const ProxSetup setup = ProxSetup::euclidean_free(2);
  std::vector<double> x{1, 1};
  std::vector<CoordinateDelta> changes;
  euclidean_mirror_step(setup, x, {{0, 2}}, 0.5, &changes);
  EXPECT_EQ(x, (std::vector<double>{0, 1}));
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes[0].index, 0u);
  EXPECT_EQ(changes[0].delta, -1.0);
}

TEST(Prox, EuclideanOrthantClips) {
  const ProxSetup setup = ProxSetup::euclidean_orthant({1, 1});
  std::vector<double> x{1, 1};
  euclidean_mirror_step(setup, x, {{0, 2}, {1, -1}}, 1.0);
  EXPECT_EQ(x, (std::vector<double>{0, 2}));
}

TEST(Prox, EntropyStepMatchesMultiplicativeFormula) {
  SimplexState s(2);
  s.step({{0, 1.0}}, std::log(2.0));
  const std::vector<double> x = s.materialize();
  EXPECT_NEAR(x[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(x[1], 2.0 / 3.0, 1e-15);
}

TEST(Prox, StepErrors) {
  const ProxSetup setup = ProxSetup::euclidean_free(2);
  std::vector<double> x{1, 1};
  EXPECT_THROW(euclidean_mirror_step(setup, x, {{0, 1}}, 0.0), std::invalid_argument);
  EXPECT_THROW(euclidean_mirror_step(setup, x, {{0, NAN}}, 1.0), std::invalid_argument);
  EXPECT_THROW(euclidean_mirror_step(setup, x, {{5, 1}}, 1.0), std::out_of_range);
  SimplexState s(2);
  EXPECT_THROW(s.step({{0, INFINITY}}, 1.0), std::invalid_argument);
  EXPECT_THROW(s.step({{0, 1}}, -1.0), std::invalid_argument);
}

TEST(Prox, ZeroGradientIsIdentity) {
  for (const ProxSetup& setup :
       {ProxSetup::euclidean_free(3), ProxSetup::euclidean_orthant({1, 2, 3}), ProxSetup::entropy_simplex(3)}) {
    Iterate it(setup);
    const std::vector<double> before(it.point().begin(), it.point().end());
    const StepOutcome out = it.step({{0, 0.0}, {2, 0.0}}, 0.7);
    EXPECT_TRUE(out.changes.empty());
    EXPECT_EQ(std::vector<double>(it.point().begin(), it.point().end()), before);
  }
}

TEST(Prox, EuclideanFreeStepIsLinear) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> v(0.0, 1.0);
  const ProxSetup setup = ProxSetup::euclidean_free(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(5);
    for (double& e : x) e = v(rng);
    const SparseVector g1{{1, v(rng)}, {3, v(rng)}};
    const SparseVector g2{{0, v(rng)}, {3, v(rng)}};
    SparseVector sum{{0, g2[0].value}, {1, g1[0].value}, {3, g1[1].value + g2[1].value}};
    std::vector<double> once = x, twice = x;
    euclidean_mirror_step(setup, once, sum, 0.3);
    euclidean_mirror_step(setup, twice, g1, 0.3);
    euclidean_mirror_step(setup, twice, g2, 0.3);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(once[i], twice[i], 1e-14);
  }
}

TEST(Prox, OrthantStaysNonnegative) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> v(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> idx(0, 9);
  Iterate it(ProxSetup::euclidean_orthant(std::vector<double>(10, 0.5)));
  for (int step = 0; step < 10000; ++step) {
    it.step({{idx(rng), v(rng)}}, 0.1);
    for (double x : it.point()) ASSERT_GE(x, 0.0);
  }
}

TEST(Prox, SimplexRebaseKeepsPoint) {
  SimplexState s(3);
  // drive coordinate 0 far up so the log-weights must be rebased
  for (int k = 0; k < 20; ++k) s.step({{0, -50.0}}, 1.0);
  EXPECT_GE(s.rebase_count(), 1u);
  const std::vector<double> x = s.materialize();
  // dense reference: x_i proportional to exp(-sum alpha g_i)
  const double l0 = 1000.0;
  const double z = std::exp(0.0) + 2.0 * std::exp(-l0);
  EXPECT_NEAR(x[0], 1.0 / z, 1e-15);
  EXPECT_NEAR(x[1], std::exp(-l0) / z, 1e-300);
  for (double lw : s.log_weights()) EXPECT_LE(lw, SimplexState::kRebaseLimit);
}

TEST(Prox, SimplexRebaseOnVanishingNormalizer) {
  SimplexState s(2);
  for (int k = 0; k < 10; ++k) s.step({{0, 40.0}, {1, 41.0}}, 1.0);
  EXPECT_GE(s.rebase_count(), 1u);
  const std::vector<double> x = s.materialize();
  EXPECT_NEAR(x[0], 1.0 / (1.0 + std::exp(-10.0)), 1e-12);
  EXPECT_NEAR(x[0] + x[1], 1.0, 1e-15);
}

TEST(Prox, SimplexIncrementalNormalizerStaysAccurate) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> idx(0, 49);
  std::normal_distribution<double> v(0.0, 2.0);
  // refresh effectively disabled: this checks the compensated updates alone
  SimplexState s(50, std::size_t{1} << 40);
  double worst = 0.0;
  for (int step = 0; step < 100000; ++step) {
    s.step({{idx(rng), v(rng)}, {idx(rng), v(rng)}}, 0.05);
    if (step % 1000 == 999) worst = std::max(worst, std::abs(s.log_normalizer() - s.dense_log_normalizer()));
  }
  EXPECT_LE(worst, 1e-10);
  const std::vector<double> x = s.materialize();
  double sum = 0.0;
  for (double e : x) {
    EXPECT_GE(e, 0.0);
    sum += e;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Prox, SimplexNormalizerSurvivesCollapse) {
  // one weight dominates Z, then drops back: the incremental sum cancels
  SimplexState s(4, 1'000'000);
  for (int round = 0; round < 50; ++round) {
    s.step({{0, -25.0}}, 10.0);
    s.step({{1, 0.3}, {2, -0.7}}, 1.0);
    s.step({{0, 25.0}}, 10.0);
    EXPECT_NEAR(s.log_normalizer(), s.dense_log_normalizer(), 1e-12) << "round " << round;
    double sum = 0.0;
    for (double x : s.materialize()) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Prox, StepSizes) {
  EXPECT_DOUBLE_EQ(step_size(TargetAccuracy{0.1, 2.0}), 0.025);
  EXPECT_DOUBLE_EQ(step_size(FixedHorizon{1.0, 1.0, 2}), 1.0);
  EXPECT_DOUBLE_EQ(simplex_step_size(1.0, 1.0, 2), 1.0);
  EXPECT_THROW(step_size(TargetAccuracy{0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(step_size(FixedHorizon{1.0, -1.0, 2}), std::invalid_argument);
  EXPECT_THROW(step_size(FixedHorizon{1.0, 1.0, 0}), std::invalid_argument);
}

TEST(Prox, BregmanDistances) {
  const std::vector<double> x{0.5, 0.5}, y{0.25, 0.75};
  EXPECT_DOUBLE_EQ(bregman_distance(ProxSetup::euclidean_free(2), x, y), 0.0625);
  const double kl = 0.25 * std::log(0.5) + 0.75 * std::log(1.5);
  EXPECT_NEAR(bregman_distance(ProxSetup::entropy_simplex(2), x, y), kl, 1e-15);
  EXPECT_EQ(bregman_distance(ProxSetup::entropy_simplex(2), x, x), 0.0);
}

}  // namespace
}  // namespace sparsemirror
