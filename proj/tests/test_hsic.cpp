#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mipeaks/hsic.hpp"
#include "support.hpp"

using namespace mipeaks;
using testsupport::random_matrix;

namespace {

SampleSet samples(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t d = rows.begin()->size();
  MatrixD m(rows.size(), d);
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return SampleSet(m);
}

RepresentationTrace trace_from(const MatrixD& steps, const MatrixD& gold) {
  RepresentationTrace t;
  t.steps = testsupport::to_float(steps);
  t.gold = testsupport::to_float(gold);
  return t;
}

}  // namespace

TEST(GaussianKernel, IdenticalRowsGiveAllOnes) {
  const auto k = gaussian_kernel_matrix(samples({{1.5, -2.0}, {1.5, -2.0}}), 3.0);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(k(i, j), 1.0);
  }
}

TEST(GaussianKernel, DistanceSigmaRootTwoGivesInverseE) {
  const double sigma = 7.0;
  const auto k = gaussian_kernel_matrix(samples({{0.0}, {sigma * std::sqrt(2.0)}}), sigma);
  EXPECT_NEAR(k(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(k(0, 1), 0.367879, 1e-6);
}

TEST(GaussianKernel, MatchesScalarLoop) {
  std::mt19937_64 rng(11);
  const MatrixD x = random_matrix(rng, 4, 5, 80.0);
  const auto k = gaussian_kernel_matrix(SampleSet(x), 100.0);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(k(i, j), testsupport::kernel_entry(x, i, j, 100.0), 1e-12);
      EXPECT_GT(k(i, j), 0.0);
      EXPECT_LE(k(i, j), 1.0);
      EXPECT_EQ(k(i, j), k(j, i));
    }
    EXPECT_EQ(k(i, i), 1.0);
  }
}

TEST(GaussianKernel, RejectsBadInput) {
  EXPECT_THROW(gaussian_kernel_matrix(samples({{0.0}, {1.0}}), 0.0), DomainError);
  EXPECT_THROW(gaussian_kernel_matrix(samples({{0.0}, {1.0}}), -1.0), DomainError);
  MatrixD bad(2, 1, 0.0);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(SampleSet{bad}, InvalidInput);
}

TEST(Hsic, ConstantYIsZero) {
  std::mt19937_64 rng(3);
  const SampleSet x(random_matrix(rng, 10, 3, 50.0));
  const SampleSet y(MatrixD(10, 2, 4.0));
  EXPECT_NEAR(hsic_biased(x, y, 100.0, 100.0), 0.0, 1e-12);
}

TEST(Hsic, MatchesExhaustiveSummationForThreeRows) {
  std::mt19937_64 rng(5);
  const MatrixD x = random_matrix(rng, 3, 2, 100.0);
  const MatrixD y = random_matrix(rng, 3, 2, 100.0);
  const double v = testsupport::hsic_exhaustive(x, y, 100.0, 100.0) * 9.0 / 4.0;
  EXPECT_NEAR(hsic_biased(SampleSet(x), SampleSet(y), 100.0, 100.0), v, 1e-10);
}

TEST(Hsic, SelfDependenceIsPositive) {
  std::mt19937_64 rng(8);
  const SampleSet x(random_matrix(rng, 8, 3, 100.0));
  EXPECT_GT(hsic_biased(x, x, 100.0, 100.0), 0.0);
}

TEST(Hsic, MismatchedSizesThrow) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(hsic_biased(SampleSet(random_matrix(rng, 4, 2)), SampleSet(random_matrix(rng, 5, 2)), 1.0, 1.0),
               ShapeError);
}

TEST(Hsic, SymmetricAndTranslationInvariant) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    MatrixD x = random_matrix(rng, 12, 3, 60.0);
    const MatrixD y = random_matrix(rng, 12, 2, 60.0);
    const double a = hsic_biased(SampleSet(x), SampleSet(y), 80.0, 120.0);
    const double b = hsic_biased(SampleSet(y), SampleSet(x), 120.0, 80.0);
    EXPECT_NEAR(a, b, 1e-12);
    EXPECT_GE(a, -1e-12);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      x(r, 0) += 250.0;
      x(r, 2) -= 31.0;
    }
    EXPECT_NEAR(hsic_biased(SampleSet(x), SampleSet(y), 80.0, 120.0), a, 1e-10);
  }
}

TEST(Bandwidth, ExplicitPassesThrough) {
  std::mt19937_64 rng(2);
  std::vector<StepSamples> steps{{SampleSet(random_matrix(rng, 4, 2)), SampleSet(random_matrix(rng, 4, 2))}};
  KernelConfig k;
  k.mode = BandwidthMode::explicit_value;
  k.bandwidth = 200.0;
  EXPECT_EQ(select_bandwidth(steps, k), 200.0);
}

TEST(Bandwidth, MedianOfPairwiseDistances) {
  const MatrixD rows(3, 1, std::vector<double>{0.0, 2.0, 4.0});
  std::vector<std::span<const double>> r{rows.row(0), rows.row(1), rows.row(2)};
  EXPECT_DOUBLE_EQ(median_pairwise_distance(r), 2.0);
}

TEST(Bandwidth, MedianDegenerateThrows) {
  std::vector<StepSamples> steps{{SampleSet(MatrixD(3, 2, 1.0)), SampleSet(MatrixD(3, 2, 1.0))}};
  KernelConfig k;
  k.mode = BandwidthMode::median_heuristic;
  EXPECT_THROW(select_bandwidth(steps, k), DegenerateInput);
}

TEST(Bandwidth, GridTieGoesToSmallerSigma) {
  // Constant gold: every sigma yields an all-zero MI sequence.
  std::mt19937_64 rng(4);
  std::vector<StepSamples> steps;
  for (int s = 0; s < 3; ++s) steps.push_back({SampleSet(random_matrix(rng, 5, 2)), SampleSet(MatrixD(5, 2, 1.0))});
  KernelConfig k;
  k.grid = {50.0, 100.0};
  EXPECT_EQ(select_bandwidth(steps, k), 50.0);
}

TEST(Bandwidth, EmptyGridIsConfigError) {
  KernelConfig k;
  k.grid.clear();
  EXPECT_THROW(k.validate(), ConfigError);
}

TEST(MiTrajectory, CopiedGoldBeatsShuffledGold) {
  std::mt19937_64 rng(17);
  const std::size_t n = 8, T = 4, d = 3;
  std::vector<MatrixD> gold;
  for (std::size_t i = 0; i < n; ++i) gold.push_back(random_matrix(rng, 1, d, 100.0));
  auto build = [&](const std::vector<std::size_t>& assign) {
    std::vector<RepresentationTrace> traces;
    for (std::size_t i = 0; i < n; ++i) {
      MatrixD steps(T, d);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t e = 0; e < d; ++e) steps(t, e) = gold[i](0, e);
      }
      traces.push_back(trace_from(steps, gold[assign[i]]));
    }
    return traces;
  };
  std::vector<std::size_t> same(n), perm(n);
  for (std::size_t i = 0; i < n; ++i) same[i] = i;
  perm = same;
  std::shuffle(perm.begin(), perm.end(), rng);
  KernelConfig k;
  k.mode = BandwidthMode::explicit_value;
  k.bandwidth = 150.0;
  const auto a = mi_trajectory(build(same), k, MiMode::batch_anchored);
  const auto b = mi_trajectory(build(perm), k, MiMode::batch_anchored);
  ASSERT_EQ(a.values.size(), T);
  for (std::size_t t = 0; t < T; ++t) EXPECT_GT(a.values[t], b.values[t]);
  EXPECT_EQ(a.coverage, std::vector<std::size_t>(T, n));
}

TEST(MiTrajectory, BatchStopsWhenContributorsDropBelowMinimum) {
  std::mt19937_64 rng(9);
  std::vector<RepresentationTrace> traces;
  for (std::size_t i = 0; i < 9; ++i) {
    const std::size_t len = i < 8 ? 5 : 9;
    traces.push_back(trace_from(random_matrix(rng, len, 2, 50.0), random_matrix(rng, 1, 2, 50.0)));
  }
  const auto mi = mi_trajectory(traces, KernelConfig{}, MiMode::batch_anchored);
  EXPECT_EQ(mi.values.size(), 5u);
  EXPECT_EQ(mi.coverage, std::vector<std::size_t>(5, 9));
}

TEST(MiTrajectory, TooFewTracesIsInsufficient) {
  std::mt19937_64 rng(9);
  std::vector<RepresentationTrace> traces;
  for (int i = 0; i < 7; ++i) traces.push_back(trace_from(random_matrix(rng, 3, 2), random_matrix(rng, 1, 2)));
  EXPECT_THROW(mi_trajectory(traces, KernelConfig{}, MiMode::batch_anchored), InsufficientData);
}

TEST(MiTrajectory, SingleModeConstantStepsIsZero) {
  std::mt19937_64 rng(6);
  const auto t = trace_from(MatrixD(20, 3, 2.5), random_matrix(rng, 4, 3, 100.0));
  const auto mi = mi_trajectory(std::span(&t, 1), KernelConfig{}, MiMode::single_trace);
  ASSERT_EQ(mi.values.size(), 20u);
  for (double v : mi.values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(MiTrajectory, SingleModeRepeatsFirstWindowValue) {
  std::mt19937_64 rng(12);
  const auto t = trace_from(random_matrix(rng, 20, 3, 100.0), random_matrix(rng, 5, 3, 100.0));
  KernelConfig k;
  k.mode = BandwidthMode::explicit_value;
  k.bandwidth = 100.0;
  const auto mi = mi_trajectory(std::span(&t, 1), k, MiMode::single_trace);
  ASSERT_EQ(mi.values.size(), 20u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(mi.values[i], mi.values[15]);
  // Window ending at step 19 against gold rows resampled to 16 by rounding.
  MatrixD x(16, 3), y(16, 3);
  for (std::size_t j = 0; j < 16; ++j) {
    const auto src = static_cast<std::size_t>(std::llround(j * 4.0 / 15.0));
    for (std::size_t e = 0; e < 3; ++e) {
      x(j, e) = t.steps(4 + j, e);
      y(j, e) = t.gold(src, e);
    }
  }
  EXPECT_DOUBLE_EQ(mi.values[19], hsic_biased(SampleSet(x), SampleSet(y), 100.0, 100.0));
}

TEST(MiTrajectory, SingleModeShortTraceIsInsufficient) {
  std::mt19937_64 rng(6);
  const auto t = trace_from(random_matrix(rng, 10, 3), random_matrix(rng, 2, 3));
  EXPECT_THROW(mi_trajectory(std::span(&t, 1), KernelConfig{}, MiMode::single_trace), InsufficientData);
}

TEST(MiTrajectory, ThreadCountDoesNotChangeValues) {
  std::mt19937_64 rng(30);
  std::vector<RepresentationTrace> traces;
  for (int i = 0; i < 10; ++i) traces.push_back(trace_from(random_matrix(rng, 7, 4, 90.0), random_matrix(rng, 2, 4, 90.0)));
  TrajectoryParams one, four;
  four.threads = 4;
  const auto a = mi_trajectory(traces, KernelConfig{}, MiMode::batch_anchored, one);
  const auto b = mi_trajectory(traces, KernelConfig{}, MiMode::batch_anchored, four);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.sigma, b.sigma);
}
