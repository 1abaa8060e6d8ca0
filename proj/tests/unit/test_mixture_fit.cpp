#include <gtest/gtest.h>

#include <cmath>

#include "foldmix/mixture.hpp"
#include "foldmix/mixture_fit.hpp"
#include "foldmix/random.hpp"

using namespace foldmix;

namespace {

const MixtureParams kTruth({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0});
const SieveSpec kSieve{2, 3.0, 0.05};

FitConfig config(std::uint64_t seed, std::size_t restarts = 4) {
  FitConfig c;
  c.seed = seed;
  c.restarts = restarts;
  return c;
}

}  // namespace

TEST(Penalty, KnownValues) {
  EXPECT_DOUBLE_EQ(penalty_g(MixtureParams({.5, .5}, {1, -1}, {1, 1})), 2.0);
  EXPECT_NEAR(penalty_g(MixtureParams({.5, .5}, {0, 0}, {std::exp(1.0), std::exp(-1.0)})), 2.0, 1e-15);
  EXPECT_EQ(penalty_g(MixtureParams({.5, .5}, {0, 0}, {1, 1})), 0.0);
}

TEST(SpikeBonus, Vertex) {
  EXPECT_DOUBLE_EQ(spike_bonus_bound(0.25).u_star, 2.0);
  EXPECT_DOUBLE_EQ(spike_bonus_bound(0.25).bound, 1.0);
  EXPECT_DOUBLE_EQ(spike_bonus_bound(0.5).u_star, 1.0);
  EXPECT_DOUBLE_EQ(spike_bonus_bound(0.5).bound, 0.5);
  EXPECT_THROW(spike_bonus_bound(0.0), std::invalid_argument);
}

TEST(EmStep, MonotoneUnpenalizedAndPenalized) {
  const auto x = sample_mixture(kTruth, 500, 4);
  const SearchBox box = sieve_box(kSieve);
  for (double lambda : {0.0, 0.05}) {
    MixtureParams theta({0.3, 0.7}, {-0.5, 0.5}, {2.0, 0.5});
    double last = -INFINITY;
    for (int it = 0; it < 200; ++it) {
      double before = 0;
      const MixtureParams next = em_step(x, theta, box, lambda, &before);
      EXPECT_NEAR(before, penalized_objective(x, theta, lambda), 1e-9 * std::abs(before));
      ASSERT_GE(before, last - 1e-9 * std::abs(before)) << it;
      EXPECT_TRUE(box.contains(next));
      last = before;
      theta = next;
    }
  }
}

TEST(SieveMle, RecoversWellSeparatedMixture) {
  int close = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    const auto x = sample_mixture(kTruth, 2000, 100 + r);
    const MixtureFitResult fit = fit_sieve_mle(x, kSieve, config(r));
    EXPECT_TRUE(kSieve.contains(fit.theta_hat));
    EXPECT_NEAR(fit.objective, mixture_loglik(x, fit.theta_hat), 1e-9 * std::abs(fit.objective));
    EXPECT_GE(fit.objective, mixture_loglik(x, project_to_sieve(kTruth, kSieve)) - 1e-6);
    EXPECT_TRUE(fit.certified);
    if (d_min(fit.theta_hat, kTruth).value <= 0.2) ++close;
  }
  EXPECT_GE(close, 45);
}

TEST(SieveMle, ConstantDataIsFinite) {
  const std::vector<double> x(50, 0.0);
  const MixtureFitResult fit = fit_sieve_mle(x, SieveSpec{2, 1.0, 0.1}, config(1));
  EXPECT_TRUE(std::isfinite(fit.objective));
  for (double s : fit.theta_hat.sigmas) EXPECT_NEAR(s, std::exp(-1.0), 1e-12);
}

TEST(SieveMle, RejectsBadInput) {
  EXPECT_THROW(fit_sieve_mle(std::vector<double>{1.0}, kSieve, config(0)), std::invalid_argument);
  EXPECT_THROW(fit_sieve_mle(std::vector<double>{1.0, NAN, 2.0}, kSieve, config(0)), std::invalid_argument);
  FitConfig bad = config(0);
  bad.restarts = 0;
  EXPECT_THROW(fit_sieve_mle(std::vector<double>{1.0, 2.0, 3.0}, kSieve, bad), std::invalid_argument);
}

TEST(SieveMle, LocalMaximumCertificateHolds) {
  const auto x = sample_mixture(kTruth, 800, 5);
  const MixtureFitResult fit = fit_sieve_mle(x, kSieve, config(5));
  const double base = mixture_loglik(x, fit.theta_hat);
  for (std::size_t j = 0; j < 2; ++j) {
    for (double h : {1e-4, -1e-4}) {
      MixtureParams a = fit.theta_hat;
      a.means[j] += h;
      if (kSieve.contains(a)) { EXPECT_LE(mixture_loglik(x, a), base + 1e-8); }
      MixtureParams b = fit.theta_hat;
      b.sigmas[j] *= std::exp(h);
      if (kSieve.contains(b)) { EXPECT_LE(mixture_loglik(x, b), base + 1e-8); }
    }
  }
}

TEST(SieveMle, RelabeledStartsGiveSameOrbit) {
  const auto x = sample_mixture(kTruth, 600, 6);
  const MixtureParams s({0.4, 0.6}, {-1.0, 1.5}, {0.8, 1.3});
  const std::size_t swap[2] = {1, 0};
  const std::vector<MixtureParams> a{s}, b{s.permuted(swap)};
  const MixtureFitResult fa = fit_sieve_mle_from(x, kSieve, config(1), a);
  const MixtureFitResult fb = fit_sieve_mle_from(x, kSieve, config(1), b);
  EXPECT_EQ(d_min(fa.theta_hat, fb.theta_hat).value, 0.0);
  EXPECT_EQ(fa.objective, fb.objective);
}

TEST(SieveMle, DeterministicGivenSeed) {
  const auto x = sample_mixture(kTruth, 400, 7);
  const MixtureFitResult a = fit_sieve_mle(x, kSieve, config(9));
  const MixtureFitResult b = fit_sieve_mle(x, kSieve, config(9));
  EXPECT_EQ(a.theta_hat.means, b.theta_hat.means);
  EXPECT_EQ(a.theta_hat.sigmas, b.theta_hat.sigmas);
  EXPECT_EQ(a.theta_hat.weights, b.theta_hat.weights);
  EXPECT_EQ(a.restart_trace.size(), 4u);
}

TEST(Pmle, FixedLambdaLocalizes) {
  const auto x = sample_mixture(kTruth, 2000, 8);
  const MixtureFitResult fit = fit_pmle(x, 2, PenaltySpec{0.01}, config(8));
  EXPECT_TRUE((SieveSpec{2, 3.0, 0.01}).contains(fit.theta_hat));
  const MixtureFitResult sieve = fit_sieve_mle(x, kSieve, config(8));
  EXPECT_NEAR(d_min(fit.theta_hat, kTruth).value, d_min(sieve.theta_hat, kTruth).value, 0.05);
  EXPECT_TRUE(fit.certified);
}

TEST(Pmle, HugePenaltyPinsComponentsToOrigin) {
  const auto x = sample_mixture(kTruth, 500, 9);
  const MixtureFitResult fit = fit_pmle(x, 2, PenaltySpec{1e6}, config(9));
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(fit.theta_hat.means[j], 0.0, 1e-2);
    EXPECT_NEAR(fit.theta_hat.sigmas[j], 1.0, 1e-2);
  }
}

TEST(Pmle, EscapesSpikeStart) {
  const auto x = sample_mixture(kTruth, 500, 10);
  const MixtureParams spike({0.5, 0.5}, {x[0], 2.0}, {1e-6, 1.0});
  FitConfig c = config(10, 1);
  const double lambda = 0.05;
  const std::vector<MixtureParams> extra{spike};
  const MixtureFitResult fit = fit_pmle_with(x, 2, PenaltySpec{lambda}, c, extra);
  EXPECT_GT(fit.objective, penalized_objective(x, spike, lambda));
  for (double s : fit.theta_hat.sigmas) EXPECT_GT(s, 0.1);
}

TEST(Pmle, CoercivityAlongEscapePaths) {
  const auto x = sample_mixture(kTruth, 500, 11);
  const double lambda = 0.05;
  const MixtureFitResult fit = fit_pmle(x, 2, PenaltySpec{lambda}, config(11));
  const double best = fit.objective;
  MixtureParams far = fit.theta_hat;
  far.means[0] = 20.0;
  EXPECT_LT(penalized_objective(x, far, lambda), best);
  far.means[0] = -20.0;
  EXPECT_LT(penalized_objective(x, far, lambda), best);
  MixtureParams tall = fit.theta_hat;
  tall.sigmas[0] = 1e8;
  EXPECT_LT(penalized_objective(x, tall, lambda), best);
  MixtureParams thin = fit.theta_hat;
  thin.sigmas[0] = 1e-8;
  thin.means[0] = x[most_isolated_index(x)];
  EXPECT_LT(penalized_objective(x, thin, lambda), best);
}

TEST(Pmle, VanishingPenaltySpikeIsSubdominant) {
  for (std::size_t n : {1000u, 4000u}) {
    const auto x = sample_mixture(kTruth, n, 12 + n);
    const double lambda = 1.0 / std::sqrt(static_cast<double>(n));
    const MixtureFitResult fit = fit_pmle(x, 2, PenaltySpec{lambda}, config(12));
    const std::size_t i = most_isolated_index(x);
    double best_spike = -INFINITY;
    for (int e = 1; e <= 40; ++e) {
      best_spike = std::max(best_spike, spike_path_penalized(x, i, std::pow(10.0, -0.25 * e), fit.theta_hat, lambda));
    }
    EXPECT_LT(best_spike / n, fit.objective / n);
  }
}

TEST(Spike, PathGrowsLikeMinusLogT) {
  const auto x = sample_mixture(kTruth, 200, 13);
  const std::size_t i = most_isolated_index(x);
  // once t is far below the gap to the nearest neighbour only x_i feels the spike
  const double a = spike_path_loglik(x, i, 1e-3, kTruth);
  const double b = spike_path_loglik(x, i, 1e-4, kTruth);
  const double c = spike_path_loglik(x, i, 1e-5, kTruth);
  EXPECT_NEAR(b - a, std::log(10.0), 1e-6);
  EXPECT_NEAR(c - b, std::log(10.0), 1e-6);
  const MixtureParams s = spike_configuration(x, i, 1e-3, kTruth);
  EXPECT_EQ(s.means[0], x[i]);
  EXPECT_EQ(s.weights[0], 0.5);
  EXPECT_THROW(spike_configuration(x, x.size(), 0.1, kTruth), std::out_of_range);
}

TEST(CanonicalOrder, SortsByMeanThenSigma) {
  const MixtureParams p({0.2, 0.3, 0.5}, {1.0, -1.0, 1.0}, {2.0, 1.0, 0.5});
  const MixtureParams c = canonical_order(p);
  EXPECT_EQ(c.means, (std::vector<double>{-1.0, 1.0, 1.0}));
  EXPECT_EQ(c.sigmas, (std::vector<double>{1.0, 0.5, 2.0}));
  EXPECT_EQ(c.weights, (std::vector<double>{0.3, 0.5, 0.2}));
}
