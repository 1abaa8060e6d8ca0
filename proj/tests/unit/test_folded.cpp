#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "foldmix/folded.hpp"
#include "foldmix/folded_asymptotics.hpp"
#include "foldmix/random.hpp"

using namespace foldmix;

namespace {

const FoldedSample kTwo({1.0, 2.0});

FoldedSample random_sample(std::uint64_t seed, std::size_t n) {
  RandomStream rng(seed);
  const double mu = rng.uniform(0.0, 3.0);
  const double sigma = rng.uniform(0.3, 2.0);
  return sample_folded(FoldedParams(mu, sigma), n, seed ^ 0x5bd1e995u);
}

// log f written directly from the two-term density, no cosh rewriting
double naive_log_density(double y, double mu, double sigma) {
  const double c = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  const double a = (y - mu) / sigma, b = (y + mu) / sigma;
  return std::log(c * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b)));
}

}  // namespace

TEST(LogCosh, KnownValues) {
  EXPECT_NEAR(log_two_cosh(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(log_two_cosh(1.0), std::log(std::exp(1.0) + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(log_two_cosh(1.0), 1.1269280110429727, 1e-12);
  EXPECT_EQ(log_two_cosh(100.0), 100.0);
  EXPECT_EQ(log_two_cosh(-100.0), 100.0);
  EXPECT_NEAR(log_cosh(1e-5), 0.5e-10 - 1e-20 / 12.0, 5e-26);
}

TEST(LogCosh, CoshBoundsOnGrid) {
  for (int i = -5000; i <= 5000; ++i) {
    const double t = i * 0.01;
    const double v = log_two_cosh(t);
    ASSERT_LE(v, std::abs(t) + std::log(2.0) + 1e-15) << t;
    ASSERT_LE(v, 0.5 * t * t + std::log(2.0) + 1e-15) << t;
  }
}

TEST(TanhSech2, MatchesStdWithRelativeAccuracyInTheTail) {
  for (double t : {-30.0, -3.0, -0.2, 0.0, 1e-9, 0.7, 5.0, 15.0, 39.0, 41.0, 200.0}) {
    const auto ts = tanh_sech2(t);
    EXPECT_NEAR(ts.tanh, std::tanh(t), 1e-15);
    const double c = std::cosh(t);
    EXPECT_NEAR(ts.sech2, 1.0 / (c * c), 1e-14 / (c * c)) << t;
  }
  EXPECT_EQ(tanh_sech2(41.0).tanh, 1.0);
  EXPECT_EQ(tanh_sech2(-41.0).tanh, -1.0);
  EXPECT_EQ(tanh_sech2(400.0).sech2, 0.0);
}

TEST(FoldedDensity, KnownValuesAndDomain) {
  EXPECT_NEAR(folded_log_density(0.0, FoldedParams(0, 1)), std::log(2.0) - 0.5 * std::log(2 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(folded_log_density(1.0, FoldedParams(1, 1)), -0.7920105221617, 1e-12);
  EXPECT_THROW(folded_log_density(-0.1, FoldedParams(0, 1)), std::invalid_argument);
  EXPECT_THROW(FoldedParams(0.0, 0.0), std::invalid_argument);
}

TEST(FoldedDensity, AgreesWithNaiveFormulaAndIsEven) {
  RandomStream rng(3);
  for (int i = 0; i < 500; ++i) {
    const double y = rng.uniform(0, 6), mu = rng.uniform(-3, 3), s = rng.uniform(0.3, 3);
    EXPECT_NEAR(folded_log_density(y, FoldedParams(mu, s)), naive_log_density(y, mu, s), 1e-12);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FoldedSample s = random_sample(seed, 30);
    const double a = folded_loglik(s, 0.8, 1.1), b = folded_loglik(s, -0.8, 1.1);
    EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
  }
}

TEST(FoldedSample, DegeneracyAndThreshold) {
  EXPECT_TRUE(FoldedSample({2.0, 2.0, 2.0}).degenerate());
  EXPECT_FALSE(kTwo.degenerate());
  EXPECT_DOUBLE_EQ(kTwo.S_y(), 5.0);
  EXPECT_DOUBLE_EQ(kTwo.threshold_sigma(), std::sqrt(2.5));
  EXPECT_DOUBLE_EQ(kTwo.s2(), 0.25);
  EXPECT_THROW(FoldedSample({-1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(FoldedSample(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(mu_hat(0.5, FoldedSample({1.0, 1.0})), DegenerateSampleError);
}

TEST(Score, KnownValues) {
  EXPECT_EQ(score_k(1.0, 0.0, kTwo), 0.0);
  EXPECT_NEAR(score_k(1.0, 1.0, kTwo), std::tanh(1.0) + 2 * std::tanh(2.0) - 2, 1e-14);
  EXPECT_NEAR(score_k(1.0, 10.0, kTwo), -17.0, 1e-6);
  EXPECT_NEAR(curvature_A(1.0, 0.0, kTwo), 5.0, 1e-14);
  EXPECT_NEAR(curvature_A(1.0, 1.0, kTwo), 1.0 / std::pow(std::cosh(1.0), 2) + 4.0 / std::pow(std::cosh(2.0), 2), 1e-14);
  EXPECT_NEAR(curvature_A(1.0, 1.0, kTwo), 0.70258, 1e-5);
  EXPECT_LT(curvature_A(1.0, 300.0, kTwo), 1e-100);
}

TEST(Score, FiniteDifferencesOfLoglik) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const FoldedSample s = random_sample(seed, 25);
    const double sigma = 0.9, mu = 0.7, h = 1e-4;
    const double s2 = sigma * sigma;
    const double d1 = (folded_loglik(s, mu + h, sigma) - folded_loglik(s, mu - h, sigma)) / (2 * h);
    EXPECT_NEAR(d1, score_k(sigma, mu, s) / s2, 1e-6 * std::max(1.0, std::abs(d1)));
    const double d2 = (folded_loglik(s, mu + h, sigma) - 2 * folded_loglik(s, mu, sigma) +
                       folded_loglik(s, mu - h, sigma)) / (h * h);
    const double n = static_cast<double>(s.n());
    const double exact = (curvature_A(sigma, mu, s) / s2 - n) / s2;
    EXPECT_NEAR(d2, exact, 1e-4 * std::max(1.0, std::abs(exact)));
  }
}

TEST(MuHat, KnownValues) {
  EXPECT_EQ(mu_hat(2.0, kTwo), 0.0);
  EXPECT_NEAR(mu_hat(0.5, kTwo), 1.49999, 1e-4);
  // continuity at the threshold
  const double thr = kTwo.threshold_sigma();
  const double just_below = mu_hat(thr * (1.0 - 1e-8), kTwo);
  EXPECT_GT(just_below, 0.0);
  EXPECT_LT(just_below, 1e-2);
}

TEST(MuHat, MaximizesLoglikOverMuGrid) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FoldedSample s = random_sample(seed, 40);
    for (double f : {0.3, 0.7, 0.95, 1.2}) {
      const double sigma = f * s.threshold_sigma();
      const double m = mu_hat(sigma, s);
      const double best = folded_loglik(s, m, sigma);
      for (int i = 0; i <= 2000; ++i) {
        const double mu = 1.5 * s.y_bar() * i / 2000.0 + 1e-3;
        ASSERT_LE(folded_loglik(s, mu, sigma), best + 1e-10);
      }
      if (m > 0) { EXPECT_NEAR(score_k(sigma, m, s), 0.0, 1e-9 * s.S_y()); }
    }
  }
}

TEST(MuHatPrime, MatchesFiniteDifferenceAndIsNegative) {
  const double d = mu_hat_prime(0.5, kTwo);
  const double h = 1e-5;
  const double fd = (mu_hat(0.5 + h, kTwo) - mu_hat(0.5 - h, kTwo)) / (2 * h);
  EXPECT_LT(d, 0.0);
  EXPECT_NEAR(d, fd, 1e-6 * std::abs(fd));
  EXPECT_THROW(mu_hat_prime(2.0, kTwo), std::domain_error);
}

TEST(ProfileScore, KnownValuesAndIdentity) {
  EXPECT_NEAR(profile_score_N(kTwo.threshold_sigma(), kTwo), 0.0, 1e-12);
  EXPECT_NEAR(profile_score_N(1e-3, kTwo), 0.5, 1e-4);
  EXPECT_NEAR(profile_score_N(10.0, kTwo), -195.0, 1e-12);
  // derivative of the profile log-likelihood equals N / sigma^3
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FoldedSample s = random_sample(seed, 30);
    const double sigma = 0.6 * s.threshold_sigma(), h = 1e-5;
    const double fd = (profile_loglik(sigma + h, s) - profile_loglik(sigma - h, s)) / (2 * h);
    const double exact = profile_score_N(sigma, s) / (sigma * sigma * sigma);
    EXPECT_NEAR(fd, exact, 1e-5 * std::max(1.0, std::abs(exact)));
    EXPECT_EQ(profile_score_sign(sigma, s), exact > 0 ? 1 : (exact < 0 ? -1 : 0));
  }
}

TEST(BoundaryBound, DominatesMuGridSup) {
  const double c0 = 2 * std::log(2.0) - std::log(2 * std::numbers::pi);
  EXPECT_NEAR(boundary_bound(1.0, kTwo), c0 - 0.25, 1e-14);
  EXPECT_THROW(boundary_bound(1.5, kTwo), std::domain_error);
  EXPECT_LT(boundary_bound(1e-3, kTwo), -1e4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const FoldedSample s = random_sample(seed, 20);
    for (double sigma : {0.05, 0.1, 0.25, 0.5, 0.75, 1.0}) {
      double sup = -INFINITY;
      for (int i = 0; i <= 600; ++i) sup = std::max(sup, folded_loglik(s, 6.0 * i / 600.0, sigma));
      ASSERT_GE(boundary_bound(sigma, s), sup) << seed << " " << sigma;
    }
  }
}

TEST(FitFolded, TwoPointSample) {
  const FoldedFitReport r = fit_folded(kTwo);
  EXPECT_NEAR(r.mu_hat, 1.5, 1e-3);
  EXPECT_NEAR(r.sigma_hat, 0.5, 2e-3);
  EXPECT_FALSE(r.degenerate);
  double grid_best = -INFINITY;
  for (int i = 0; i <= 3000; ++i) {
    for (int j = 0; j <= 2950; ++j) grid_best = std::max(grid_best, folded_loglik(kTwo, i * 1e-3, 0.05 + j * 1e-3));
  }
  EXPECT_GE(r.profile_value, grid_best - 1e-9);
  EXPECT_LE(r.profile_value - grid_best, 1e-5);
}

TEST(FitFolded, DegenerateSample) {
  const FoldedFitReport r = fit_folded(FoldedSample({3.0, 3.0}));
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(std::isnan(r.mu_hat));
}

TEST(FitFolded, LargeSampleAtTheKink) {
  const FoldedSample s = sample_folded(FoldedParams(0, 1), 10000, 77);
  const FoldedFitReport r = fit_folded(s);
  // At the kink mu_hat moves at the slow n^{-1/8} scale, so sigma_hat only
  // satisfies the stationarity identity sigma^2 + mu^2 = S/n, not sigma ~ 1.
  const double n = static_cast<double>(s.n());
  EXPECT_NEAR(r.sigma_hat * r.sigma_hat + r.mu_hat * r.mu_hat, s.S_y() / n, 1e-9);
  EXPECT_NEAR(s.S_y() / n, 1.0, 0.05);
  EXPECT_LT(r.mu_hat, 0.8);
  EXPECT_LE(r.crossings_found, 1u);
}

TEST(FitFolded, OneCrossingAndDominance) {
  RandomStream pick(11);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::size_t n = 3 + static_cast<std::size_t>(pick.uniform() * 48);
    const FoldedSample s = random_sample(seed + 1000, std::min<std::size_t>(n, 50));
    if (s.degenerate()) continue;
    const double thr = s.threshold_sigma();
    ASSERT_LE(count_profile_sign_changes(s, 1e-3 * thr, thr, 2000), 1u) << seed;
    const FoldedFitReport r = fit_folded(s);
    for (double sigma : log_grid(1e-3 * thr, thr, 2000)) {
      ASSERT_GE(r.profile_value, profile_loglik(sigma, s) - 1e-8) << seed;
    }
    if (r.mu_hat > 0) {
      EXPECT_LT(curvature_A(r.sigma_hat, r.mu_hat, s), static_cast<double>(s.n()) * r.sigma_hat * r.sigma_hat);
    }
  }
}
