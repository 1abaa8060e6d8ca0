#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "foldmix/mixture.hpp"
#include "foldmix/random.hpp"

using namespace foldmix;

namespace {

const MixtureParams kSym({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0});

MixtureParams random_params(RandomStream& rng, std::size_t k) {
  MixtureParams p;
  double total = 0;
  for (std::size_t j = 0; j < k; ++j) {
    p.means.push_back(rng.uniform(-3, 3));
    p.sigmas.push_back(std::exp(rng.uniform(-1, 1)));
    p.weights.push_back(rng.uniform(0.1, 1.0));
    total += p.weights.back();
  }
  for (double& w : p.weights) w /= total;
  return p;
}

double naive_density(double x, const MixtureParams& p) {
  double f = 0;
  for (std::size_t j = 0; j < p.k(); ++j) {
    const double z = (x - p.means[j]) / p.sigmas[j];
    f += p.weights[j] * std::exp(-0.5 * z * z) / (p.sigmas[j] * std::sqrt(2 * std::numbers::pi));
  }
  return f;
}

}  // namespace

TEST(MixtureParams, Validation) {
  EXPECT_THROW(MixtureParams({0.5, 0.6}, {0, 1}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(MixtureParams({0.5, 0.5}, {0, 1}, {1, 0}), std::invalid_argument);
  EXPECT_THROW(MixtureParams({1.0}, {0, 1}, {1, 1}), std::invalid_argument);
  EXPECT_NO_THROW(MixtureParams({0.25, 0.75}, {0, 1}, {1, 2}));
}

TEST(MixtureDensity, KnownValues) {
  EXPECT_NEAR(mixture_log_density(0, MixtureParams({.5, .5}, {0, 0}, {1, 1})), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(mixture_log_density(0, kSym), std::log(0.05399096651318806), 1e-13);
}

TEST(MixtureDensity, AgreesWithNaiveSumAndIsPermutationInvariant) {
  RandomStream rng(1);
  for (int i = 0; i < 300; ++i) {
    const MixtureParams p = random_params(rng, 3);
    const double x = rng.uniform(-5, 5);
    EXPECT_NEAR(mixture_log_density(x, p), std::log(naive_density(x, p)), 1e-12);
    const std::size_t perm[3] = {2, 0, 1};
    EXPECT_NEAR(mixture_log_density(x, p.permuted(perm)), mixture_log_density(x, p), 1e-14);
  }
}

TEST(MixtureDensity, FiniteWithTinySigma) {
  const MixtureParams p({0.5, 0.5}, {0.0, 1.0}, {1e-8, 1.0});
  for (double x : {-50.0, 0.0, 0.3, 1.0, 40.0}) EXPECT_TRUE(std::isfinite(mixture_log_density(x, p))) << x;
  EXPECT_NEAR(mixture_log_density(0.0, p), std::log(0.5e8 / std::sqrt(2 * std::numbers::pi) + 0.5 * std::exp(-0.5) / std::sqrt(2 * std::numbers::pi)), 1e-12);
}

TEST(Responsibilities, SumToOneAndLimits) {
  const auto r0 = responsibilities(0.0, kSym);
  EXPECT_NEAR(r0[0], 0.5, 1e-15);
  EXPECT_NEAR(r0[1], 0.5, 1e-15);
  EXPECT_GT(responsibilities(10.0, kSym)[1], 1 - 1e-6);
  RandomStream rng(2);
  for (int i = 0; i < 300; ++i) {
    const auto r = responsibilities(rng.uniform(-8, 8), random_params(rng, 4));
    double s = 0;
    for (double v : r) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  RandomStream rng(3);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const MixtureParams p = random_params(rng, 3);
    const double x = rng.uniform(-4, 4);
    const MixtureGradient g = grad_log_density(x, p);
    for (std::size_t j = 0; j < 3; ++j) {
      MixtureParams a = p, b = p;
      a.means[j] += h;
      b.means[j] -= h;
      const double dm = (mixture_log_density(x, a) - mixture_log_density(x, b)) / (2 * h);
      EXPECT_NEAR(g.d_means[j], dm, 1e-6 * std::max(1.0, std::abs(dm)));
      a = p, b = p;
      a.sigmas[j] *= std::exp(h);
      b.sigmas[j] *= std::exp(-h);
      const double ds = (mixture_log_density(x, a) - mixture_log_density(x, b)) / (2 * h);
      EXPECT_NEAR(g.d_log_sigmas[j], ds, 1e-6 * std::max(1.0, std::abs(ds)));
      // partial in pi_j with the other weights held fixed (unconstrained coordinates)
      const double f = std::exp(mixture_log_density(x, p));
      const double phi = std::exp(-0.5 * std::pow((x - p.means[j]) / p.sigmas[j], 2)) /
                         (p.sigmas[j] * std::sqrt(2 * std::numbers::pi));
      EXPECT_NEAR(g.d_weights[j], phi / f, 1e-10 * std::max(1.0, phi / f));
    }
  }
}

TEST(Gradient, SymmetryAndSingleComponentLimit) {
  const MixtureGradient g = grad_log_density(0.0, kSym);
  EXPECT_NEAR(g.d_means[0], -g.d_means[1], 1e-15);
  const MixtureParams far({0.5, 0.5}, {0.0, 50.0}, {1.0, 1.0});
  const MixtureGradient s = grad_log_density(0.7, far);
  EXPECT_NEAR(s.d_means[0], 0.7, 1e-12);
  EXPECT_NEAR(s.d_log_sigmas[0], -1 + 0.49, 1e-12);
}

TEST(Envelopes, ClosedForms) {
  const MixtureEnvelopes e = envelope_constants(SieveSpec{2, 1.0, 0.1});
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(e.a_m, e2, 1e-12);
  EXPECT_NEAR(e.b_m, 1 / (4 * e2), 1e-15);
  EXPECT_NEAR(e.A_m, std::exp(-e2) / (std::exp(1.0) * std::sqrt(2 * std::numbers::pi)), 1e-18);
  EXPECT_NEAR(e.A_m, 9.06e-5, 1e-7);
  // max{1/sigma_min^2, 1, 1/eps} = max{e^2, 1, 10} = 10
  EXPECT_NEAR(e.C_mek, std::sqrt(2.0) * 10.0 * 3.0, 1e-12);
  const double K = std::max(-e.log_A_m, e.log_B_mk) + std::max(e.a_m, e.b_m);
  EXPECT_DOUBLE_EQ(e.K_mk, K);
  const MixtureEnvelopes e3 = envelope_constants(SieveSpec{3, 2.0, 0.05});
  EXPECT_NEAR(e3.C_mek, std::sqrt(3.0) * std::exp(4.0) * 7.0, 1e-9);
}

TEST(Envelopes, SandwichAndLogEnvelopeOnRandomSievePoints) {
  for (const SieveSpec& s : {SieveSpec{2, 1.0, 0.1}, SieveSpec{3, 2.0, 0.05}}) {
    const MixtureEnvelopes e = envelope_constants(s);
    RandomStream rng(4);
    for (int i = 0; i < 5000; ++i) {
      MixtureParams p;
      for (std::size_t j = 0; j < s.k; ++j) {
        p.means.push_back(rng.uniform(-s.m, s.m));
        p.sigmas.push_back(std::exp(rng.uniform(-s.m, s.m)));
        p.weights.push_back(1.0 / s.k);
      }
      const double x = rng.uniform(-10, 10), lf = mixture_log_density(x, p);
      ASSERT_GE(lf, e.log_A_m - e.a_m * x * x - 1e-12 * std::abs(e.log_A_m - e.a_m * x * x));
      ASSERT_LE(lf, e.log_B_mk - e.b_m * x * x + 1e-12);
      ASSERT_LE(std::abs(lf), e.K_mk * (1 + x * x));
    }
  }
}

TEST(Projection, ClampsFloorsAndIsIdempotent) {
  const SieveSpec s{2, 1.0, 0.1};
  MixtureParams p({0.99, 0.01}, {5.0, -0.5}, {1e-9, 1.0});
  const MixtureParams q = project_to_sieve(p, s);
  EXPECT_DOUBLE_EQ(q.means[0], 1.0);
  EXPECT_DOUBLE_EQ(q.sigmas[0], std::exp(-1.0));
  EXPECT_NEAR(q.weights[0], 0.9, 1e-15);
  EXPECT_NEAR(q.weights[1], 0.1, 1e-15);
  EXPECT_TRUE(s.contains(q));
  const MixtureParams r = project_to_sieve(q, s);
  EXPECT_EQ(r.means, q.means);
  EXPECT_EQ(r.sigmas, q.sigmas);
  EXPECT_EQ(r.weights, q.weights);
  const MixtureParams inside({0.3, 0.7}, {0.2, -0.1}, {1.1, 0.9});
  EXPECT_EQ(project_to_sieve(inside, s).weights, inside.weights);
}

TEST(Projection, FloorWeightsKeepsFreeRatios) {
  RandomStream rng(12);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w(4);
    for (double& v : w) v = rng.uniform();
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    const auto f = floor_weights(w, 0.15);
    EXPECT_NEAR(std::accumulate(f.begin(), f.end(), 0.0), 1.0, 1e-14);
    EXPECT_EQ(floor_weights(f, 0.15), f);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_GE(f[j], 0.15 - 1e-15);
      // anything left above the floor was rescaled by one common factor
      for (std::size_t l = 0; l < 4; ++l) {
        if (f[j] > 0.15 + 1e-12 && f[l] > 0.15 + 1e-12) {
          EXPECT_NEAR(f[j] / w[j], f[l] / w[l], 1e-12);
        }
      }
    }
  }
}

TEST(Dmin, KnownValuesAndOrbitZero) {
  const MixtureParams a({0.5, 0.5}, {0, 1}, {1, 1});
  const MixtureParams b({0.5, 0.5}, {0, 2}, {1, 1});
  EXPECT_NEAR(d_min(a, b).value, 1.0, 1e-15);
  const std::size_t swap[2] = {1, 0};
  EXPECT_EQ(d_min(a, a.permuted(swap)).value, 0.0);
  std::vector<double> w(9, 1.0 / 9), m(9, 0.0), s(9, 1.0);
  const MixtureParams big(w, m, s);
  EXPECT_THROW(d_min(big, big), std::invalid_argument);
}

TEST(Dmin, ExhaustiveOracleAndPseudometric) {
  RandomStream rng(7);
  for (int i = 0; i < 100; ++i) {
    const MixtureParams a = random_params(rng, 3), b = random_params(rng, 3), c = random_params(rng, 3);
    const double dab = d_min(a, b).value;
    std::vector<std::size_t> perm{0, 1, 2};
    double brute = INFINITY;
    do {
      const MixtureParams ap = a.permuted(perm);
      double dm = 0, ds = 0, dw = 0;
      for (int j = 0; j < 3; ++j) {
        dm += std::pow(ap.means[j] - b.means[j], 2);
        ds += std::pow(ap.sigmas[j] - b.sigmas[j], 2);
        dw += std::abs(ap.weights[j] - b.weights[j]);
      }
      brute = std::min(brute, std::sqrt(dm) + std::sqrt(ds) + dw);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(dab, brute, 1e-14);
    EXPECT_NEAR(dab, d_min(b, a).value, 1e-12);
    EXPECT_LE(d_min(a, c).value, dab + d_min(b, c).value + 1e-12);
  }
}

TEST(Hausdorff, Definition) {
  const MixtureParams a({0.5, 0.5}, {0, 1}, {1, 1});
  const MixtureParams b({0.5, 0.5}, {0, 2}, {1, 1});
  const MixtureParams far({0.5, 0.5}, {0, 10}, {1, 1});
  const std::vector<MixtureParams> A{a, b};
  EXPECT_EQ(orbit_hausdorff(A, A), 0.0);
  EXPECT_NEAR(orbit_hausdorff(std::vector{a}, std::vector{b}), 1.0, 1e-15);
  const std::vector<MixtureParams> B{a, b, far};
  EXPECT_NEAR(orbit_hausdorff(A, B), std::min(d_min(far, a).value, d_min(far, b).value), 1e-15);
  EXPECT_THROW(orbit_hausdorff(std::vector<MixtureParams>{}, A), std::invalid_argument);
}

TEST(ProductNorm, Blocks) {
  const MixtureParams a({0.5, 0.5}, {0, 0}, {1, 1});
  const MixtureParams b({0.3, 0.7}, {3, 4}, {std::exp(1.0), 1});
  EXPECT_NEAR(product_norm_distance(a, b), 5.0 + 1.0 + 0.4, 1e-14);
}

TEST(Sampling, MixtureSampleMoments) {
  const auto x = sample_mixture(kSym, 200000, 3);
  double m = 0, v = 0;
  for (double xi : x) m += xi;
  m /= x.size();
  for (double xi : x) v += (xi - m) * (xi - m);
  v /= x.size();
  EXPECT_NEAR(m, 0.0, 0.03);
  EXPECT_NEAR(v, 5.0, 0.05);
  EXPECT_EQ(sample_mixture(kSym, 10, 3), sample_mixture(kSym, 10, 3));
}
