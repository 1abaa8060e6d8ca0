#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace foldmix {

struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;

  MixtureParams() = default;
  MixtureParams(std::vector<double> weights, std::vector<double> means, std::vector<double> sigmas);

  std::size_t k() const { return means.size(); }
  // Throws unless shapes agree, weights lie in [0,1] and sum to 1 within
  // 1e-12, and every sigma is finite and positive.
  void validate() const;
  // Same components relabeled: component j of the result is perm[j] of this.
  MixtureParams permuted(std::span<const std::size_t> perm) const;
};

// Compact constraint set: weights >= epsilon, means in [-m, m], sigmas in [e^-m, e^m].
struct SieveSpec {
  std::size_t k = 2;
  double m = 1.0;
  double epsilon = 0.1;

  void validate() const;
  double sigma_min() const;
  double sigma_max() const;
  bool contains(const MixtureParams& theta, double tol = 1e-12) const;
};

struct MixtureEnvelopes {
  double A_m;
  double log_A_m;  // A_m underflows for moderate m; use this in comparisons
  double a_m;
  double B_mk;
  double log_B_mk;
  double b_m;
  double K_mk;
  double C_mek;
};

double normal_log_pdf(double x, double mu, double sigma);

// Max-shifted log-sum-exp over components.
double mixture_log_density(double x, const MixtureParams& theta);
double mixture_loglik(std::span<const double> data, const MixtureParams& theta);

std::vector<double> responsibilities(double x, const MixtureParams& theta);

struct MixtureGradient {
  std::vector<double> d_means;
  std::vector<double> d_log_sigmas;
  std::vector<double> d_weights;

  double euclidean_norm() const;
  // Dual of the product norm: max(|g_mu|_2, |g_t|_2, |g_pi|_inf).
  double dual_norm() const;
};

// Gradient of log f_theta(x) in (means, log-sigmas, weights), weights treated
// as free coordinates.
MixtureGradient grad_log_density(double x, const MixtureParams& theta);

MixtureEnvelopes envelope_constants(const SieveSpec& sieve);

// Means and sigmas clamped to the box; weights floored at epsilon with the
// remaining mass rescaled, repeated until feasible. Idempotent.
MixtureParams project_to_sieve(MixtureParams theta, const SieveSpec& sieve);

// Floor-and-rescale of a weight vector onto {w >= floor, sum w = 1}.
std::vector<double> floor_weights(std::vector<double> w, double floor);

// |mu - mu'|_2 + |log sigma - log sigma'|_2 + |pi - pi'|_1, no relabeling.
double product_norm_distance(const MixtureParams& a, const MixtureParams& b);

struct OrbitDistance {
  double value;
  std::vector<std::size_t> best_permutation;  // applied to the first argument
};

// min over relabelings of |mu - mu'|_2 + |sigma - sigma'|_2 + |pi - pi'|_1.
OrbitDistance d_min(const MixtureParams& a, const MixtureParams& b);

// n draws from the mixture, deterministic in seed.
std::vector<double> sample_mixture(const MixtureParams& theta, std::size_t n, std::uint64_t seed);

double orbit_hausdorff(std::span<const MixtureParams> A, std::span<const MixtureParams> B);

}  // namespace foldmix
