#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "foldmix/mixture.hpp"

namespace foldmix {

enum class TieBreak {
  // highest objective; within tie_tolerance, the lexicographically smallest
  // parameter vector after sorting components by (mu, sigma, pi)
  kLexicographic,
};

struct FitConfig {
  std::size_t restarts = 8;
  std::size_t max_iterations = 2000;
  double em_tolerance = 1e-10;  // relative change of the objective
  std::size_t polish_steps = 50;  // sweeps per polish step size
  std::uint64_t seed = 0;
  TieBreak tie_break = TieBreak::kLexicographic;
  double tie_tolerance = 1e-9;

  void validate() const;
};

struct PenaltySpec {
  double lambda = 0.0;

  void validate() const;
};

struct RestartRecord {
  std::size_t start_index;
  double objective;
  bool converged;
};

struct MixtureFitResult {
  MixtureParams theta_hat;  // components sorted by (mu, sigma, pi)
  double objective = 0.0;
  std::vector<RestartRecord> restart_trace;
  bool converged = false;
  // no +-1e-4 single-coordinate move improves the objective by more than 1e-8
  bool certified = false;
};

// Axis box the optimizer runs in. Weight moves are transfers that keep the sum at 1.
struct SearchBox {
  double mean_lo;
  double mean_hi;
  double sigma_lo;
  double sigma_hi;
  double weight_floor;

  bool contains(const MixtureParams& theta, double tol = 1e-12) const;
};

SearchBox sieve_box(const SieveSpec& sieve);
// Box implied by coercivity of l_n - lambda g for the given data.
SearchBox pmle_localization_box(std::span<const double> data, double lambda);

double penalty_g(const MixtureParams& theta);
// l_n(theta) - lambda g(theta) with l_n a sum over observations.
double penalized_objective(std::span<const double> data, const MixtureParams& theta, double lambda);

// One EM step with the exact M-step restricted to `box` (penalized when
// lambda > 0). Returns the new parameters; `objective_before` receives the
// objective at `theta`.
MixtureParams em_step(std::span<const double> data, const MixtureParams& theta,
                      const SearchBox& box, double lambda, double* objective_before = nullptr);

std::vector<MixtureParams> draw_starts(std::span<const double> data, std::size_t k,
                                       const SearchBox& box, const FitConfig& cfg,
                                       double log_sigma_lo, double log_sigma_hi);

MixtureFitResult fit_sieve_mle(std::span<const double> data, const SieveSpec& sieve,
                               const FitConfig& cfg);
// Uses exactly the given starts.
MixtureFitResult fit_sieve_mle_from(std::span<const double> data, const SieveSpec& sieve,
                                    const FitConfig& cfg, std::span<const MixtureParams> starts);

MixtureFitResult fit_pmle(std::span<const double> data, std::size_t k, const PenaltySpec& pen,
                          const FitConfig& cfg);
// Random restarts plus `extra_starts`.
MixtureFitResult fit_pmle_with(std::span<const double> data, std::size_t k,
                               const PenaltySpec& pen, const FitConfig& cfg,
                               std::span<const MixtureParams> extra_starts);

// True iff no +-h move of a single mean, log-sigma or weight transfer that stays
// in `box` raises the objective by more than `tol`.
bool local_max_certificate(std::span<const double> data, const MixtureParams& theta,
                           const SearchBox& box, double lambda, double h = 1e-4,
                           double tol = 1e-8);

// Component 1 becomes a spike N(x_i, t^2) with weight 1/2; components 2..k
// come from `base` with their weights rescaled to 1/2.
MixtureParams spike_configuration(std::span<const double> data, std::size_t i, double t,
                                  const MixtureParams& base);
double spike_path_loglik(std::span<const double> data, std::size_t i, double t,
                         const MixtureParams& base);
double spike_path_penalized(std::span<const double> data, std::size_t i, double t,
                            const MixtureParams& base, double lambda);

// Index of the observation farthest from its nearest neighbour.
std::size_t most_isolated_index(std::span<const double> data);

struct SpikeBonus {
  double u_star;
  double bound;
};

// argmax and max of u - lambda u^2.
SpikeBonus spike_bonus_bound(double lambda);

MixtureParams canonical_order(const MixtureParams& theta);

}  // namespace foldmix
