#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "foldmix/folded.hpp"
#include "foldmix/mixture.hpp"
#include "foldmix/quadrature.hpp"

namespace foldmix {

// Compact folded-model parameter box mu in [mu_min, mu_max], sigma in [sigma_min, sigma_max].
struct ParameterBox {
  double mu_min;
  double mu_max;
  double sigma_min;
  double sigma_max;

  void validate() const;
  double mu_bound() const;  // max |mu| on the box
  bool contains(double mu, double sigma) const;
};

struct FoldedEnvelopeConstants {
  double C0;  // per observation: log 2 - log(2 pi) / 2
  double C1;
  double C2;
  double C3;
  double B_K;
  ParameterBox box;

  // |l(y; theta)| <= C1 + y^2 / (2 sigma_min^2) + M y / sigma_min^2
  double function_envelope(double y) const;
  // |grad l| <= C2 (1 + y + y^2), also the Lipschitz envelope L_K
  double gradient_envelope(double y) const;
  // |hess l| <= C3 (1 + y^2 + y^4)
  double hessian_envelope(double y) const;
  // |l| <= B_K (1 + y^2)
  double square_envelope(double y) const;
};

FoldedEnvelopeConstants folded_envelopes(const ParameterBox& box);

struct EnvelopeMoments {
  double m1;  // E[L_K(Y)]
  double m2;  // E[L_K(Y)^2]
  double D;   // 2 B_K^2 (1 + E[Y^4]) >= sup_theta E[l(Y; theta)^2]
};

EnvelopeMoments envelope_moments(const ParameterBox& box, const FoldedParams& law,
                                 const QuadratureSpec& quad = {});

// 2 K_mk^2 (1 + E[X^4]) for the mixture sieve.
double mixture_D(const MixtureEnvelopes& env, double fourth_moment);

// Points per axis for spacing <= delta / sqrt(d) on [lo, hi].
std::size_t grid_points_for(double lo, double hi, double spacing);

// Euclidean delta-net of an axis box in d = lo.size() coordinates.
std::vector<std::vector<double>> build_box_net(std::span<const double> lo,
                                               std::span<const double> hi, double delta);
double box_net_cardinality(std::span<const double> lo, std::span<const double> hi, double delta);

// Euclidean delta-net of the folded box (spacing delta/sqrt(2) per axis).
std::vector<FoldedParams> build_net(const ParameterBox& box, double delta);
double net_cardinality(const ParameterBox& box, double delta);

// Product-norm delta-net of the sieve: axis grids on means and log-sigmas,
// a simplex lattice on weights. Budget delta/3 per block.
std::vector<MixtureParams> build_net(const SieveSpec& sieve, double delta);
double net_cardinality(const SieveSpec& sieve, double delta);

inline constexpr double kMaxNetCardinality = 1e8;

struct UllnBudget {
  double m1;
  double m2;
  double D;
  double delta;    // epsilon / (6 m1)
  double M;
  double epsilon;
  double n;
  double bound;
};

UllnBudget ulln_bound(double m1, double m2, double D, double M, double n, double epsilon);

// l(theta) = E_law[log f(Y; theta)] by Gauss-Legendre on [0, 12 (|mu0| + sigma0)].
double folded_population_loglik(const FoldedParams& theta, const FoldedParams& law,
                                const QuadratureSpec& quad = {});
// l(theta) = E_law[log f_theta(X)] on [min mu0 - 12 max sigma0, max mu0 + 12 max sigma0].
double mixture_population_loglik(const MixtureParams& theta, const MixtureParams& law,
                                 const QuadratureSpec& quad = {});

// max over the net of |n^{-1} l_n(theta) - l(theta)|, population values precomputed.
double empirical_sup_deviation(const FoldedSample& data, std::span<const FoldedParams> net,
                               std::span<const double> population);
double empirical_sup_deviation(std::span<const double> data, std::span<const MixtureParams> net,
                               std::span<const double> population);

struct KlGapReport {
  double delta = 0.0;
  double eta = 0.0;
  std::vector<double> argmax_theta;  // (mu, sigma) or (pi, mu, sigma) blocks
  double grid_step = 0.0;
  std::size_t quadrature_nodes = 0;
  double max_excess = 0.0;  // max over the grid of l(theta) - l(theta0)
  std::size_t grid_points = 0;
};

struct FoldedKlRegion {
  ParameterBox box;
  std::size_t points_per_axis = 201;
};

// One report per delta; the grid is evaluated once.
std::vector<KlGapReport> folded_kl_gap(const FoldedKlRegion& region, std::span<const double> deltas,
                                       const FoldedParams& theta0, const QuadratureSpec& quad = {});
KlGapReport folded_kl_gap(const FoldedKlRegion& region, double delta, const FoldedParams& theta0,
                          const QuadratureSpec& quad = {});

struct MixtureKlRegion {
  std::size_t k = 2;
  double weight_lo = 0.1;
  double mean_lo = -3.0;
  double mean_hi = 3.0;
  double sigma_lo = 0.5;
  double sigma_hi = 2.0;
  std::size_t weight_steps = 8;  // lattice resolution of the simplex
  std::size_t mean_points = 13;
  std::size_t sigma_points = 7;
};

std::vector<KlGapReport> mixture_kl_gap(const MixtureKlRegion& region,
                                        std::span<const double> deltas,
                                        const MixtureParams& theta0,
                                        const QuadratureSpec& quad = {});

// Every grid argmax of qn lies within `radius` of the orbit. Throws if
// sup |qn - q| > eta / 3.
bool argmax_stability_check(std::span<const double> q, std::span<const double> qn,
                            std::span<const double> orbit_distance, double radius, double eta);

}  // namespace foldmix
