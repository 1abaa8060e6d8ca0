#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "foldmix/folded.hpp"
#include "foldmix/quadrature.hpp"

namespace foldmix {

struct ScoreVector {
  double d_mu;
  double d_sigma;
};

struct Hessian2 {
  double mm;
  double ms;
  double ss;
};

ScoreVector score_vector(double y, const FoldedParams& p);
Hessian2 hessian_matrix(double y, const FoldedParams& p);

struct InfoMatrix {
  double mm = 0.0;
  double ms = 0.0;
  double ss = 0.0;
  // max-entry |E[S S^T] + E[H]| under the same rule
  double quadrature_error_estimate = 0.0;

  // ascending
  std::array<double, 2> eigenvalues() const;
};

// E[S S^T] by Gauss-Legendre on [0, |mu| + 12 sigma]. Throws if the
// information identity fails by more than `identity_tol`.
InfoMatrix fisher_information(const FoldedParams& p, const QuadratureSpec& quad = {},
                              double identity_tol = 1e-4);

// E[S] under the model itself, by the same rule.
ScoreVector expected_score(const FoldedParams& p, const QuadratureSpec& quad = {});

// Y_i = |mu + sigma Z_i| with Z_i from the Philox stream keyed by seed.
FoldedSample sample_folded(const FoldedParams& p, std::size_t n, std::uint64_t seed);

// E|X|^k for X ~ N(mu, sigma^2), even k in {2, 4, 6, 8}.
double gaussian_even_moment(int k, double mu, double sigma);

// Phi_n(t) = l_n(n^{-1/4} t, sigma0) - l_n(0, sigma0), evaluated exactly.
double rescaled_contrast(double t, const FoldedSample& data, double sigma0);
// a Z_n t^2 - b_n t^4 with a = 1/(2 sigma0^4), b_n = mean(Y^4) / (12 sigma0^8).
double contrast_approximation(double t, const FoldedSample& data, double sigma0);
// C6 n^{-3/2} t^6 sum Y^6 / sigma0^12.
double contrast_remainder_bound(double t, const FoldedSample& data, double sigma0);

// Sixth-order remainder constant for log cosh: |log cosh t - t^2/2 + t^4/12| <= C6 t^6.
inline constexpr double kLogCoshC6 = 1.0 / 45.0;

struct ContrastCurve {
  std::vector<double> t_grid;
  std::vector<double> values;
  std::vector<double> approximation;
  double z_n = 0.0;             // n^{-1/2} sum (Y^2 - sigma0^2)
  double fourth_moment = 0.0;   // n^{-1} sum Y^4
};

ContrastCurve contrast_curve(const std::vector<double>& t_grid, const FoldedSample& data,
                             double sigma0);

// Maximizer modulus sqrt(3 sigma0^4 (z)_+ / fourth_moment) of a z t^2 - b t^4.
double limit_argmax(double z, double sigma0, double fourth_moment);

}  // namespace foldmix
