#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace foldmix {

// Likelihood is unbounded: every observation has the same value.
class DegenerateSampleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct FoldedParams {
  double mu;
  double sigma;

  FoldedParams(double mu, double sigma);
};

// Immutable sample of nonnegative observations with cached moments.
class FoldedSample {
 public:
  explicit FoldedSample(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t n() const { return values_.size(); }
  double S_y() const { return sum_sq_; }
  double y_bar() const { return mean_; }
  double s2() const { return s2_; }  // divides by n
  bool degenerate() const { return degenerate_; }
  // sqrt(S_y / n): above this scale the profile path sits at mu = 0.
  double threshold_sigma() const;

 private:
  std::vector<double> values_;
  double sum_sq_ = 0.0;
  double mean_ = 0.0;
  double s2_ = 0.0;
  bool degenerate_ = false;
};

struct TanhSech2 {
  double tanh;
  double sech2;
};

// Both from one expm1; |t| > 40 saturates to (sign t, 0).
TanhSech2 tanh_sech2(double t);

// log(2 cosh t), no overflow for any finite t.
double log_two_cosh(double t);
// log(cosh t), accurate near 0.
double log_cosh(double t);

double folded_log_density(double y, const FoldedParams& p);
double folded_loglik(const FoldedSample& s, double mu, double sigma);

// k(sigma, mu) = sum y_i tanh(y_i mu / sigma^2) - n mu, equal to sigma^2 d/dmu l_n.
double score_k(double sigma, double mu, const FoldedSample& s);
// A(sigma, mu) = sum y_i^2 sech^2(y_i mu / sigma^2).
double curvature_A(double sigma, double mu, const FoldedSample& s);

struct ScoreCurvature {
  double k;
  double A;
};
ScoreCurvature score_and_curvature(double sigma, double mu, const FoldedSample& s);

// Profile path: 0 for sigma^2 >= S_y/n, else the unique positive root of k(sigma, .).
double mu_hat(double sigma, const FoldedSample& s);
// d mu_hat / d sigma on the positive branch (strictly negative there).
double mu_hat_prime(double sigma, const FoldedSample& s);

// N_n(sigma) = S_y - n sigma^2 - n mu_hat(sigma)^2; the profile derivative is N_n / sigma^3.
double profile_score_N(double sigma, const FoldedSample& s);
// sign(N_n(sigma)) in {-1, 0, 1} from a single pass over the data (no root solve).
int profile_score_sign(double sigma, const FoldedSample& s);
// l_n(mu_hat(sigma), sigma).
double profile_loglik(double sigma, const FoldedSample& s);

// Upper bound on sup_mu l_n(mu, sigma), valid for sigma in (0, 1].
double boundary_bound(double sigma, const FoldedSample& s);

struct FoldedFitOptions {
  std::size_t scan_points = 2000;
  double lo_factor = 1e-3;   // sigma_lo = lo_factor * min(s, sqrt(S_y/n))
  double hi_factor = 10.0;   // sigma_hi = hi_factor * sqrt(S_y/n)
  double root_tol = 1e-12;   // absolute, on sigma
  std::size_t max_bisect = 200;
};

struct FoldedCandidate {
  double sigma;
  double residual;  // N_n(sigma)
  double profile_value;
  bool threshold;   // the sigma^2 = S_y/n candidate
};

struct FoldedFitReport {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double profile_value = 0.0;
  std::vector<FoldedCandidate> candidates;
  std::size_t crossings_found = 0;
  bool degenerate = false;
};

FoldedFitReport fit_folded(const FoldedSample& s, const FoldedFitOptions& opts = {});

// Strict sign changes of N_n on a log grid over [lo, hi] (zeros skipped).
std::size_t count_profile_sign_changes(const FoldedSample& s, double lo, double hi,
                                       std::size_t points);

std::vector<double> log_grid(double lo, double hi, std::size_t points);

}  // namespace foldmix
