#include "foldmix/mixture.hpp"

#include "foldmix/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace foldmix {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

MixtureParams::MixtureParams(std::vector<double> w, std::vector<double> mu, std::vector<double> sd)
    : weights(std::move(w)), means(std::move(mu)), sigmas(std::move(sd)) {
  validate();
}

void MixtureParams::validate() const {
  if (means.empty() || weights.size() != means.size() || sigmas.size() != means.size()) {
    throw std::invalid_argument("MixtureParams: weights, means and sigmas must share length k >= 1");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < k(); ++j) {
    if (!(weights[j] >= 0.0 && weights[j] <= 1.0)) {
      throw std::invalid_argument("MixtureParams: weights must lie in [0, 1]");
    }
    if (!std::isfinite(means[j])) throw std::invalid_argument("MixtureParams: non-finite mean");
    if (!(sigmas[j] > 0.0) || !std::isfinite(sigmas[j])) {
      throw std::invalid_argument("MixtureParams: sigmas must be finite and > 0");
    }
    sum += weights[j];
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("MixtureParams: weights must sum to 1");
}

MixtureParams MixtureParams::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != k()) throw std::invalid_argument("permuted: permutation has wrong length");
  MixtureParams out;
  out.weights.resize(k());
  out.means.resize(k());
  out.sigmas.resize(k());
  for (std::size_t j = 0; j < k(); ++j) {
    out.weights[j] = weights[perm[j]];
    out.means[j] = means[perm[j]];
    out.sigmas[j] = sigmas[perm[j]];
  }
  return out;
}

void SieveSpec::validate() const {
  if (k < 2) throw std::invalid_argument("SieveSpec: k must be >= 2");
  if (!(m >= 1.0) || !std::isfinite(m)) throw std::invalid_argument("SieveSpec: m must be >= 1");
  if (!(epsilon > 0.0) || epsilon * static_cast<double>(k) > 1.0 + 1e-15) {
    throw std::invalid_argument("SieveSpec: epsilon must lie in (0, 1/k]");
  }
}

double SieveSpec::sigma_min() const { return std::exp(-m); }
double SieveSpec::sigma_max() const { return std::exp(m); }

bool SieveSpec::contains(const MixtureParams& theta, double tol) const {
  if (theta.k() != k) return false;
  const double lo = sigma_min();
  const double hi = sigma_max();
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (theta.weights[j] < epsilon - tol) return false;
    if (std::abs(theta.means[j]) > m + tol) return false;
    if (theta.sigmas[j] < lo * (1.0 - tol) || theta.sigmas[j] > hi * (1.0 + tol)) return false;
    sum += theta.weights[j];
  }
  return std::abs(sum - 1.0) <= std::max(tol, 1e-12);
}

double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kHalfLog2Pi;
}

double mixture_log_density(double x, const MixtureParams& theta) {
  const std::size_t k = theta.k();
  double terms[16];
  std::vector<double> heap;
  double* t = terms;
  if (k > 16) {
    heap.resize(k);
    t = heap.data();
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    t[j] = theta.weights[j] > 0.0
               ? std::log(theta.weights[j]) + normal_log_pdf(x, theta.means[j], theta.sigmas[j])
               : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, t[j]);
  }
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) acc += std::exp(t[j] - mx);
  return mx + std::log(acc);
}

double mixture_loglik(std::span<const double> data, const MixtureParams& theta) {
  double acc = 0.0;
  for (double x : data) acc += mixture_log_density(x, theta);
  return acc;
}

std::vector<double> responsibilities(double x, const MixtureParams& theta) {
  const std::size_t k = theta.k();
  std::vector<double> r(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    r[j] = theta.weights[j] > 0.0
               ? std::log(theta.weights[j]) + normal_log_pdf(x, theta.means[j], theta.sigmas[j])
               : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, r[j]);
  }
  double acc = 0.0;
  for (double& v : r) {
    v = std::exp(v - mx);
    acc += v;
  }
  for (double& v : r) v /= acc;
  return r;
}

double MixtureGradient::euclidean_norm() const {
  const double a = l2(d_means);
  const double b = l2(d_log_sigmas);
  const double c = l2(d_weights);
  return std::sqrt(a * a + b * b + c * c);
}

double MixtureGradient::dual_norm() const {
  double inf = 0.0;
  for (double v : d_weights) inf = std::max(inf, std::abs(v));
  return std::max({l2(d_means), l2(d_log_sigmas), inf});
}

MixtureGradient grad_log_density(double x, const MixtureParams& theta) {
  const std::size_t k = theta.k();
  const std::vector<double> r = responsibilities(x, theta);
  const double logf = mixture_log_density(x, theta);
  MixtureGradient g;
  g.d_means.resize(k);
  g.d_log_sigmas.resize(k);
  g.d_weights.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double z = (x - theta.means[j]) / theta.sigmas[j];
    g.d_means[j] = r[j] * z / theta.sigmas[j];
    g.d_log_sigmas[j] = r[j] * (z * z - 1.0);
    g.d_weights[j] = std::exp(normal_log_pdf(x, theta.means[j], theta.sigmas[j]) - logf);
  }
  return g;
}

MixtureEnvelopes envelope_constants(const SieveSpec& sieve) {
  sieve.validate();
  const double m = sieve.m;
  const double smin = sieve.sigma_min();
  const double smax = sieve.sigma_max();
  const double k = static_cast<double>(sieve.k);
  MixtureEnvelopes e;
  e.a_m = 1.0 / (smin * smin);
  e.b_m = 1.0 / (4.0 * smax * smax);
  e.log_A_m = -m * m / (smin * smin) - std::log(smax) - kHalfLog2Pi;
  e.A_m = std::exp(e.log_A_m);
  e.log_B_mk = std::log(k) + m * m / (2.0 * smax * smax) - std::log(smin) - kHalfLog2Pi;
  e.B_mk = std::exp(e.log_B_mk);
  e.K_mk = std::max(-e.log_A_m, e.log_B_mk) + std::max(e.a_m, e.b_m);
  e.C_mek = std::sqrt(k) * std::max({1.0 / (smin * smin), 1.0, 1.0 / sieve.epsilon}) *
            (1.0 + m + m * m);
  return e;
}

std::vector<double> floor_weights(std::vector<double> w, double floor) {
  const std::size_t k = w.size();
  if (k == 0) throw std::invalid_argument("floor_weights: empty weights");
  if (floor * static_cast<double>(k) > 1.0 + 1e-15) {
    throw std::invalid_argument("floor_weights: floor exceeds 1/k");
  }
  double sum = 0.0;
  bool feasible = true;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("floor_weights: bad weight");
    sum += v;
    feasible = feasible && v >= floor;
  }
  if (feasible && std::abs(sum - 1.0) <= 1e-15) return w;
  std::vector<bool> fixed(k, false);
  for (std::size_t iter = 0; iter <= k; ++iter) {
    std::size_t nfixed = 0;
    double free_mass = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (fixed[j]) {
        ++nfixed;
      } else {
        free_mass += w[j];
      }
    }
    const double target = 1.0 - floor * static_cast<double>(nfixed);
    const std::size_t nfree = k - nfixed;
    bool changed = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (fixed[j]) {
        w[j] = floor;
        continue;
      }
      w[j] = free_mass > 0.0 ? w[j] * target / free_mass : target / static_cast<double>(nfree);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (!fixed[j] && w[j] < floor) {
        fixed[j] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return w;
}

MixtureParams project_to_sieve(MixtureParams theta, const SieveSpec& sieve) {
  sieve.validate();
  if (theta.k() != sieve.k || theta.weights.size() != sieve.k || theta.sigmas.size() != sieve.k) {
    throw std::invalid_argument("project_to_sieve: parameter shape does not match sieve k");
  }
  const double lo = sieve.sigma_min();
  const double hi = sieve.sigma_max();
  for (std::size_t j = 0; j < sieve.k; ++j) {
    theta.means[j] = std::clamp(theta.means[j], -sieve.m, sieve.m);
    theta.sigmas[j] = std::clamp(theta.sigmas[j], lo, hi);
  }
  theta.weights = floor_weights(std::move(theta.weights), sieve.epsilon);
  return theta;
}

double product_norm_distance(const MixtureParams& a, const MixtureParams& b) {
  if (a.k() != b.k()) throw std::invalid_argument("product_norm_distance: k mismatch");
  double dm = 0.0, dt = 0.0, dp = 0.0;
  for (std::size_t j = 0; j < a.k(); ++j) {
    const double u = a.means[j] - b.means[j];
    const double v = std::log(a.sigmas[j]) - std::log(b.sigmas[j]);
    dm += u * u;
    dt += v * v;
    dp += std::abs(a.weights[j] - b.weights[j]);
  }
  return std::sqrt(dm) + std::sqrt(dt) + dp;
}

OrbitDistance d_min(const MixtureParams& a, const MixtureParams& b) {
  const std::size_t k = a.k();
  if (b.k() != k) throw std::invalid_argument("d_min: parameters must share k");
  if (k > 8) throw std::invalid_argument("d_min: k > 8, use assignment solver");
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  OrbitDistance best{std::numeric_limits<double>::infinity(), perm};
  do {
    double dm = 0.0, ds = 0.0, dp = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t p = perm[j];
      const double u = a.means[p] - b.means[j];
      const double v = a.sigmas[p] - b.sigmas[j];
      dm += u * u;
      ds += v * v;
      dp += std::abs(a.weights[p] - b.weights[j]);
    }
    const double cost = std::sqrt(dm) + std::sqrt(ds) + dp;
    if (cost < best.value) best = {cost, perm};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<double> sample_mixture(const MixtureParams& theta, std::size_t n, std::uint64_t seed) {
  theta.validate();
  if (n == 0) throw std::invalid_argument("sample_mixture: n must be >= 1");
  RandomStream rng(seed);
  std::vector<double> out(n);
  for (double& x : out) {
    const double u = rng.uniform();
    std::size_t j = 0;
    double cum = theta.weights[0];
    while (u > cum && j + 1 < theta.k()) cum += theta.weights[++j];
    x = theta.means[j] + theta.sigmas[j] * rng.normal();
  }
  return out;
}

double orbit_hausdorff(std::span<const MixtureParams> A, std::span<const MixtureParams> B) {
  if (A.empty() || B.empty()) throw std::invalid_argument("orbit_hausdorff: empty set");
  auto directed = [](std::span<const MixtureParams> X, std::span<const MixtureParams> Y) {
    double sup = 0.0;
    for (const MixtureParams& x : X) {
      double inf = std::numeric_limits<double>::infinity();
      for (const MixtureParams& y : Y) inf = std::min(inf, d_min(x, y).value);
      sup = std::max(sup, inf);
    }
    return sup;
  };
  return std::max(directed(A, B), directed(B, A));
}

}  // namespace foldmix
