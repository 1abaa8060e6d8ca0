#include "foldmix/mixture_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "foldmix/random.hpp"
#include "foldmix/stats.hpp"

namespace foldmix {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_data(std::span<const double> data, std::size_t k) {
  if (data.size() < k) throw std::invalid_argument("mixture fit: need n >= k observations");
  for (double x : data) {
    if (!std::isfinite(x)) throw std::invalid_argument("mixture fit: non-finite observation");
  }
}

double sample_sd(std::span<const double> data) {
  const double m = mean(data);
  double ss = 0.0;
  for (double x : data) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(data.size()));
}

// Root of h(t) = -N + S e^{-2t} - 2 lambda t on [lo, hi]; h is strictly
// decreasing, so the clamped root is the constrained maximizer.
double solve_log_sigma(double N, double S, double lambda, double lo, double hi) {
  auto h = [&](double t) { return -N + S * std::exp(-2.0 * t) - 2.0 * lambda * t; };
  if (h(lo) <= 0.0) return lo;
  if (h(hi) >= 0.0) return hi;
  double a = lo;
  double b = hi;
  double t = std::clamp(S > 0.0 && N > 0.0 ? 0.5 * std::log(S / N) : 0.5 * (lo + hi), lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double v = h(t);
    if (v > 0.0) {
      a = t;
    } else if (v < 0.0) {
      b = t;
    } else {
      return t;
    }
    const double dv = -2.0 * S * std::exp(-2.0 * t) - 2.0 * lambda;
    double next = t - v / dv;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t))) return next;
    t = next;
  }
  return t;
}

bool lex_less(const MixtureParams& a, const MixtureParams& b) {
  for (std::size_t j = 0; j < a.k(); ++j) {
    if (a.means[j] != b.means[j]) return a.means[j] < b.means[j];
    if (a.sigmas[j] != b.sigmas[j]) return a.sigmas[j] < b.sigmas[j];
    if (a.weights[j] != b.weights[j]) return a.weights[j] < b.weights[j];
  }
  return false;
}

// Coordinate c of theta in (means | log-sigmas | weight transfers) order.
// Returns false if the moved point leaves the box.
bool move_coordinate(MixtureParams& theta, std::size_t c, double h, const SearchBox& box) {
  const std::size_t k = theta.k();
  if (c < k) {
    const double v = theta.means[c] + h;
    if (v < box.mean_lo || v > box.mean_hi) return false;
    theta.means[c] = v;
    return true;
  }
  if (c < 2 * k) {
    const std::size_t j = c - k;
    const double v = std::exp(std::log(theta.sigmas[j]) + h);
    if (v < box.sigma_lo || v > box.sigma_hi) return false;
    theta.sigmas[j] = v;
    return true;
  }
  if (k < 2) return false;
  const std::size_t j = c - 2 * k;
  const double share = h / static_cast<double>(k - 1);
  std::vector<double> w = theta.weights;
  w[j] += h;
  for (std::size_t i = 0; i < k; ++i) {
    if (i != j) w[i] -= share;
  }
  for (double v : w) {
    if (v < box.weight_floor || v > 1.0) return false;
  }
  theta.weights = std::move(w);
  return true;
}

struct Objective {
  std::span<const double> data;
  double lambda;
  double operator()(const MixtureParams& t) const { return penalized_objective(data, t, lambda); }
};

// Coordinate search with a parabolic step per coordinate. Step sizes shrink
// by 10 from 1e-3 down to 1e-6.
double polish(MixtureParams& theta, double value, const SearchBox& box, const Objective& f,
              std::size_t max_sweeps) {
  const std::size_t coords = 3 * theta.k();
  for (double h = 1e-3; h >= 0.99e-6; h *= 0.1) {
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      bool improved = false;
      for (std::size_t c = 0; c < coords; ++c) {
        MixtureParams up = theta;
        MixtureParams dn = theta;
        const bool ok_up = move_coordinate(up, c, h, box);
        const bool ok_dn = move_coordinate(dn, c, -h, box);
        const double fu = ok_up ? f(up) : -std::numeric_limits<double>::infinity();
        const double fd = ok_dn ? f(dn) : -std::numeric_limits<double>::infinity();
        MixtureParams best = theta;
        double best_v = value;
        if (fu > best_v) best = up, best_v = fu;
        if (fd > best_v) best = dn, best_v = fd;
        if (ok_up && ok_dn) {
          const double curv = fu - 2.0 * value + fd;
          if (curv < 0.0) {
            const double off = 0.5 * h * (fd - fu) / curv;
            if (std::abs(off) <= 50.0 * h && std::abs(off) > 0.0) {
              MixtureParams vx = theta;
              if (move_coordinate(vx, c, off, box)) {
                const double fv = f(vx);
                if (fv > best_v) best = std::move(vx), best_v = fv;
              }
            }
          }
        }
        if (best_v > value) {
          theta = std::move(best);
          value = best_v;
          improved = true;
        }
      }
      if (!improved) break;
    }
  }
  return value;
}

MixtureFitResult fit_in_box(std::span<const double> data, std::size_t k, const SearchBox& box,
                            double lambda, const FitConfig& cfg,
                            std::span<const MixtureParams> starts) {
  if (starts.empty()) throw std::invalid_argument("mixture fit: no starting points");
  const Objective f{data, lambda};
  MixtureFitResult out;
  bool have = false;
  for (std::size_t r = 0; r < starts.size(); ++r) {
    if (starts[r].k() != k) throw std::invalid_argument("mixture fit: start has wrong k");
    // Relabeled starts give bit-identical runs.
    MixtureParams theta = canonical_order(starts[r]);
    double prev = -std::numeric_limits<double>::infinity();
    bool converged = false;
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
      double before = 0.0;
      MixtureParams next = em_step(data, theta, box, lambda, &before);
      if (std::isfinite(prev) &&
          std::abs(before - prev) <= cfg.em_tolerance * std::max(1.0, std::abs(prev))) {
        converged = true;
        break;
      }
      prev = before;
      theta = std::move(next);
    }
    double value = f(theta);
    value = polish(theta, value, box, f, cfg.polish_steps);
    bool certified = local_max_certificate(data, theta, box, lambda);
    for (int pass = 0; pass < 3 && !certified; ++pass) {
      value = polish(theta, value, box, f, cfg.polish_steps);
      certified = local_max_certificate(data, theta, box, lambda);
    }
    theta = canonical_order(theta);
    value = f(theta);
    out.restart_trace.push_back({r, value, converged});
    const double tol = cfg.tie_tolerance * std::max(1.0, std::abs(value));
    bool take = !have || value > out.objective + tol;
    if (have && !take && std::abs(value - out.objective) <= tol) {
      take = lex_less(theta, out.theta_hat);
    }
    if (take) {
      out.theta_hat = theta;
      out.objective = value;
      out.converged = converged;
      out.certified = certified;
      have = true;
    }
  }
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("FitConfig: restarts must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("FitConfig: max_iterations must be >= 1");
  if (!(em_tolerance > 0.0)) throw std::invalid_argument("FitConfig: em_tolerance must be > 0");
  if (!(tie_tolerance > 0.0)) throw std::invalid_argument("FitConfig: tie_tolerance must be > 0");
}

void PenaltySpec::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("PenaltySpec: lambda must be finite and > 0");
  }
}

bool SearchBox::contains(const MixtureParams& theta, double tol) const {
  for (std::size_t j = 0; j < theta.k(); ++j) {
    if (theta.means[j] < mean_lo - tol || theta.means[j] > mean_hi + tol) return false;
    if (theta.sigmas[j] < sigma_lo * (1 - tol) || theta.sigmas[j] > sigma_hi * (1 + tol)) return false;
    if (theta.weights[j] < weight_floor - tol) return false;
  }
  return true;
}

SearchBox sieve_box(const SieveSpec& sieve) {
  sieve.validate();
  return {-sieve.m, sieve.m, sieve.sigma_min(), sieve.sigma_max(), sieve.epsilon};
}

SearchBox pmle_localization_box(std::span<const double> data, double lambda) {
  if (data.empty()) throw std::invalid_argument("pmle_localization_box: empty data");
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  double sd = sample_sd(data);
  if (!(sd > 0.0)) sd = 1.0;
  const double log_sd = std::log(sd);
  // A spike below e^{-1/(2 lambda)} cannot beat its own penalty; 30 caps the
  // depth for small lambda.
  const double cap = std::min(1.0 / (2.0 * lambda) + 1.0, 30.0);
  const double t_lo = std::min(log_sd, 0.0) - cap;
  const double t_hi = std::max(log_sd, 0.0) + 3.0;
  // Weights are unpenalized; the floor only keeps log(pi) finite.
  return {*lo_it - 3.0 * sd, *hi_it + 3.0 * sd, std::exp(t_lo), std::exp(t_hi), 1e-10};
}

double penalty_g(const MixtureParams& theta) {
  double g = 0.0;
  for (std::size_t j = 0; j < theta.k(); ++j) {
    const double t = std::log(theta.sigmas[j]);
    g += theta.means[j] * theta.means[j] + t * t;
  }
  return g;
}

double penalized_objective(std::span<const double> data, const MixtureParams& theta,
                           double lambda) {
  const double ll = mixture_loglik(data, theta);
  return lambda > 0.0 ? ll - lambda * penalty_g(theta) : ll;
}

MixtureParams em_step(std::span<const double> data, const MixtureParams& theta,
                      const SearchBox& box, double lambda, double* objective_before) {
  const std::size_t k = theta.k();
  const std::size_t n = data.size();
  std::vector<double> logw(k), logs(k), inv(k);
  for (std::size_t j = 0; j < k; ++j) {
    logw[j] = theta.weights[j] > 0.0 ? std::log(theta.weights[j])
                                     : -std::numeric_limits<double>::infinity();
    logs[j] = std::log(theta.sigmas[j]);
    inv[j] = 1.0 / theta.sigmas[j];
  }
  std::vector<double> r(n * k);
  std::vector<double> N(k, 0.0), Sx(k, 0.0);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = data[i];
    double* ri = &r[i * k];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double z = (x - theta.means[j]) * inv[j];
      ri[j] = logw[j] - 0.5 * z * z - logs[j];
      mx = std::max(mx, ri[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      ri[j] = std::exp(ri[j] - mx);
      acc += ri[j];
    }
    ll += mx + std::log(acc) - kHalfLog2Pi;
    const double ia = 1.0 / acc;
    for (std::size_t j = 0; j < k; ++j) {
      ri[j] *= ia;
      N[j] += ri[j];
      Sx[j] += ri[j] * x;
    }
  }
  if (objective_before) *objective_before = lambda > 0.0 ? ll - lambda * penalty_g(theta) : ll;

  MixtureParams next = theta;
  const double t_lo = std::log(box.sigma_lo);
  const double t_hi = std::log(box.sigma_hi);
  for (std::size_t j = 0; j < k; ++j) {
    if (!(N[j] > 1e-300)) continue;
    const double s2 = theta.sigmas[j] * theta.sigmas[j];
    const double mu = lambda > 0.0 ? Sx[j] / (N[j] + 2.0 * lambda * s2) : Sx[j] / N[j];
    next.means[j] = std::clamp(mu, box.mean_lo, box.mean_hi);
  }
  std::vector<double> S(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = &r[i * k];
    for (std::size_t j = 0; j < k; ++j) {
      const double d = data[i] - next.means[j];
      S[j] += ri[j] * d * d;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (!(N[j] > 1e-300)) continue;
    if (lambda > 0.0) {
      next.sigmas[j] = std::exp(solve_log_sigma(N[j], S[j], lambda, t_lo, t_hi));
    } else {
      next.sigmas[j] = std::clamp(std::sqrt(S[j] / N[j]), box.sigma_lo, box.sigma_hi);
    }
  }
  std::vector<double> w(k);
  for (std::size_t j = 0; j < k; ++j) w[j] = N[j] / static_cast<double>(n);
  next.weights = floor_weights(std::move(w), box.weight_floor);
  return next;
}

std::vector<MixtureParams> draw_starts(std::span<const double> data, std::size_t k,
                                       const SearchBox& box, const FitConfig& cfg,
                                       double log_sigma_lo, double log_sigma_hi) {
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::max(sample_sd(data), 1e-12);
  std::vector<MixtureParams> starts;
  starts.reserve(cfg.restarts);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    RandomStream rng(derive_seed(cfg.seed, "mixture-start", k, r));
    MixtureParams s;
    s.means.resize(k);
    s.sigmas.resize(k);
    s.weights.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double q = quantile(sorted, (static_cast<double>(j) + 0.5) / static_cast<double>(k));
      // restart 0 is the unjittered quantile start
      const double jitter = r == 0 ? 0.0 : 0.1 * sd * rng.normal();
      s.means[j] = std::clamp(q + jitter, box.mean_lo, box.mean_hi);
      const double t = r == 0 ? std::log(sd / static_cast<double>(k))
                              : rng.uniform(log_sigma_lo, log_sigma_hi);
      s.sigmas[j] = std::clamp(std::exp(t), box.sigma_lo, box.sigma_hi);
      s.weights[j] = r == 0 ? 1.0 : rng.uniform();
    }
    const double total = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
    for (double& w : s.weights) w /= total;
    s.weights = floor_weights(std::move(s.weights), box.weight_floor);
    starts.push_back(std::move(s));
  }
  return starts;
}

MixtureFitResult fit_sieve_mle(std::span<const double> data, const SieveSpec& sieve,
                               const FitConfig& cfg) {
  sieve.validate();
  cfg.validate();
  check_data(data, sieve.k);
  const SearchBox box = sieve_box(sieve);
  const auto starts = draw_starts(data, sieve.k, box, cfg, -sieve.m, sieve.m);
  return fit_in_box(data, sieve.k, box, 0.0, cfg, starts);
}

MixtureFitResult fit_sieve_mle_from(std::span<const double> data, const SieveSpec& sieve,
                                    const FitConfig& cfg, std::span<const MixtureParams> starts) {
  sieve.validate();
  cfg.validate();
  check_data(data, sieve.k);
  const SearchBox box = sieve_box(sieve);
  std::vector<MixtureParams> proj;
  for (const MixtureParams& s : starts) proj.push_back(project_to_sieve(s, sieve));
  return fit_in_box(data, sieve.k, box, 0.0, cfg, proj);
}

MixtureFitResult fit_pmle(std::span<const double> data, std::size_t k, const PenaltySpec& pen,
                          const FitConfig& cfg) {
  return fit_pmle_with(data, k, pen, cfg, {});
}

MixtureFitResult fit_pmle_with(std::span<const double> data, std::size_t k,
                               const PenaltySpec& pen, const FitConfig& cfg,
                               std::span<const MixtureParams> extra_starts) {
  pen.validate();
  cfg.validate();
  if (k < 1) throw std::invalid_argument("fit_pmle: k must be >= 1");
  check_data(data, k);
  const SearchBox box = pmle_localization_box(data, pen.lambda);
  const double log_sd = std::log(std::max(sample_sd(data), 1e-12));
  const double t_lo = std::max(log_sd - 2.0, std::log(box.sigma_lo));
  const double t_hi = std::min(log_sd + 0.5, std::log(box.sigma_hi));
  auto starts = draw_starts(data, k, box, cfg, t_lo, t_hi);
  for (MixtureParams s : extra_starts) {
    for (std::size_t j = 0; j < s.k(); ++j) {
      s.means[j] = std::clamp(s.means[j], box.mean_lo, box.mean_hi);
      s.sigmas[j] = std::clamp(s.sigmas[j], box.sigma_lo, box.sigma_hi);
    }
    s.weights = floor_weights(std::move(s.weights), box.weight_floor);
    starts.push_back(std::move(s));
  }
  return fit_in_box(data, k, box, pen.lambda, cfg, starts);
}

bool local_max_certificate(std::span<const double> data, const MixtureParams& theta,
                           const SearchBox& box, double lambda, double h, double tol) {
  const double base = penalized_objective(data, theta, lambda);
  for (std::size_t c = 0; c < 3 * theta.k(); ++c) {
    for (double step : {h, -h}) {
      MixtureParams moved = theta;
      if (!move_coordinate(moved, c, step, box)) continue;
      if (penalized_objective(data, moved, lambda) > base + tol) return false;
    }
  }
  return true;
}

MixtureParams spike_configuration(std::span<const double> data, std::size_t i, double t,
                                  const MixtureParams& base) {
  if (i >= data.size()) throw std::out_of_range("spike_configuration: index out of range");
  if (base.k() < 2) throw std::invalid_argument("spike_configuration: base needs k >= 2");
  if (!(t > 0.0)) throw std::invalid_argument("spike_configuration: t must be > 0");
  MixtureParams s = base;
  s.means[0] = data[i];
  s.sigmas[0] = t;
  s.weights[0] = 0.5;
  double rest = 0.0;
  for (std::size_t j = 1; j < base.k(); ++j) rest += base.weights[j];
  for (std::size_t j = 1; j < base.k(); ++j) {
    s.weights[j] = rest > 0.0 ? 0.5 * base.weights[j] / rest
                              : 0.5 / static_cast<double>(base.k() - 1);
  }
  return s;
}

double spike_path_loglik(std::span<const double> data, std::size_t i, double t,
                         const MixtureParams& base) {
  return mixture_loglik(data, spike_configuration(data, i, t, base));
}

double spike_path_penalized(std::span<const double> data, std::size_t i, double t,
                            const MixtureParams& base, double lambda) {
  return penalized_objective(data, spike_configuration(data, i, t, base), lambda);
}

std::size_t most_isolated_index(std::span<const double> data) {
  if (data.size() < 2) return 0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return data[a] < data[b] || (data[a] == data[b] && a < b);
  });
  std::size_t best = idx.front();
  double best_gap = -1.0;
  for (std::size_t p = 0; p < idx.size(); ++p) {
    double gap = std::numeric_limits<double>::infinity();
    if (p > 0) gap = std::min(gap, data[idx[p]] - data[idx[p - 1]]);
    if (p + 1 < idx.size()) gap = std::min(gap, data[idx[p + 1]] - data[idx[p]]);
    if (gap > best_gap) {
      best_gap = gap;
      best = idx[p];
    }
  }
  return best;
}

SpikeBonus spike_bonus_bound(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("spike_bonus_bound: lambda must be > 0");
  return {1.0 / (2.0 * lambda), 1.0 / (4.0 * lambda)};
}

MixtureParams canonical_order(const MixtureParams& theta) {
  std::vector<std::size_t> perm(theta.k());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    if (theta.means[a] != theta.means[b]) return theta.means[a] < theta.means[b];
    if (theta.sigmas[a] != theta.sigmas[b]) return theta.sigmas[a] < theta.sigmas[b];
    return theta.weights[a] < theta.weights[b];
  });
  return theta.permuted(perm);
}

}  // namespace foldmix
