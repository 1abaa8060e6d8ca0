#include "foldmix/folded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace foldmix {

namespace {

constexpr double kSaturate = 40.0;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

inline double tanh_only(double t) {
  const double a = std::abs(t);
  if (a > kSaturate) return t > 0 ? 1.0 : -1.0;
  const double em = std::expm1(-2.0 * a);
  const double th = -em / (2.0 + em);
  return t < 0 ? -th : th;
}

void require_nondegenerate(const FoldedSample& s) {
  if (s.degenerate()) {
    throw DegenerateSampleError("constant sample: folded-normal likelihood is unbounded");
  }
}

}  // namespace

FoldedParams::FoldedParams(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0)) {
    throw std::invalid_argument("FoldedParams: require finite mu and sigma > 0");
  }
}

FoldedSample::FoldedSample(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("FoldedSample: empty sample");
  double sum = 0.0;
  double lo = values_.front();
  double hi = values_.front();
  for (double y : values_) {
    if (!std::isfinite(y) || y < 0.0) {
      throw std::invalid_argument("FoldedSample: observations must be finite and >= 0");
    }
    sum += y;
    sum_sq_ += y * y;
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  const double n = static_cast<double>(values_.size());
  mean_ = sum / n;
  double ss = 0.0;
  for (double y : values_) ss += (y - mean_) * (y - mean_);
  s2_ = ss / n;
  degenerate_ = (hi - lo) <= 1e-15;
}

double FoldedSample::threshold_sigma() const {
  return std::sqrt(sum_sq_ / static_cast<double>(values_.size()));
}

TanhSech2 tanh_sech2(double t) {
  const double a = std::abs(t);
  // sech^2 from e^{-2a} directly: 1 + expm1(-2a) would cancel once a is large and
  // destroy the relative accuracy that mu_hat' needs in the far tail.
  const double e = std::exp(-2.0 * a);
  const double den = 1.0 + e;
  const double th = a > kSaturate ? 1.0 : -std::expm1(-2.0 * a) / den;
  const double sech2 = 4.0 * e / (den * den);
  return {t < 0 ? -th : th, sech2};
}

double log_two_cosh(double t) {
  const double a = std::abs(t);
  return a + std::log1p(std::exp(-2.0 * a));
}

double log_cosh(double t) {
  const double a = std::abs(t);
  if (a < 0.5) {
    const double sh = std::sinh(0.5 * a);
    return std::log1p(2.0 * sh * sh);
  }
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double folded_log_density(double y, const FoldedParams& p) {
  if (!(y >= 0.0)) throw std::invalid_argument("folded_log_density: y must be >= 0");
  const double s2 = p.sigma * p.sigma;
  return -std::log(p.sigma) - (y * y + p.mu * p.mu) / (2.0 * s2) +
         log_two_cosh(y * p.mu / s2) - kHalfLog2Pi;
}

double folded_loglik(const FoldedSample& s, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("folded_loglik: sigma must be > 0");
  const double s2 = sigma * sigma;
  const double c = mu / s2;
  double acc = 0.0;
  for (double y : s.values()) acc += log_two_cosh(y * c);
  const double n = static_cast<double>(s.n());
  return acc - n * std::log(sigma) - (s.S_y() + n * mu * mu) / (2.0 * s2) - n * kHalfLog2Pi;
}

double score_k(double sigma, double mu, const FoldedSample& s) {
  const double c = mu / (sigma * sigma);
  double acc = 0.0;
  for (double y : s.values()) acc += y * tanh_only(y * c);
  return acc - static_cast<double>(s.n()) * mu;
}

double curvature_A(double sigma, double mu, const FoldedSample& s) {
  return score_and_curvature(sigma, mu, s).A;
}

ScoreCurvature score_and_curvature(double sigma, double mu, const FoldedSample& s) {
  const double c = mu / (sigma * sigma);
  double k = 0.0;
  double A = 0.0;
  for (double y : s.values()) {
    const TanhSech2 ts = tanh_sech2(y * c);
    k += y * ts.tanh;
    A += y * y * ts.sech2;
  }
  return {k - static_cast<double>(s.n()) * mu, A};
}

double mu_hat(double sigma, const FoldedSample& s) {
  require_nondegenerate(s);
  if (!(sigma > 0.0)) throw std::invalid_argument("mu_hat: sigma must be > 0");
  const double n = static_cast<double>(s.n());
  const double s2 = sigma * sigma;
  if (s2 >= s.S_y() / n) return 0.0;

  // k(sigma, .) is concave on (0, inf), positive just right of 0 and negative
  // at y_bar, so Newton started at y_bar descends monotonically onto the root.
  // The bracket [lo, hi] guards the iteration.
  double lo = 0.0;
  double hi = s.y_bar();
  double mu = hi;
  for (int it = 0; it < 200; ++it) {
    const ScoreCurvature kc = score_and_curvature(sigma, mu, s);
    if (kc.k == 0.0) return mu;
    if (kc.k > 0.0) {
      lo = mu;
    } else {
      hi = mu;
    }
    const double slope = kc.A / s2 - n;
    double next = slope < 0.0 ? mu - kc.k / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - mu);
    mu = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * mu || hi - lo <= 1e-300) break;
  }
  return mu;
}

double mu_hat_prime(double sigma, const FoldedSample& s) {
  require_nondegenerate(s);
  const double n = static_cast<double>(s.n());
  const double s2 = sigma * sigma;
  if (s2 >= s.S_y() / n) {
    throw std::domain_error("profile path at zero; derivative formula inapplicable");
  }
  const double m = mu_hat(sigma, s);
  const double a = curvature_A(sigma, m, s) / s2;
  return -(2.0 * m / sigma) * a / (n - a);
}

double profile_score_N(double sigma, const FoldedSample& s) {
  const double m = mu_hat(sigma, s);
  const double n = static_cast<double>(s.n());
  return s.S_y() - n * sigma * sigma - n * m * m;
}

int profile_score_sign(double sigma, const FoldedSample& s) {
  require_nondegenerate(s);
  const double n = static_cast<double>(s.n());
  const double gap = s.S_y() / n - sigma * sigma;
  if (gap <= 0.0) return gap < 0.0 ? -1 : 0;
  if (gap <= 1024.0 * std::numeric_limits<double>::epsilon() * (s.S_y() / n)) {
    // k(sigma, mu_c) ~ mu_c * gap * (n / sigma^2 - sum y^4 / (3 sigma^6)); the direct sum
    // is pure rounding noise here while the expansion's truncation error is O(gap).
    double q = 0.0;
    for (double y : s.values()) q += y * y * y * y;
    const double lead = 3.0 * n * sigma * sigma * sigma * sigma - q;
    return lead < 0.0 ? 1 : (lead > 0.0 ? -1 : 0);
  }
  // N_n > 0 iff mu_hat < mu_c := sqrt(gap) iff k(sigma, mu_c) < 0.
  const double kc = score_k(sigma, std::sqrt(gap), s);
  return kc < 0.0 ? 1 : (kc > 0.0 ? -1 : 0);
}

double profile_loglik(double sigma, const FoldedSample& s) {
  return folded_loglik(s, mu_hat(sigma, s), sigma);
}

double boundary_bound(double sigma, const FoldedSample& s) {
  if (!(sigma > 0.0 && sigma <= 1.0)) {
    throw std::domain_error("boundary_bound: requires sigma in (0, 1]");
  }
  const double n = static_cast<double>(s.n());
  const double c0 = n * std::numbers::ln2 - 0.5 * n * std::log(2.0 * std::numbers::pi);
  return -n * std::log(sigma) - n * s.s2() / (2.0 * sigma * sigma) + c0;
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi > lo) || points < 2) {
    throw std::invalid_argument("log_grid: need 0 < lo < hi and at least two points");
  }
  std::vector<double> g(points);
  const double a = std::log(lo);
  const double step = (std::log(hi) - a) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = std::exp(a + step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::size_t count_profile_sign_changes(const FoldedSample& s, double lo, double hi,
                                       std::size_t points) {
  int last = 0;
  std::size_t changes = 0;
  for (double sigma : log_grid(lo, hi, points)) {
    const int sg = profile_score_sign(sigma, s);
    if (sg == 0) continue;
    if (last != 0 && sg != last) ++changes;
    last = sg;
  }
  return changes;
}

FoldedFitReport fit_folded(const FoldedSample& s, const FoldedFitOptions& opts) {
  FoldedFitReport rep;
  if (s.degenerate()) {
    rep.degenerate = true;
    rep.mu_hat = std::numeric_limits<double>::quiet_NaN();
    rep.sigma_hat = std::numeric_limits<double>::quiet_NaN();
    rep.profile_value = std::numeric_limits<double>::infinity();
    return rep;
  }
  const double thr = s.threshold_sigma();
  const double lo = opts.lo_factor * std::min(std::sqrt(s.s2()), thr);
  const double hi = opts.hi_factor * thr;

  auto add_candidate = [&](double sigma, bool threshold) {
    FoldedCandidate c;
    c.sigma = sigma;
    c.threshold = threshold;
    const double m = threshold ? 0.0 : mu_hat(sigma, s);
    const double n = static_cast<double>(s.n());
    c.residual = threshold ? 0.0 : s.S_y() - n * sigma * sigma - n * m * m;
    c.profile_value = folded_loglik(s, m, sigma);
    rep.candidates.push_back(c);
  };

  const std::vector<double> grid = log_grid(lo, hi, std::max<std::size_t>(opts.scan_points, 2));
  int last_sign = 0;
  double last_sigma = 0.0;
  for (double sigma : grid) {
    const int sg = profile_score_sign(sigma, s);
    if (sg == 0) {
      add_candidate(sigma, false);
      continue;
    }
    if (last_sign != 0 && sg != last_sign) {
      ++rep.crossings_found;
      double a = last_sigma;
      double b = sigma;
      const int sign_a = last_sign;
      if (a < thr && thr <= b) {
        // N vanishes at the threshold; if N keeps sign_a up to it, that zero is
        // the crossing and the threshold candidate already covers it.
        const double below = thr * (1.0 - 1e-9);
        if (below <= a || profile_score_sign(below, s) == sign_a) {
          last_sign = sg;
          last_sigma = sigma;
          continue;
        }
        b = below;
      }
      for (std::size_t it = 0; it < opts.max_bisect && b - a > opts.root_tol; ++it) {
        const double mid = 0.5 * (a + b);
        const int sm = profile_score_sign(mid, s);
        if (sm == 0) {
          a = b = mid;
          break;
        }
        if (sm == sign_a) {
          a = mid;
        } else {
          b = mid;
        }
      }
      add_candidate(0.5 * (a + b), false);
    }
    last_sign = sg;
    last_sigma = sigma;
  }
  add_candidate(thr, true);

  const FoldedCandidate* best = &rep.candidates.front();
  for (const FoldedCandidate& c : rep.candidates) {
    if (c.profile_value > best->profile_value) best = &c;
  }
  rep.sigma_hat = best->sigma;
  rep.mu_hat = best->threshold ? 0.0 : mu_hat(best->sigma, s);
  rep.profile_value = best->profile_value;
  return rep;
}

}  // namespace foldmix
