#include "foldmix/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace foldmix {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::vector<double> axis(double lo, double hi, std::size_t points) {
  std::vector<double> v(points);
  if (points == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) v[i] = lo + step * static_cast<double>(i);
  v.back() = hi;
  return v;
}

double binomial(double n, double k) {
  double r = 1.0;
  for (double i = 1.0; i <= k; i += 1.0) r *= (n - k + i) / i;
  return std::round(r);
}

// All vectors a in N^k with sum a = total.
void compositions(std::size_t k, std::size_t total, std::vector<std::vector<std::size_t>>& out) {
  std::vector<std::size_t> a(k, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t j, std::size_t left) {
    if (j + 1 == k) {
      a[j] = left;
      out.push_back(a);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      a[j] = v;
      rec(j + 1, left - v);
    }
  };
  rec(0, total);
}

struct SieveNetShape {
  std::size_t mean_points;
  std::size_t log_sigma_points;
  std::size_t lattice_steps;
  double free_mass;
};

SieveNetShape sieve_net_shape(const SieveSpec& sieve, double delta) {
  sieve.validate();
  if (!(delta > 0.0)) throw std::invalid_argument("build_net: delta must be > 0");
  const double k = static_cast<double>(sieve.k);
  const double spacing = 2.0 * delta / (3.0 * std::sqrt(k));
  SieveNetShape s;
  s.mean_points = grid_points_for(-sieve.m, sieve.m, spacing);
  s.log_sigma_points = grid_points_for(-sieve.m, sieve.m, spacing);
  s.free_mass = std::max(0.0, 1.0 - k * sieve.epsilon);
  const double h = delta / (3.0 * k);
  s.lattice_steps = s.free_mass > 0.0
                        ? static_cast<std::size_t>(std::ceil(s.free_mass / h - 1e-12))
                        : 0;
  return s;
}

struct NodeSet {
  std::vector<double> x;
  std::vector<double> wf;  // weight times law density
};

}  // namespace

void ParameterBox::validate() const {
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min) || !(mu_max >= mu_min)) {
    throw std::invalid_argument("ParameterBox: need 0 < sigma_min <= sigma_max and mu_min <= mu_max");
  }
}

double ParameterBox::mu_bound() const { return std::max(std::abs(mu_min), std::abs(mu_max)); }

bool ParameterBox::contains(double mu, double sigma) const {
  return mu >= mu_min && mu <= mu_max && sigma >= sigma_min && sigma <= sigma_max;
}

double FoldedEnvelopeConstants::function_envelope(double y) const {
  const double s2 = box.sigma_min * box.sigma_min;
  return C1 + y * y / (2.0 * s2) + box.mu_bound() * y / s2;
}

double FoldedEnvelopeConstants::gradient_envelope(double y) const {
  return C2 * (1.0 + std::abs(y) + y * y);
}

double FoldedEnvelopeConstants::hessian_envelope(double y) const {
  const double y2 = y * y;
  return C3 * (1.0 + y2 + y2 * y2);
}

double FoldedEnvelopeConstants::square_envelope(double y) const { return B_K * (1.0 + y * y); }

FoldedEnvelopeConstants folded_envelopes(const ParameterBox& box) {
  box.validate();
  const double M = box.mu_bound();
  const double s = box.sigma_min;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double s4 = s2 * s2;
  FoldedEnvelopeConstants c;
  c.box = box;
  c.C0 = std::numbers::ln2 - kHalfLog2Pi;
  c.C1 = std::abs(std::log(box.sigma_min)) + std::abs(std::log(box.sigma_max)) + std::numbers::ln2 +
         kHalfLog2Pi + M * M / (2.0 * s2);
  c.C2 = 1.0 / s2 + 2.0 * M / s3 + 2.0 * M * M / s4 + 1.0;
  c.C3 = 3.0 / s2 + 6.0 * M / s3 + 6.0 * M * M / s4 + 2.0 / (s4 * s2);
  c.B_K = c.C1 + 1.0 / (2.0 * s2) + M / s2;
  return c;
}

EnvelopeMoments envelope_moments(const ParameterBox& box, const FoldedParams& law,
                                 const QuadratureSpec& quad) {
  const FoldedEnvelopeConstants c = folded_envelopes(box);
  double m1 = 0.0, m2 = 0.0, y4 = 0.0;
  for_each_node(0.0, 12.0 * (std::abs(law.mu) + law.sigma), quad, [&](double y, double w) {
    const double f = std::exp(folded_log_density(y, law)) * w;
    const double L = c.gradient_envelope(y);
    m1 += f * L;
    m2 += f * L * L;
    y4 += f * y * y * y * y;
  });
  if (!std::isfinite(m1) || !std::isfinite(m2) || !std::isfinite(y4)) {
    throw std::runtime_error("envelope_moments: quadrature produced a non-finite value");
  }
  return {m1, m2, 2.0 * c.B_K * c.B_K * (1.0 + y4)};
}

double mixture_D(const MixtureEnvelopes& env, double fourth_moment) {
  return 2.0 * env.K_mk * env.K_mk * (1.0 + fourth_moment);
}

std::size_t grid_points_for(double lo, double hi, double spacing) {
  const double len = hi - lo;
  if (!(len > 0.0)) return 1;
  return static_cast<std::size_t>(std::ceil(len / spacing - 1e-12)) + 1;
}

double box_net_cardinality(std::span<const double> lo, std::span<const double> hi, double delta) {
  if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("build_net: bad box");
  if (!(delta > 0.0)) throw std::invalid_argument("build_net: delta must be > 0");
  const double spacing = delta / std::sqrt(static_cast<double>(lo.size()));
  double M = 1.0;
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (!(hi[d] >= lo[d])) throw std::invalid_argument("build_net: bad box");
    M *= static_cast<double>(grid_points_for(lo[d], hi[d], spacing));
  }
  return M;
}

std::vector<std::vector<double>> build_box_net(std::span<const double> lo,
                                               std::span<const double> hi, double delta) {
  if (box_net_cardinality(lo, hi, delta) > kMaxNetCardinality) throw std::length_error("mesh too fine");
  const std::size_t d = lo.size();
  const double spacing = delta / std::sqrt(static_cast<double>(d));
  std::vector<std::vector<double>> axes(d);
  for (std::size_t j = 0; j < d; ++j) axes[j] = axis(lo[j], hi[j], grid_points_for(lo[j], hi[j], spacing));
  std::vector<std::vector<double>> net;
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    std::vector<double> p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = axes[j][idx[j]];
    net.push_back(std::move(p));
    std::size_t j = 0;
    while (j < d && ++idx[j] == axes[j].size()) idx[j++] = 0;
    if (j == d) break;
  }
  return net;
}

double net_cardinality(const ParameterBox& box, double delta) {
  box.validate();
  if (!(delta > 0.0)) throw std::invalid_argument("build_net: delta must be > 0");
  const double spacing = delta / std::sqrt(2.0);
  return static_cast<double>(grid_points_for(box.mu_min, box.mu_max, spacing)) *
         static_cast<double>(grid_points_for(box.sigma_min, box.sigma_max, spacing));
}

std::vector<FoldedParams> build_net(const ParameterBox& box, double delta) {
  const double M = net_cardinality(box, delta);
  if (M > kMaxNetCardinality) throw std::length_error("mesh too fine");
  const double spacing = delta / std::sqrt(2.0);
  const auto mus = axis(box.mu_min, box.mu_max, grid_points_for(box.mu_min, box.mu_max, spacing));
  const auto sds =
      axis(box.sigma_min, box.sigma_max, grid_points_for(box.sigma_min, box.sigma_max, spacing));
  std::vector<FoldedParams> net;
  net.reserve(mus.size() * sds.size());
  for (double mu : mus) {
    for (double sd : sds) net.emplace_back(mu, sd);
  }
  return net;
}

double net_cardinality(const SieveSpec& sieve, double delta) {
  const SieveNetShape s = sieve_net_shape(sieve, delta);
  const double k = static_cast<double>(sieve.k);
  return std::pow(static_cast<double>(s.mean_points), k) *
         std::pow(static_cast<double>(s.log_sigma_points), k) *
         binomial(static_cast<double>(s.lattice_steps) + k - 1.0, k - 1.0);
}

std::vector<MixtureParams> build_net(const SieveSpec& sieve, double delta) {
  if (net_cardinality(sieve, delta) > kMaxNetCardinality) throw std::length_error("mesh too fine");
  const SieveNetShape s = sieve_net_shape(sieve, delta);
  const std::size_t k = sieve.k;
  const auto mus = axis(-sieve.m, sieve.m, s.mean_points);
  const auto ts = axis(-sieve.m, sieve.m, s.log_sigma_points);
  std::vector<std::vector<std::size_t>> lattice;
  compositions(k, s.lattice_steps, lattice);
  const double unit = s.lattice_steps > 0 ? s.free_mass / static_cast<double>(s.lattice_steps) : 0.0;

  std::vector<MixtureParams> net;
  std::vector<std::size_t> mi(k, 0), ti(k, 0);
  auto advance = [](std::vector<std::size_t>& idx, std::size_t base) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (++idx[j] < base) return true;
      idx[j] = 0;
    }
    return false;
  };
  do {
    do {
      for (const auto& a : lattice) {
        MixtureParams p;
        p.means.resize(k);
        p.sigmas.resize(k);
        p.weights.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
          p.means[j] = mus[mi[j]];
          p.sigmas[j] = std::exp(ts[ti[j]]);
          p.weights[j] = sieve.epsilon + unit * static_cast<double>(a[j]);
        }
        net.push_back(std::move(p));
      }
    } while (advance(ti, ts.size()));
  } while (advance(mi, mus.size()));
  return net;
}

UllnBudget ulln_bound(double m1, double m2, double D, double M, double n, double epsilon) {
  if (!(m1 > 0.0 && m2 > 0.0 && D > 0.0 && M > 0.0 && n > 0.0)) {
    throw std::invalid_argument("ulln_bound: inputs must be positive");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("ulln_bound: epsilon must lie in (0, 1)");
  UllnBudget b;
  b.m1 = m1;
  b.m2 = m2;
  b.D = D;
  b.M = M;
  b.n = n;
  b.epsilon = epsilon;
  b.delta = epsilon / (6.0 * m1);
  b.bound = (m2 - m1 * m1) / (n * m1 * m1) + 9.0 * M * D / (n * epsilon * epsilon);
  return b;
}

double folded_population_loglik(const FoldedParams& theta, const FoldedParams& law,
                                const QuadratureSpec& quad) {
  double acc = 0.0;
  for_each_node(0.0, 12.0 * (std::abs(law.mu) + law.sigma), quad, [&](double y, double w) {
    acc += w * std::exp(folded_log_density(y, law)) * folded_log_density(y, theta);
  });
  return acc;
}

namespace {

std::pair<double, double> mixture_range(const MixtureParams& law) {
  const double lo = *std::min_element(law.means.begin(), law.means.end());
  const double hi = *std::max_element(law.means.begin(), law.means.end());
  const double s = *std::max_element(law.sigmas.begin(), law.sigmas.end());
  return {lo - 12.0 * s, hi + 12.0 * s};
}

NodeSet mixture_nodes(const MixtureParams& law, const QuadratureSpec& quad) {
  NodeSet ns;
  const auto [a, b] = mixture_range(law);
  for_each_node(a, b, quad, [&](double x, double w) {
    ns.x.push_back(x);
    ns.wf.push_back(w * std::exp(mixture_log_density(x, law)));
  });
  return ns;
}

double mixture_expectation(const NodeSet& ns, const MixtureParams& theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ns.x.size(); ++i) acc += ns.wf[i] * mixture_log_density(ns.x[i], theta);
  return acc;
}

}  // namespace

double mixture_population_loglik(const MixtureParams& theta, const MixtureParams& law,
                                 const QuadratureSpec& quad) {
  return mixture_expectation(mixture_nodes(law, quad), theta);
}

double empirical_sup_deviation(const FoldedSample& data, std::span<const FoldedParams> net,
                               std::span<const double> population) {
  if (net.empty() || net.size() != population.size()) {
    throw std::invalid_argument("empirical_sup_deviation: net and population values must match");
  }
  const double n = static_cast<double>(data.n());
  double sup = 0.0;
  for (std::size_t j = 0; j < net.size(); ++j) {
    sup = std::max(sup, std::abs(folded_loglik(data, net[j].mu, net[j].sigma) / n - population[j]));
  }
  return sup;
}

double empirical_sup_deviation(std::span<const double> data, std::span<const MixtureParams> net,
                               std::span<const double> population) {
  if (net.empty() || net.size() != population.size()) {
    throw std::invalid_argument("empirical_sup_deviation: net and population values must match");
  }
  const double n = static_cast<double>(data.size());
  double sup = 0.0;
  for (std::size_t j = 0; j < net.size(); ++j) {
    sup = std::max(sup, std::abs(mixture_loglik(data, net[j]) / n - population[j]));
  }
  return sup;
}

std::vector<KlGapReport> folded_kl_gap(const FoldedKlRegion& region, std::span<const double> deltas,
                                       const FoldedParams& theta0, const QuadratureSpec& quad) {
  const ParameterBox& box = region.box;
  box.validate();
  if (!box.contains(theta0.mu, theta0.sigma)) throw std::invalid_argument("region excludes theta0");
  if (region.points_per_axis < 2) throw std::invalid_argument("folded_kl_gap: need >= 2 points per axis");
  std::vector<double> ys, wf;
  for_each_node(0.0, 12.0 * (std::abs(theta0.mu) + theta0.sigma), quad, [&](double y, double w) {
    ys.push_back(y);
    wf.push_back(w * std::exp(folded_log_density(y, theta0)));
  });
  auto ell = [&](double mu, double sigma) {
    const FoldedParams p(mu, sigma);
    double acc = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) acc += wf[i] * folded_log_density(ys[i], p);
    return acc;
  };
  auto dist = [&](double mu, double sigma) {
    return std::min(std::hypot(mu - theta0.mu, sigma - theta0.sigma),
                    std::hypot(mu + theta0.mu, sigma - theta0.sigma));
  };
  const double l0 = ell(theta0.mu, theta0.sigma);
  const auto mus = axis(box.mu_min, box.mu_max, region.points_per_axis);
  const auto sds = axis(box.sigma_min, box.sigma_max, region.points_per_axis);
  const double step = std::max(mus[1] - mus[0], sds[1] - sds[0]);
  std::vector<double> vals(mus.size() * sds.size()), dists(vals.size());
  double max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mus.size(); ++i) {
    for (std::size_t j = 0; j < sds.size(); ++j) {
      const std::size_t idx = i * sds.size() + j;
      vals[idx] = ell(mus[i], sds[j]);
      dists[idx] = dist(mus[i], sds[j]);
      max_excess = std::max(max_excess, vals[idx] - l0);
    }
  }
  std::vector<KlGapReport> out;
  for (double delta : deltas) {
    if (!(delta >= 0.0)) throw std::invalid_argument("folded_kl_gap: delta must be >= 0");
    KlGapReport rep;
    rep.delta = delta;
    rep.grid_step = step;
    rep.quadrature_nodes = quad.nodes * std::max<std::size_t>(quad.panels, 1);
    rep.max_excess = max_excess;
    rep.grid_points = vals.size();
    double best = -std::numeric_limits<double>::infinity();
    double bmu = 0.0, bsd = 0.0;
    if (delta == 0.0) best = l0, bmu = theta0.mu, bsd = theta0.sigma;
    for (std::size_t idx = 0; idx < vals.size(); ++idx) {
      if (dists[idx] >= delta && vals[idx] > best) {
        best = vals[idx];
        bmu = mus[idx / sds.size()];
        bsd = sds[idx % sds.size()];
      }
    }
    if (!std::isfinite(best)) throw std::invalid_argument("folded_kl_gap: excluded region is empty");
    // One local refinement at a tenth of the grid step.
    const double cmu = bmu, csd = bsd;
    for (int a = -10; a <= 10; ++a) {
      for (int b = -10; b <= 10; ++b) {
        const double mu = cmu + 0.1 * step * a;
        const double sd = csd + 0.1 * step * b;
        if (!box.contains(mu, sd) || dist(mu, sd) < delta) continue;
        const double v = ell(mu, sd);
        if (v > best) best = v, bmu = mu, bsd = sd;
      }
    }
    rep.eta = l0 - best;
    rep.argmax_theta = {bmu, bsd};
    out.push_back(rep);
  }
  return out;
}

KlGapReport folded_kl_gap(const FoldedKlRegion& region, double delta, const FoldedParams& theta0,
                          const QuadratureSpec& quad) {
  const double d[1] = {delta};
  return folded_kl_gap(region, d, theta0, quad).front();
}

std::vector<KlGapReport> mixture_kl_gap(const MixtureKlRegion& region,
                                        std::span<const double> deltas,
                                        const MixtureParams& theta0, const QuadratureSpec& quad) {
  theta0.validate();
  const std::size_t k = region.k;
  if (theta0.k() != k) throw std::invalid_argument("mixture_kl_gap: theta0 has wrong k");
  if (region.weight_steps < 1 || region.mean_points < 2 || region.sigma_points < 2) {
    throw std::invalid_argument("mixture_kl_gap: grid too coarse");
  }
  const double free_mass = 1.0 - static_cast<double>(k) * region.weight_lo;
  if (!(free_mass >= 0.0)) throw std::invalid_argument("mixture_kl_gap: weight_lo exceeds 1/k");
  auto in_region = [&](const MixtureParams& t) {
    for (std::size_t j = 0; j < k; ++j) {
      if (t.weights[j] < region.weight_lo - 1e-12) return false;
      if (t.means[j] < region.mean_lo || t.means[j] > region.mean_hi) return false;
      if (t.sigmas[j] < region.sigma_lo || t.sigmas[j] > region.sigma_hi) return false;
    }
    return true;
  };
  if (!in_region(theta0)) throw std::invalid_argument("region excludes theta0");

  const NodeSet ns = mixture_nodes(theta0, quad);
  const double l0 = mixture_expectation(ns, theta0);
  const auto mus = axis(region.mean_lo, region.mean_hi, region.mean_points);
  const auto sds = axis(region.sigma_lo, region.sigma_hi, region.sigma_points);
  const double unit = free_mass / static_cast<double>(region.weight_steps);
  const double step = std::max({mus[1] - mus[0], sds[1] - sds[0], unit});
  std::vector<std::vector<std::size_t>> lattice;
  compositions(k, region.weight_steps, lattice);

  std::vector<MixtureParams> grid;
  std::vector<double> vals, dists;
  std::vector<std::size_t> mi(k, 0), si(k, 0);
  auto advance = [](std::vector<std::size_t>& idx, std::size_t base) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (++idx[j] < base) return true;
      idx[j] = 0;
    }
    return false;
  };
  double max_excess = -std::numeric_limits<double>::infinity();
  do {
    do {
      for (const auto& a : lattice) {
        MixtureParams p;
        p.means.resize(k);
        p.sigmas.resize(k);
        p.weights.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
          p.means[j] = mus[mi[j]];
          p.sigmas[j] = sds[si[j]];
          p.weights[j] = region.weight_lo + unit * static_cast<double>(a[j]);
        }
        const double v = mixture_expectation(ns, p);
        max_excess = std::max(max_excess, v - l0);
        dists.push_back(d_min(p, theta0).value);
        vals.push_back(v);
        grid.push_back(std::move(p));
      }
    } while (advance(si, sds.size()));
  } while (advance(mi, mus.size()));

  std::vector<KlGapReport> out;
  for (double delta : deltas) {
    if (!(delta >= 0.0)) throw std::invalid_argument("mixture_kl_gap: delta must be >= 0");
    KlGapReport rep;
    rep.delta = delta;
    rep.grid_step = step;
    rep.quadrature_nodes = quad.nodes * std::max<std::size_t>(quad.panels, 1);
    rep.max_excess = max_excess;
    rep.grid_points = grid.size();
    double best = -std::numeric_limits<double>::infinity();
    MixtureParams arg = theta0;
    if (delta == 0.0) best = l0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (dists[i] >= delta && vals[i] > best) best = vals[i], arg = grid[i];
    }
    if (!std::isfinite(best)) throw std::invalid_argument("mixture_kl_gap: excluded region is empty");
    // One coordinate-wise refinement pass at a tenth of the grid step.
    for (std::size_t c = 0; c < 3 * k; ++c) {
      const MixtureParams centre = arg;
      for (int a = -10; a <= 10; ++a) {
        if (a == 0) continue;
        MixtureParams p = centre;
        const double off = 0.1 * step * a;
        if (c < k) {
          p.means[c] += off;
        } else if (c < 2 * k) {
          p.sigmas[c - k] += off;
        } else {
          const std::size_t j = c - 2 * k;
          const std::size_t other = (j + 1) % k;
          if (other == j) continue;
          p.weights[j] += off;
          p.weights[other] -= off;
        }
        if (!in_region(p) || d_min(p, theta0).value < delta) continue;
        const double v = mixture_expectation(ns, p);
        if (v > best) best = v, arg = p;
      }
    }
    rep.eta = l0 - best;
    for (std::size_t j = 0; j < k; ++j) {
      rep.argmax_theta.push_back(arg.weights[j]);
      rep.argmax_theta.push_back(arg.means[j]);
      rep.argmax_theta.push_back(arg.sigmas[j]);
    }
    out.push_back(rep);
  }
  return out;
}

bool argmax_stability_check(std::span<const double> q, std::span<const double> qn,
                            std::span<const double> orbit_distance, double radius, double eta) {
  if (q.size() != qn.size() || q.size() != orbit_distance.size() || q.empty()) {
    throw std::invalid_argument("argmax_stability_check: grids must be nonempty and aligned");
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sup = std::max(sup, std::abs(qn[i] - q[i]));
  if (sup > eta / 3.0) throw std::invalid_argument("uniform closeness not met");
  const double best = *std::max_element(qn.begin(), qn.end());
  for (std::size_t i = 0; i < qn.size(); ++i) {
    if (qn[i] == best && orbit_distance[i] > radius) return false;
  }
  return true;
}

}  // namespace foldmix
