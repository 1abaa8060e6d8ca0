#include "foldmix/folded_asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "foldmix/random.hpp"

namespace foldmix {

ScoreVector score_vector(double y, const FoldedParams& p) {
  const double mu = p.mu;
  const double s = p.sigma;
  const double s2 = s * s;
  const double th = tanh_sech2(y * mu / s2).tanh;
  return {-mu / s2 + (y / s2) * th,
          -1.0 / s + (y * y + mu * mu) / (s2 * s) - (2.0 * y * mu / (s2 * s)) * th};
}

Hessian2 hessian_matrix(double y, const FoldedParams& p) {
  const double mu = p.mu;
  const double s = p.sigma;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double s4 = s2 * s2;
  const TanhSech2 ts = tanh_sech2(y * mu / s2);
  const double y2 = y * y;
  Hessian2 h;
  h.mm = -1.0 / s2 + (y2 / s4) * ts.sech2;
  h.ms = 2.0 * mu / s3 - (2.0 * y / s3) * ts.tanh - (2.0 * y2 * mu / (s4 * s)) * ts.sech2;
  h.ss = 1.0 / s2 - 3.0 * (y2 + mu * mu) / s4 + (6.0 * y * mu / s4) * ts.tanh +
         (4.0 * y2 * mu * mu / (s4 * s2)) * ts.sech2;
  return h;
}

std::array<double, 2> InfoMatrix::eigenvalues() const {
  const double tr = mm + ss;
  const double diff = mm - ss;
  const double r = std::sqrt(diff * diff + 4.0 * ms * ms);
  return {0.5 * (tr - r), 0.5 * (tr + r)};
}

InfoMatrix fisher_information(const FoldedParams& p, const QuadratureSpec& quad,
                              double identity_tol) {
  if (quad.nodes < 64) throw std::invalid_argument("fisher_information: need >= 64 nodes");
  double smm = 0, sms = 0, sss = 0, hmm = 0, hms = 0, hss = 0;
  for_each_node(0.0, std::abs(p.mu) + 12.0 * p.sigma, quad, [&](double y, double w) {
    const double f = std::exp(folded_log_density(y, p)) * w;
    const ScoreVector sv = score_vector(y, p);
    const Hessian2 h = hessian_matrix(y, p);
    smm += f * sv.d_mu * sv.d_mu;
    sms += f * sv.d_mu * sv.d_sigma;
    sss += f * sv.d_sigma * sv.d_sigma;
    hmm += f * h.mm;
    hms += f * h.ms;
    hss += f * h.ss;
  });
  InfoMatrix info;
  info.mm = smm;
  info.ms = sms;
  info.ss = sss;
  info.quadrature_error_estimate =
      std::max({std::abs(smm + hmm), std::abs(sms + hms), std::abs(sss + hss)});
  if (info.quadrature_error_estimate > identity_tol) {
    throw std::runtime_error("information identity violated: increase nodes");
  }
  return info;
}

ScoreVector expected_score(const FoldedParams& p, const QuadratureSpec& quad) {
  ScoreVector acc{0.0, 0.0};
  for_each_node(0.0, std::abs(p.mu) + 12.0 * p.sigma, quad, [&](double y, double w) {
    const double f = std::exp(folded_log_density(y, p)) * w;
    const ScoreVector sv = score_vector(y, p);
    acc.d_mu += f * sv.d_mu;
    acc.d_sigma += f * sv.d_sigma;
  });
  return acc;
}

FoldedSample sample_folded(const FoldedParams& p, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_folded: n must be >= 1");
  RandomStream rng(seed);
  std::vector<double> y(n);
  for (double& v : y) v = std::abs(p.mu + p.sigma * rng.normal());
  return FoldedSample(std::move(y));
}

double gaussian_even_moment(int k, double mu, double s) {
  const double m2 = mu * mu;
  const double v = s * s;
  switch (k) {
    case 2: return m2 + v;
    case 4: return m2 * m2 + 6.0 * m2 * v + 3.0 * v * v;
    case 6: return m2 * m2 * m2 + 15.0 * m2 * m2 * v + 45.0 * m2 * v * v + 15.0 * v * v * v;
    case 8:
      return m2 * m2 * m2 * m2 + 28.0 * m2 * m2 * m2 * v + 210.0 * m2 * m2 * v * v +
             420.0 * m2 * v * v * v + 105.0 * v * v * v * v;
    default: throw std::invalid_argument("gaussian_even_moment: k must be 2, 4, 6 or 8");
  }
}

double rescaled_contrast(double t, const FoldedSample& data, double sigma0) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("rescaled_contrast: sigma0 must be > 0");
  if (t == 0.0) return 0.0;
  const double n = static_cast<double>(data.n());
  const double mu = t * std::pow(n, -0.25);
  const double s2 = sigma0 * sigma0;
  const double c = mu / s2;
  // l_n(mu) - l_n(0) = sum [log cosh(y mu / s^2)] - n mu^2 / (2 s^2)
  double acc = 0.0;
  for (double y : data.values()) acc += log_cosh(y * c);
  return acc - n * mu * mu / (2.0 * s2);
}

double contrast_approximation(double t, const FoldedSample& data, double sigma0) {
  const double n = static_cast<double>(data.n());
  double z = 0.0;
  double q = 0.0;
  const double s2 = sigma0 * sigma0;
  for (double y : data.values()) {
    const double y2 = y * y;
    z += y2 - s2;
    q += y2 * y2;
  }
  z /= std::sqrt(n);
  q /= n;
  const double s4 = s2 * s2;
  const double t2 = t * t;
  return z / (2.0 * s4) * t2 - q / (12.0 * s4 * s4) * t2 * t2;
}

double contrast_remainder_bound(double t, const FoldedSample& data, double sigma0) {
  const double n = static_cast<double>(data.n());
  double s6 = 0.0;
  for (double y : data.values()) {
    const double y2 = y * y;
    s6 += y2 * y2 * y2;
  }
  const double t2 = t * t;
  const double sig12 = std::pow(sigma0, 12);
  return kLogCoshC6 * std::pow(n, -1.5) * t2 * t2 * t2 * s6 / sig12;
}

ContrastCurve contrast_curve(const std::vector<double>& t_grid, const FoldedSample& data,
                             double sigma0) {
  ContrastCurve c;
  c.t_grid = t_grid;
  const double n = static_cast<double>(data.n());
  const double s2 = sigma0 * sigma0;
  for (double y : data.values()) {
    c.z_n += y * y - s2;
    c.fourth_moment += y * y * y * y;
  }
  c.z_n /= std::sqrt(n);
  c.fourth_moment /= n;
  c.values.reserve(t_grid.size());
  c.approximation.reserve(t_grid.size());
  for (double t : t_grid) {
    c.values.push_back(rescaled_contrast(t, data, sigma0));
    c.approximation.push_back(contrast_approximation(t, data, sigma0));
  }
  return c;
}

double limit_argmax(double z, double sigma0, double fourth_moment) {
  if (!(fourth_moment > 0.0)) throw std::invalid_argument("limit_argmax: fourth_moment must be > 0");
  const double zp = std::max(z, 0.0);
  const double s4 = sigma0 * sigma0 * sigma0 * sigma0;
  return std::sqrt(3.0 * s4 * zp / fourth_moment);
}

}  // namespace foldmix
