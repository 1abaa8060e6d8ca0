#include "foldmix/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace foldmix {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty input");
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0,1]");
  std::sort(x.begin(), x.end());
  const double h = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("ls_slope: need at least two paired points");
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("ls_slope: x has zero spread");
  return sxy / sxx;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf,
                   const std::function<double(double)>& cdf_left,
                   std::span<const double> atoms) {
  if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  std::vector<double> points(sample);
  points.insert(points.end(), atoms.begin(), atoms.end());
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (double x : points) {
    const auto lo = std::lower_bound(sample.begin(), sample.end(), x);
    const auto hi = std::upper_bound(lo, sample.end(), x);
    const double below = static_cast<double>(lo - sample.begin()) / n;  // F_n(x-)
    const double upto = static_cast<double>(hi - sample.begin()) / n;   // F_n(x)
    d = std::max(d, std::abs(upto - cdf(x)));
    d = std::max(d, std::abs(below - cdf_left(x)));
  }
  return d;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  return ks_distance(std::move(sample), cdf, cdf);
}

}  // namespace foldmix
