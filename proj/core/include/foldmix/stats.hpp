#pragma once

#include <functional>
#include <span>
#include <vector>

namespace foldmix {

double mean(std::span<const double> x);
double median(std::vector<double> x);
// Linear-interpolation quantile (type 7), p in [0, 1].
double quantile(std::vector<double> x, double p);

// Ordinary least-squares slope of y on x.
double ls_slope(std::span<const double> x, std::span<const double> y);

// Kolmogorov-Smirnov distance sup_x |F_n(x) - F(x)| for a CDF that may carry
// atoms. `cdf_left(x)` is the left limit F(x-). Both one-sided limits are
// compared at every distinct sample value and at every listed atom of F.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf,
                   const std::function<double(double)>& cdf_left,
                   std::span<const double> atoms = {});

// Continuous-CDF convenience overload.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

}  // namespace foldmix
