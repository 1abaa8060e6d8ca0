#pragma once

#include <cstddef>
#include <vector>

namespace foldmix {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

// Rules are computed once per order and cached; the reference stays valid for
// the lifetime of the process. Thread-safe.
const GaussLegendreRule& gauss_legendre(std::size_t order);

struct QuadratureSpec {
  std::size_t nodes = 256;  // per panel
  std::size_t panels = 1;
};

// Calls visit(x, w) for every node of the composite rule on [a, b].
template <class Visit>
void for_each_node(double a, double b, const QuadratureSpec& q, Visit&& visit) {
  const GaussLegendreRule& rule = gauss_legendre(q.nodes);
  const std::size_t panels = q.panels == 0 ? 1 : q.panels;
  const double width = (b - a) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + width * static_cast<double>(p);
    const double half = 0.5 * width;
    const double mid = lo + half;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      visit(mid + half * rule.nodes[i], half * rule.weights[i]);
    }
  }
}

template <class F>
double integrate(F&& f, double a, double b, const QuadratureSpec& q = {}) {
  double acc = 0.0;
  for_each_node(a, b, q, [&](double x, double w) { acc += w * f(x); });
  return acc;
}

}  // namespace foldmix
