#pragma once

#include <vector>

namespace mpamp {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point rule computed by Newton iteration on the Legendre recurrence.
GaussLegendreRule gauss_legendre(int n);

/// Cached rule; safe for concurrent readers.
const GaussLegendreRule& gauss_legendre_cached(int n);

/// Sorts, clips to [lo, hi] and deduplicates breakpoints; the result always
/// starts at lo and ends at hi.
std::vector<double> normalize_breakpoints(std::vector<double> points, double lo, double hi);

/// Composite quadrature of f over consecutive breakpoint panels.
template <class F>
double integrate_panels(F&& f, const std::vector<double>& breakpoints, const GaussLegendreRule& rule) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    const double a = breakpoints[k];
    const double b = breakpoints[k + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double panel = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      panel += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    total += half * panel;
  }
  return total;
}

}  // namespace mpamp
