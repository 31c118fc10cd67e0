#include "mpamp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "mpamp/error.hpp"

namespace mpamp {

GaussLegendreRule gauss_legendre(int n) {
  if (n < 1) throw ParameterError("gauss_legendre: order must be positive");
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const GaussLegendreRule& gauss_legendre_cached(int n) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

std::vector<double> normalize_breakpoints(std::vector<double> points, double lo, double hi) {
  points.push_back(lo);
  points.push_back(hi);
  std::erase_if(points, [&](double p) { return !(p >= lo && p <= hi); });
  std::sort(points.begin(), points.end());
  const double min_gap = 1e-13 * (hi - lo);
  std::vector<double> out;
  out.reserve(points.size());
  for (double p : points) {
    if (out.empty() || p - out.back() > min_gap) out.push_back(p);
  }
  if (out.back() != hi) out.back() = hi;
  return out;
}

}  // namespace mpamp
