#include "subcm/special.hpp"

#include <cmath>
#include <numbers>

#include "subcm/errors.hpp"

namespace subcm::special {

std::vector<double> spherical_bessel_j(int l_max, double x) {
  if (l_max < 0) throw DomainError("spherical_bessel_j: negative order");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("spherical_bessel_j: argument must be finite and >= 0");
  std::vector<double> j(static_cast<std::size_t>(l_max) + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  // Start well above both l_max and x; the seed error decays faster than geometrically.
  const int start = l_max + static_cast<int>(x) + 40 + static_cast<int>(4.0 * std::sqrt(l_max + x + 1.0));
  double next = 0.0;  // j_{l+1}
  double cur = 1.0;  // j_l, arbitrary seed
  double norm = 0.0;
  for (int l = start; l >= 0; --l) {
    if (l <= l_max) j[static_cast<std::size_t>(l)] = cur;
    norm += (2.0 * l + 1.0) * cur * cur;
    if (l == 0) break;
    const double prev = (2.0 * l + 1.0) / x * cur - next;  // j_{l-1}
    next = cur;
    cur = prev;
    if (std::abs(cur) > 1e150) {
      constexpr double s = 1e-150;
      cur *= s;
      next *= s;
      norm *= s * s;
      for (int q = l; q <= l_max; ++q) j[static_cast<std::size_t>(q)] *= s;
    }
  }
  const double scale = 1.0 / std::sqrt(norm);
  // Sign from j_0 (or j_1 near a zero of j_0).
  const double j0 = std::sin(x) / x;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  double sign = 1.0;
  if (std::abs(j0) > std::abs(j1) || l_max == 0) {
    sign = (j0 * j[0] >= 0.0) ? 1.0 : -1.0;
  } else {
    sign = (j1 * j[1] >= 0.0) ? 1.0 : -1.0;
  }
  for (auto& v : j) v *= sign * scale;
  return j;
}

std::vector<double> spherical_bessel_y(int l_max, double x) {
  if (l_max < 0) throw DomainError("spherical_bessel_y: negative order");
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("spherical_bessel_y: argument must be finite and > 0");
  std::vector<double> y(static_cast<std::size_t>(l_max) + 1, 0.0);
  y[0] = -std::cos(x) / x;
  if (l_max >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
  for (int l = 1; l < l_max; ++l) {
    y[static_cast<std::size_t>(l) + 1] = (2.0 * l + 1.0) / x * y[static_cast<std::size_t>(l)] - y[static_cast<std::size_t>(l) - 1];
  }
  return y;
}

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: need at least one node");
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

}  // namespace subcm::special
