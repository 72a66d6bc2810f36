#pragma once

#include <vector>

namespace subcm::special {

/// Spherical Bessel functions j_0..j_lmax at real x >= 0.
/// Miller downward recurrence normalized with sum_l (2l+1) j_l^2 = 1, which stays
/// accurate for l >> x where upward recurrence loses every digit.
std::vector<double> spherical_bessel_j(int l_max, double x);

/// Spherical Neumann functions y_0..y_lmax at real x > 0 (upward recurrence, stable for y).
std::vector<double> spherical_bessel_y(int l_max, double x);

/// Riccati derivative d/dx [x z_l(x)] = x z_{l-1}(x) - l z_l(x) for l >= 1, given z_{l-1}, z_l.
inline double riccati_derivative(int l, double x, double z_lm1, double z_l) {
  return x * z_lm1 - l * z_l;
}

struct GaussLegendre {
  std::vector<double> nodes;    // ascending, in (-1, 1)
  std::vector<double> weights;  // sum to 2
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
GaussLegendre gauss_legendre(int n);

}  // namespace subcm::special
