#include "subcm/mie.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "subcm/dipole.hpp"
#include "subcm/errors.hpp"
#include "subcm/special.hpp"

namespace subcm {

void SphereSpec::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("sphere radius must be positive");
  if (material == SphereMaterial::Dielectric) {
    if (!(eps_r >= 1.0) || !std::isfinite(eps_r)) throw DomainError("sphere eps_r must be real and >= 1");
    if (!(mu_r > 0.0) || !std::isfinite(mu_r)) throw DomainError("sphere mu_r must be real and > 0");
  }
}

cplx mie_coefficient(const SphereSpec& spec, double k, int l, Polarization pol) {
  spec.validate();
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("wavenumber must be finite and positive");
  if (l < 1) throw DomainError("Mie coefficient needs l >= 1");
  const double x = k * spec.radius;
  const auto j = special::spherical_bessel_j(l, x);
  const auto y = special::spherical_bessel_y(l, x);
  const auto il = static_cast<std::size_t>(l);
  // Riccati functions psi = x j_l, xi = x h_l^(2) and their derivatives.
  const double psi = x * j[il];
  const double dpsi = special::riccati_derivative(l, x, j[il - 1], j[il]);
  const cplx xi(psi, -x * y[il]);
  const cplx dxi(dpsi, -special::riccati_derivative(l, x, y[il - 1], y[il]));

  if (spec.material == SphereMaterial::PEC) {
    if (pol == Polarization::TE) return -psi / xi;
    return -dpsi / dxi;
  }
  if (spec.eps_r == 1.0 && spec.mu_r == 1.0) return 0.0;
  const double n = std::sqrt(spec.eps_r * spec.mu_r);
  const double mu = spec.mu_r;
  const double x1 = n * x;
  const auto j1 = special::spherical_bessel_j(l, x1);
  const double psi1 = x1 * j1[il];
  const double dpsi1 = special::riccati_derivative(l, x1, j1[il - 1], j1[il]);
  if (pol == Polarization::TE) {
    return -(mu * psi1 * dpsi - n * dpsi1 * psi) / (mu * psi1 * dxi - n * dpsi1 * xi);
  }
  return -(n * psi1 * dpsi - mu * dpsi1 * psi) / (n * psi1 * dxi - mu * dpsi1 * xi);
}

OperatorMatrix mie_tmatrix(const SphereSpec& spec, double k, const WaveBasis& basis) {
  spec.validate();
  const int need = truncation_order(k * spec.radius);
  if (basis.l_max() < need) {
    throw ResolutionError("Mie T-matrix needs l_max >= " + std::to_string(need) + ", basis has " +
                          std::to_string(basis.l_max()));
  }
  OperatorMatrix t{OperatorKind::T, basis, 0, Eigen::MatrixXcd::Zero(basis.size(), basis.size())};
  // One evaluation per (l, pol); entries are shared across m.
  std::vector<cplx> te(static_cast<std::size_t>(basis.l_max()) + 1), tm(te.size());
  for (int l = 1; l <= basis.l_max(); ++l) {
    te[static_cast<std::size_t>(l)] = mie_coefficient(spec, k, l, Polarization::TE);
    tm[static_cast<std::size_t>(l)] = mie_coefficient(spec, k, l, Polarization::TM);
  }
  for (int n = 0; n < basis.size(); ++n) {
    const auto il = static_cast<std::size_t>(basis[n].l);
    t.data(n, n) = basis[n].pol == Polarization::TE ? te[il] : tm[il];
  }
  return t;
}

ModeSet mie_modeset(const SphereSpec& spec, double k, const WaveBasis& basis) {
  const auto t = mie_tmatrix(spec, k, basis);
  ModeSet m;
  m.frequency = k * kSpeedOfLight / (2.0 * std::numbers::pi);
  m.basis = basis;
  const int n = basis.size();
  m.a = Eigen::MatrixXcd::Identity(n, n);
  m.f = m.a;
  for (int i = 0; i < n; ++i) m.eigen.push_back(eigen_from_t(t.data(i, i)));
  m.cancellation_sensitive.assign(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) m.cancellation_sensitive[static_cast<std::size_t>(i)] = 2.0 * std::abs(t.data(i, i)) < 1e-6;
  sort_modes(m);
  return m;
}

}  // namespace subcm
