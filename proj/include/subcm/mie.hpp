#pragma once

// Diagonal T-matrices of homogeneous spheres centred at the origin.

#include "subcm/modes.hpp"
#include "subcm/network.hpp"
#include "subcm/swe.hpp"

namespace subcm {

enum class SphereMaterial { PEC, Dielectric };

struct SphereSpec {
  double radius = 1.0;
  SphereMaterial material = SphereMaterial::PEC;
  double eps_r = 1.0;  // dielectric only
  double mu_r = 1.0;   // dielectric only

  void validate() const;
};

/// T-matrix entry of degree l and polarization pol (m-independent).
cplx mie_coefficient(const SphereSpec& spec, double k, int l, Polarization pol);

/// Diagonal T over `basis`. Throws ResolutionError when basis.l_max() < truncation_order(k a).
OperatorMatrix mie_tmatrix(const SphereSpec& spec, double k, const WaveBasis& basis);

/// Modes of a sphere in free space: the diagonal entries with coordinate eigenvectors.
ModeSet mie_modeset(const SphereSpec& spec, double k, const WaveBasis& basis);

}  // namespace subcm
