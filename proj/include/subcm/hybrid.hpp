#pragma once

// Dipole MoM coupled to a sphere at the origin that enters only through its T-matrix.
//
// With U4 mapping dipole currents to the regular-wave field they produce inside the
// sphere (E = -k sqrt(eta) sum_n (U4 I)_n v_n) and T1 the sphere's T-matrix:
//   (Z + U4^T T1 U4) I = (U + T1 U4)^T a,   T = T1 - (U + T1 U4) Z'^-1 (U + T1 U4)^T.
// The sphere always belongs to the background.

#include <vector>

#include <Eigen/Core>

#include "subcm/dipole.hpp"
#include "subcm/mie.hpp"
#include "subcm/modes.hpp"

namespace subcm {

struct HybridScene {
  DipoleScene mom_scene;
  SphereSpec sphere;

  /// Smallest dipole distance from the origin minus the sphere radius.
  double clearance() const;
  /// Throws GeometryError (dipole inside or touching the sphere) or DomainError
  /// (ground plane or ports, which the hybrid path does not support).
  void validate() const;
};

struct U4Projection {
  Eigen::MatrixXcd u4;           // basis x 3N, columns in scene order (dipole p, axis a at 3p + a)
  std::vector<double> residual;  // per column, relative change against a denser grid
  double r_fit = 0.0;
};

/// U4 by quadrature projection of each dipole's field on a sphere of radius
/// r_fit = sqrt(sphere radius * nearest dipole distance).
/// Throws GeometryError without a valid r_fit and ResolutionError if a residual exceeds 1e-6.
U4Projection assemble_u4(const HybridScene& scene, double k, const WaveBasis& basis);

/// Basis covering the dipoles and the sphere.
WaveBasis hybrid_basis(const HybridScene& scene, double k);

/// Z' = Z + U4^T T1 U4, U' = U + T1 U4, t_background = T1, unknowns ordered as in assemble_impedance.
BlockImpedance hybrid_blocks(const HybridScene& scene, double k);
BlockImpedance hybrid_blocks(const HybridScene& scene, double k, const WaveBasis& basis);

/// Substructure modes from the Schur complement of Z' (background dipoles and sphere eliminated).
ModeSet hybrid_impedance_modes(const HybridScene& scene, double k, const ModeOptions& opts = {});

/// Modes of S a = s S_b a with S, S_b from the hybrid solves.
ModeSet hybrid_scattering_modes(const HybridScene& scene, double k, const ModeOptions& opts = {});

}  // namespace subcm
