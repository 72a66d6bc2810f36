#pragma once

// Coupled-dipole method-of-moments backend.
//
// Unknowns are dipole current moments x_p = j omega p_p (A m), three per dipole.
//   Z_pq = j k eta G(r_p, r_q),   G = (I + grad grad / k^2) exp(-j k R) / (4 pi R)
//   Z_pp = -j (eta / k) alpha_p^-1 + k^2 eta / (6 pi) I
// with alpha the static polarizability (m^3). The radiative term makes every dipole
// lossless, so Re Z = U^T U with U_(n,(p,a)) = k sqrt(eta) v_n(k r_p) . e_a.
// The scattered field of currents x is f = -U x and the excitation of a regular
// wave a is U^T a, hence T = -U Z^-1 U^T.

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "subcm/network.hpp"
#include "subcm/swe.hpp"

namespace subcm {

inline constexpr double kEta0 = 376.730313668;      // free-space impedance, ohm
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

enum class Region { Controllable, Background };

/// Lumped port across one axis of a controllable dipole. The dipole is read as a
/// short element of `length` metres, so port current = moment / length.
struct Port {
  int dipole = 0;
  int axis = 2;
  double z0 = 50.0;
  double length = 1.0;
};

struct DipoleScene {
  std::vector<Vec3> positions;
  std::vector<Eigen::Matrix3d> polarizability;
  std::vector<Region> region;
  std::vector<Port> ports;
  bool ground_plane = false;  // PEC plane z = 0

  int size() const noexcept { return static_cast<int>(positions.size()); }
  void add(const Vec3& position, double alpha, Region r = Region::Controllable);
  void add(const Vec3& position, const Eigen::Matrix3d& alpha, Region r = Region::Controllable);
  int count(Region r) const;
  /// Largest distance of a dipole from the origin.
  double radius() const;
  /// Throws GeometryError / DomainError on invalid content.
  void validate() const;
};

/// Free-space dyadic Green's function between two distinct points.
Eigen::Matrix3cd dyadic_green(const Vec3& r, const Vec3& r_src, double k);

/// Impedance system in block form, background unknowns first.
/// `u` has basis.size() + port_count rows; the port rows hold sqrt(z0)/length at the port unknown.
/// `t_background` is an optional T-matrix of an extra background scatterer (hybrid sphere)
/// that the dipole currents see through `z` and `u`.
struct BlockImpedance {
  double k = 0.0;
  WaveBasis basis;
  int port_count = 0;
  int nb = 0;
  int nc = 0;
  Eigen::MatrixXcd z;
  Eigen::MatrixXcd u;
  std::optional<Eigen::MatrixXcd> t_background;
  std::vector<int> dipole_of_unknown;
  std::vector<int> axis_of_unknown;

  int n() const noexcept { return nb + nc; }
  int wave_dim() const noexcept { return basis.size() + port_count; }
  auto zbb() const { return z.topLeftCorner(nb, nb); }
  auto zbc() const { return z.topRightCorner(nb, nc); }
  auto zcb() const { return z.bottomLeftCorner(nc, nb); }
  auto zcc() const { return z.bottomRightCorner(nc, nc); }
  auto ub() const { return u.leftCols(nb); }
  auto uc() const { return u.rightCols(nc); }
  Eigen::MatrixXcd t0() const;  // t_background or zero
};

/// Default basis for a scene: truncation_order(k * radius), radius floored at 1e-3 / k.
WaveBasis scene_basis(const DipoleScene& scene, double k);

/// Assemble Z and U. With a ground plane the images are folded into the original
/// unknowns (image current = -M x, M = diag(1, 1, -1)) and U is scaled by 1/sqrt(2)
/// so that Re Z = U^T U still holds on the half space.
BlockImpedance assemble_impedance(const DipoleScene& scene, double k);
BlockImpedance assemble_impedance(const DipoleScene& scene, double k, const WaveBasis& basis);

/// Real projection U (basis x 3N) of free-space dipoles, columns in scene order.
Eigen::MatrixXd assemble_projection(const DipoleScene& scene, double k, const WaveBasis& basis);

/// ||Re Z - U^H U||_F / ||Re Z||_F, Re Z the Hermitian part of Z.
double factorization_residual(const BlockImpedance& blocks);

struct TransitionSet {
  OperatorMatrix t, t_b, s, s_b;
};

/// T = T0 - U Z^-1 U^T and T_b = T0 - U_b Z_bb^-1 U_b^T; S = 2T + I.
/// Throws LinearSolveError when Z or Z_bb is numerically singular.
TransitionSet transition(const BlockImpedance& blocks);
TransitionSet transition(const DipoleScene& scene, double k);

/// Scattering matrix over spherical waves followed by port power waves.
OperatorMatrix generalized_scattering(const DipoleScene& scene, double k);

struct MirroredScene {
  DipoleScene scene;            // originals first, then images in the same order
  std::vector<int> image_of;    // for every dipole of `scene`, its mirror partner
};

/// Explicit free-space scene with image dipoles at (x, y, -z) with polarizability M alpha M.
/// Under symmetric excitation an image carries current -M x (normal moment kept, tangential flipped).
MirroredScene mirror_scene(const DipoleScene& scene);

/// Solve Z x = v with a condition check; shared by the backends.
Eigen::MatrixXcd solve_checked(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& rhs, const char* what);

}  // namespace subcm
