#pragma once

// Spherical vector wave bookkeeping.
//
// Convention: power-normalized waves with real angular functions. A field
//   E(r) = k sqrt(eta) sum_n ( a_n v_n(k r) + f_n u_n(k r) )
// carries outgoing power |f|^2 / 2. Regular waves v_n use j_l, outgoing waves u_n use
// h_l^(2) = j_l - i y_l (time dependence exp(+i omega t)). Angular parts
//   A1 = grad_S Y x r_hat / sqrt(l(l+1)),  A2 = grad_S Y / sqrt(l(l+1)),  A3 = r_hat Y
// with Y the orthonormal real spherical harmonic (cos(m phi) for m > 0, sin(|m| phi) for m < 0,
// no Condon-Shortley phase).
//   TE: v = j_l(kr) A1
//   TM: v = (kr j_l(kr))' / (kr) A2 + sqrt(l(l+1)) j_l(kr) / (kr) A3

#include <complex>
#include <compare>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace subcm {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

enum class Polarization { TE = 0, TM = 1 };

/// (l, m, pol) with l >= 1 and |m| <= l. Ordered by l, then m, then TE before TM.
struct WaveIndex {
  int l = 1;
  int m = 0;
  Polarization pol = Polarization::TE;

  friend bool operator==(const WaveIndex&, const WaveIndex&) = default;
  friend std::strong_ordering operator<=>(const WaveIndex& a, const WaveIndex& b) {
    if (auto c = a.l <=> b.l; c != 0) return c;
    if (auto c = a.m <=> b.m; c != 0) return c;
    return static_cast<int>(a.pol) <=> static_cast<int>(b.pol);
  }
};

enum class WaveConvention { PowerNormalizedReal };

/// Ordered set of spherical wave indices. Either the full set up to l_max or a
/// subset of it (e.g. the parity-filtered waves of a ground-plane problem).
class WaveBasis {
 public:
  WaveBasis() = default;

  /// All (l, m, pol) with 1 <= l <= l_max, canonical order.
  static WaveBasis full(int l_max);

  /// Subset selected by positions into this basis (kept in the given order).
  WaveBasis subset(std::span<const int> positions) const;

  int l_max() const noexcept { return l_max_; }
  int size() const noexcept { return static_cast<int>(indices_.size()); }
  bool is_full() const noexcept { return full_; }
  WaveConvention convention() const noexcept { return WaveConvention::PowerNormalizedReal; }
  const WaveIndex& operator[](int i) const { return indices_[static_cast<std::size_t>(i)]; }
  const std::vector<WaveIndex>& indices() const noexcept { return indices_; }

  /// Position of idx in this basis, if present.
  std::optional<int> find(const WaveIndex& idx) const;

  friend bool operator==(const WaveBasis& a, const WaveBasis& b) {
    return a.l_max_ == b.l_max_ && a.indices_ == b.indices_;
  }

 private:
  int l_max_ = 0;
  bool full_ = false;
  std::vector<WaveIndex> indices_;
};

/// l_max = ceil(ka + 7 (ka)^(1/3) + 3), at least 1.
int truncation_order(double ka);

/// Canonical full basis; size 2 l_max (l_max + 2).
WaveBasis basis(int l_max);

/// Position of a wave in the canonical full ordering.
int canonical_position(const WaveIndex& idx);

/// Regular wave v_idx(k r). Real for real k.
Vec3 regular_wave_field(const WaveIndex& idx, double k, const Vec3& point);

/// Outgoing wave u_idx(k r) (h_l^(2) radial dependence). Singular at the origin.
CVec3 outgoing_wave_field(const WaveIndex& idx, double k, const Vec3& point);

/// All regular waves of a basis at one point, one column per wave.
Eigen::Matrix3Xd regular_wave_fields(const WaveBasis& basis, double k, const Vec3& point);

/// All outgoing waves of a basis at one point, one column per wave.
Eigen::Matrix3Xcd outgoing_wave_fields(const WaveBasis& basis, double k, const Vec3& point);

/// Waves compatible with a PEC plane at z = 0: TE with l+m even, TM with l+m odd.
/// Returns positions into the basis, ascending.
std::vector<int> ground_plane_filter(const WaveBasis& basis);

struct FieldSample {
  Vec3 point;
  CVec3 value;
};

/// Gauss-Legendre (polar) x uniform (azimuth) product grid on a sphere about the origin.
struct SphereGrid {
  double radius = 0.0;
  int n_theta = 0;
  int n_phi = 0;
  std::vector<Vec3> points;       // n_theta * n_phi, theta-major
  std::vector<double> weights;    // solid-angle weights, sum 4 pi

  int size() const noexcept { return static_cast<int>(points.size()); }
};

SphereGrid make_sphere_grid(double radius, int n_theta, int n_phi);

/// Smallest grid that integrates products of waves up to l_max exactly.
SphereGrid minimal_sphere_grid(double radius, int l_max);

struct Projection {
  Eigen::VectorXcd coefficients;
  double residual = 0.0;  // relative L2 misfit of the reconstructed field on the grid
};

/// Regular-wave coefficients c with E ~ sum_n c_n v_n(k r) from samples on a grid.
/// `values` holds one field value per grid point.
Projection project_onto_regular(const SphereGrid& grid, std::span<const CVec3> values, double k,
                                const WaveBasis& basis);

/// Same, for FieldSample input; the sample points must be the grid points in grid order.
Projection project_onto_regular(const SphereGrid& grid, std::span<const FieldSample> samples, double k,
                                const WaveBasis& basis);

/// Batched projection. `values` is (3 * grid.size()) x ncols, rows ordered (point, xyz).
/// Returns basis.size() x ncols coefficients; residuals per column if requested.
Eigen::MatrixXcd project_onto_regular(const SphereGrid& grid, const Eigen::MatrixXcd& values, double k,
                                      const WaveBasis& basis, std::vector<double>* residuals);

}  // namespace subcm
