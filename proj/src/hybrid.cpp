#include "subcm/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "subcm/errors.hpp"

namespace subcm {

namespace {

// Degrees whose content at r_fit must be resolved so that aliasing stays below ~1e-13.
int tail_degree(double ratio, int l_max) {
  const int extra = static_cast<int>(std::ceil(std::log(1e-13) / std::log(ratio)));
  return l_max + std::clamp(extra, 8, 4 * l_max + 120);
}

Eigen::MatrixXcd project_dipoles(const DipoleScene& scene, double k, const WaveBasis& basis, double r_fit,
                                 int n_theta, int n_phi) {
  const auto grid = make_sphere_grid(r_fit, n_theta, n_phi);
  const int n = scene.size();
  const cplx field_scale = cplx(0.0, -k * kEta0);  // E = -j k eta G p
  Eigen::MatrixXcd values(3 * grid.size(), 3 * n);
  for (int g = 0; g < grid.size(); ++g) {
    const Vec3& r = grid.points[static_cast<std::size_t>(g)];
    for (int p = 0; p < n; ++p) {
      values.block<3, 3>(3 * g, 3 * p) = field_scale * dyadic_green(r, scene.positions[static_cast<std::size_t>(p)], k);
    }
  }
  const Eigen::MatrixXcd c = project_onto_regular(grid, values, k, basis, nullptr);
  return -c / (k * std::sqrt(kEta0));
}

}  // namespace

double HybridScene::clearance() const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : mom_scene.positions) d = std::min(d, p.norm());
  return d - sphere.radius;
}

void HybridScene::validate() const {
  sphere.validate();
  mom_scene.validate();
  if (mom_scene.ground_plane) throw DomainError("hybrid scene: ground plane is not supported");
  if (!mom_scene.ports.empty()) throw DomainError("hybrid scene: ports are not supported");
  if (mom_scene.size() > 0 && !(clearance() > 0.0)) {
    throw GeometryError("hybrid scene: every dipole must lie strictly outside the sphere");
  }
}

WaveBasis hybrid_basis(const HybridScene& scene, double k) {
  const double r = std::max(scene.sphere.radius, scene.mom_scene.size() > 0 ? scene.mom_scene.radius() : 0.0);
  return basis(truncation_order(std::max(k * r, 1e-3)));
}

U4Projection assemble_u4(const HybridScene& scene, double k, const WaveBasis& basis) {
  scene.validate();
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("assemble_u4: wavenumber must be finite and positive");
  U4Projection out;
  const int n = scene.mom_scene.size();
  out.u4 = Eigen::MatrixXcd::Zero(basis.size(), 3 * n);
  out.residual.assign(static_cast<std::size_t>(3 * n), 0.0);
  if (n == 0) return out;
  const double a = scene.sphere.radius;
  const double d = a + scene.clearance();
  const double base = std::sqrt(a * d);
  const int l_max = basis.l_max();

  // Nudge r_fit inside (a, d) when it sits on a zero of some j_l.
  for (double shift : {1.0, 0.97, 1.03, 0.94, 1.06}) {
    const double r_fit = base * shift;
    if (!(r_fit > a && r_fit < d)) continue;
    const int tail = tail_degree(r_fit / d, l_max);
    const int n_theta = (l_max + tail) / 2 + 2;
    const int n_phi = l_max + tail + 2;
    try {
      const Eigen::MatrixXcd c1 = project_dipoles(scene.mom_scene, k, basis, r_fit, n_theta, n_phi);
      const Eigen::MatrixXcd c2 = project_dipoles(scene.mom_scene, k, basis, r_fit, n_theta + 6, n_phi + 12);
      for (int j = 0; j < 3 * n; ++j) {
        const double nrm = c2.col(j).norm();
        out.residual[static_cast<std::size_t>(j)] = nrm > 0.0 ? (c1.col(j) - c2.col(j)).norm() / nrm : 0.0;
      }
      out.u4 = c2;
      out.r_fit = r_fit;
    } catch (const ResolutionError&) {
      continue;
    }
    const double worst = *std::max_element(out.residual.begin(), out.residual.end());
    if (worst > 1e-6) {
      throw ResolutionError("assemble_u4: projection residual " + std::to_string(worst) +
                            " exceeds 1e-6; the dipoles are too close to the sphere");
    }
    return out;
  }
  throw ResolutionError("assemble_u4: no fitting radius avoids the zeros of the radial functions");
}

BlockImpedance hybrid_blocks(const HybridScene& scene, double k) { return hybrid_blocks(scene, k, hybrid_basis(scene, k)); }

BlockImpedance hybrid_blocks(const HybridScene& scene, double k, const WaveBasis& basis) {
  scene.validate();
  const Eigen::MatrixXcd t1 = mie_tmatrix(scene.sphere, k, basis).data;
  if (scene.mom_scene.size() == 0) {
    BlockImpedance b;
    b.k = k;
    b.basis = basis;
    b.t_background = t1;
    b.u = Eigen::MatrixXcd::Zero(basis.size(), 0);
    b.z = Eigen::MatrixXcd::Zero(0, 0);
    return b;
  }
  BlockImpedance b = assemble_impedance(scene.mom_scene, k, basis);
  const auto proj = assemble_u4(scene, k, basis);
  // Reorder U4 columns to the block unknown order.
  Eigen::MatrixXcd u4(basis.size(), b.n());
  for (int i = 0; i < b.n(); ++i) {
    u4.col(i) = proj.u4.col(3 * b.dipole_of_unknown[static_cast<std::size_t>(i)] +
                            b.axis_of_unknown[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXcd t1u4 = t1 * u4;
  b.z += u4.transpose() * t1u4;
  b.z = (0.5 * (b.z + b.z.transpose())).eval();
  b.u += t1u4;
  b.t_background = t1;
  return b;
}

ModeSet hybrid_impedance_modes(const HybridScene& scene, double k, const ModeOptions& opts) {
  const auto blocks = hybrid_blocks(scene, k);
  ModeSet m = cm_impedance_substructure(blocks, opts);
  m.frequency = k * kSpeedOfLight / (2.0 * std::numbers::pi);
  return m;
}

ModeSet hybrid_scattering_modes(const HybridScene& scene, double k, const ModeOptions& opts) {
  const auto blocks = hybrid_blocks(scene, k);
  const auto ts = transition(blocks);
  ModeSet m = cm_scattering(ts.s, ts.s_b, opts);
  m.frequency = k * kSpeedOfLight / (2.0 * std::numbers::pi);
  m.add_diagnostic("unitarity_deviation", check_unitary(ts.s).deviation);
  m.add_diagnostic("factorization_residual", factorization_residual(blocks));
  return m;
}

}  // namespace subcm
