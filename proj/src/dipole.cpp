#include "subcm/dipole.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "subcm/errors.hpp"
#include "subcm/special.hpp"

namespace subcm {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kJ{0.0, 1.0};

const Eigen::Matrix3d& mirror_matrix() {
  static const Eigen::Matrix3d m = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  return m;
}

// (I + grad grad / k^2) j0(kR), the regular part of the Green's dyadic. Stable as R -> 0.
Eigen::Matrix3d regular_dyadic(const Vec3& d, double k) {
  const double R = d.norm();
  const double x = k * R;
  if (x < 1e-8) return (2.0 / 3.0) * Eigen::Matrix3d::Identity();
  const auto j = special::spherical_bessel_j(1, x);
  const Vec3 rh = d / R;
  return (j[0] - j[1] / x) * Eigen::Matrix3d::Identity() + (3.0 * j[1] / x - j[0]) * (rh * rh.transpose());
}

// j k eta G with the real part taken from the regular dyadic to avoid cancellation at small kR.
Eigen::Matrix3cd mutual_impedance(const Vec3& rp, const Vec3& rq, double k, double eta) {
  const Eigen::Matrix3cd g = dyadic_green(rp, rq, k);
  const Eigen::Matrix3d re = (k * k * eta / (4.0 * kPi)) * regular_dyadic(rp - rq, k);
  const Eigen::Matrix3d im = k * eta * g.real();
  return re.cast<cplx>() + kJ * im.cast<cplx>();
}

Eigen::Matrix3cd self_impedance(const Eigen::Matrix3d& alpha, double k, double eta) {
  const Eigen::Matrix3d inv = alpha.inverse();
  return (-kJ * (eta / k)) * inv.cast<cplx>() +
         cplx(k * k * eta / (6.0 * kPi)) * Eigen::Matrix3cd::Identity();
}

void check_k(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("wavenumber must be finite and positive");
}

}  // namespace

void DipoleScene::add(const Vec3& position, double alpha, Region r) {
  add(position, Eigen::Matrix3d(alpha * Eigen::Matrix3d::Identity()), r);
}

void DipoleScene::add(const Vec3& position, const Eigen::Matrix3d& alpha, Region r) {
  positions.push_back(position);
  polarizability.push_back(alpha);
  region.push_back(r);
}

int DipoleScene::count(Region r) const {
  int c = 0;
  for (auto x : region) c += (x == r) ? 1 : 0;
  return c;
}

double DipoleScene::radius() const {
  double r = 0.0;
  for (const auto& p : positions) r = std::max(r, p.norm());
  return r;
}

void DipoleScene::validate() const {
  const auto n = positions.size();
  if (polarizability.size() != n || region.size() != n) {
    throw ShapeError("dipole scene: positions, polarizabilities and regions differ in length");
  }
  const double scale = 1.0 + radius();
  for (std::size_t p = 0; p < n; ++p) {
    if (!positions[p].allFinite()) throw GeometryError("dipole " + std::to_string(p) + " has a non-finite position");
    const auto& a = polarizability[p];
    if (!a.allFinite() || (a - a.transpose()).norm() > 1e-12 * a.norm()) {
      throw DomainError("dipole " + std::to_string(p) + ": polarizability must be real symmetric");
    }
    Eigen::LLT<Eigen::Matrix3d> llt(a);
    if (llt.info() != Eigen::Success) {
      throw DomainError("dipole " + std::to_string(p) + ": polarizability must be positive definite");
    }
    if (ground_plane && !(positions[p].z() > 0.0)) {
      throw GeometryError("dipole " + std::to_string(p) + " is not above the ground plane (z must be > 0)");
    }
    for (std::size_t q = 0; q < p; ++q) {
      if ((positions[p] - positions[q]).norm() <= 1e-12 * scale) {
        throw GeometryError("dipoles " + std::to_string(q) + " and " + std::to_string(p) + " coincide");
      }
    }
  }
  for (std::size_t i = 0; i < ports.size(); ++i) {
    const auto& pt = ports[i];
    const std::string tag = "port " + std::to_string(i);
    if (pt.dipole < 0 || pt.dipole >= size()) throw DomainError(tag + ": dipole index out of range");
    if (pt.axis < 0 || pt.axis > 2) throw DomainError(tag + ": axis must be 0, 1 or 2");
    if (!(pt.z0 > 0.0) || !std::isfinite(pt.z0)) throw DomainError(tag + ": z0 must be positive");
    if (!(pt.length > 0.0) || !std::isfinite(pt.length)) throw DomainError(tag + ": length must be positive");
    if (region[static_cast<std::size_t>(pt.dipole)] != Region::Controllable) {
      throw DomainError(tag + ": port element must belong to the controllable region");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (ports[j].dipole == pt.dipole && ports[j].axis == pt.axis) throw DomainError(tag + ": duplicate port");
    }
  }
}

Eigen::Matrix3cd dyadic_green(const Vec3& r, const Vec3& r_src, double k) {
  const Vec3 d = r - r_src;
  const double R = d.norm();
  if (!(R > 0.0)) throw GeometryError("dyadic Green's function evaluated at coincident points");
  const double x = k * R;
  const cplx g = std::exp(-kJ * x) / (4.0 * kPi * R);
  const Vec3 rh = d / R;
  const cplx c1 = 1.0 - kJ / x - 1.0 / (x * x);
  const cplx c2 = 1.0 - 3.0 * kJ / x - 3.0 / (x * x);
  return g * (c1 * Eigen::Matrix3cd::Identity() - c2 * (rh * rh.transpose()).cast<cplx>());
}

Eigen::MatrixXcd BlockImpedance::t0() const {
  if (t_background) return *t_background;
  return Eigen::MatrixXcd::Zero(wave_dim(), wave_dim());
}

WaveBasis scene_basis(const DipoleScene& scene, double k) {
  check_k(k);
  return basis(truncation_order(std::max(k * scene.radius(), 1e-3)));
}

BlockImpedance assemble_impedance(const DipoleScene& scene, double k) {
  return assemble_impedance(scene, k, scene_basis(scene, k));
}

Eigen::MatrixXd assemble_projection(const DipoleScene& scene, double k, const WaveBasis& basis) {
  check_k(k);
  const double scale = k * std::sqrt(kEta0);
  Eigen::MatrixXd u(basis.size(), 3 * scene.size());
  for (int p = 0; p < scene.size(); ++p) {
    const Eigen::Matrix3Xd v = regular_wave_fields(basis, k, scene.positions[static_cast<std::size_t>(p)]);
    u.middleCols(3 * p, 3) = scale * v.transpose();
  }
  return u;
}

BlockImpedance assemble_impedance(const DipoleScene& scene, double k, const WaveBasis& basis) {
  check_k(k);
  scene.validate();
  const int N = scene.size();
  const double eta = kEta0;
  const auto& M = mirror_matrix();

  // Unknown order: background dipoles first, controllable after, three axes each.
  std::vector<int> order;
  for (int p = 0; p < N; ++p)
    if (scene.region[static_cast<std::size_t>(p)] == Region::Background) order.push_back(p);
  const int nbd = static_cast<int>(order.size());
  for (int p = 0; p < N; ++p)
    if (scene.region[static_cast<std::size_t>(p)] == Region::Controllable) order.push_back(p);

  BlockImpedance b;
  b.k = k;
  b.basis = basis;
  b.port_count = static_cast<int>(scene.ports.size());
  b.nb = 3 * nbd;
  b.nc = 3 * (N - nbd);
  b.z.resize(3 * N, 3 * N);
  b.u = Eigen::MatrixXcd::Zero(basis.size() + b.port_count, 3 * N);
  b.dipole_of_unknown.resize(static_cast<std::size_t>(3 * N));
  b.axis_of_unknown.resize(static_cast<std::size_t>(3 * N));

  for (int i = 0; i < N; ++i) {
    const int p = order[static_cast<std::size_t>(i)];
    const Vec3& rp = scene.positions[static_cast<std::size_t>(p)];
    for (int a = 0; a < 3; ++a) {
      b.dipole_of_unknown[static_cast<std::size_t>(3 * i + a)] = p;
      b.axis_of_unknown[static_cast<std::size_t>(3 * i + a)] = a;
    }
    for (int j = 0; j <= i; ++j) {
      const int q = order[static_cast<std::size_t>(j)];
      const Vec3& rq = scene.positions[static_cast<std::size_t>(q)];
      Eigen::Matrix3cd blk = (i == j) ? self_impedance(scene.polarizability[static_cast<std::size_t>(p)], k, eta)
                                      : mutual_impedance(rp, rq, k, eta);
      if (scene.ground_plane) blk -= mutual_impedance(rp, M * rq, k, eta) * M.cast<cplx>();
      b.z.block<3, 3>(3 * i, 3 * j) = blk;
      if (i != j) b.z.block<3, 3>(3 * j, 3 * i) = blk.transpose();
    }
  }
  // Exact symmetry despite rounding in the image terms.
  b.z = (0.5 * (b.z + b.z.transpose())).eval();

  const double scale = k * std::sqrt(eta);
  for (int i = 0; i < N; ++i) {
    const int p = order[static_cast<std::size_t>(i)];
    const Vec3& rp = scene.positions[static_cast<std::size_t>(p)];
    Eigen::Matrix3Xd v = regular_wave_fields(basis, k, rp);
    if (scene.ground_plane) {
      v = (v - M * regular_wave_fields(basis, k, M * rp)) / std::numbers::sqrt2;
    }
    b.u.block(0, 3 * i, basis.size(), 3) = (scale * v.transpose()).cast<cplx>();
  }

  for (int q = 0; q < b.port_count; ++q) {
    const auto& pt = scene.ports[static_cast<std::size_t>(q)];
    int i = 0;
    while (order[static_cast<std::size_t>(i)] != pt.dipole) ++i;
    const int col = 3 * i + pt.axis;
    b.z(col, col) += pt.z0 / (pt.length * pt.length);
    b.u(basis.size() + q, col) = std::sqrt(pt.z0) / pt.length;
  }
  return b;
}

double factorization_residual(const BlockImpedance& blocks) {
  const Eigen::MatrixXcd re = 0.5 * (blocks.z + blocks.z.adjoint());
  const double nrm = re.norm();
  if (nrm == 0.0) return 0.0;
  return (re - blocks.u.adjoint() * blocks.u).norm() / nrm;
}

Eigen::MatrixXcd solve_checked(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& rhs, const char* what) {
  if (a.rows() == 0) return Eigen::MatrixXcd::Zero(0, rhs.cols());
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const double rc = lu.rcond();
  if (!(rc > 1e-14) || !std::isfinite(rc)) throw LinearSolveError(std::string(what) + " is numerically singular", rc);
  return lu.solve(rhs);
}

TransitionSet transition(const BlockImpedance& blocks) {
  TransitionSet out;
  const Eigen::MatrixXcd t0 = blocks.t0();
  const Eigen::MatrixXcd x = solve_checked(blocks.z, blocks.u.transpose(), "impedance matrix Z");
  Eigen::MatrixXcd t = t0 - blocks.u * x;
  Eigen::MatrixXcd tb = t0;
  if (blocks.nb > 0) {
    const Eigen::MatrixXcd ub = blocks.ub();
    const Eigen::MatrixXcd xb = solve_checked(blocks.zbb(), ub.transpose(), "background block Z_bb");
    tb -= ub * xb;
  }
  out.t = OperatorMatrix{OperatorKind::T, blocks.basis, blocks.port_count, std::move(t)};
  out.t_b = OperatorMatrix{OperatorKind::T, blocks.basis, blocks.port_count, std::move(tb)};
  out.s = s_from_t(out.t);
  out.s_b = s_from_t(out.t_b);
  return out;
}

TransitionSet transition(const DipoleScene& scene, double k) { return transition(assemble_impedance(scene, k)); }

OperatorMatrix generalized_scattering(const DipoleScene& scene, double k) {
  return transition(assemble_impedance(scene, k)).s;
}

MirroredScene mirror_scene(const DipoleScene& scene) {
  if (!scene.ground_plane) throw DomainError("mirror_scene: scene has no ground plane");
  if (!scene.ports.empty()) throw DomainError("mirror_scene: ports are not mirrored");
  scene.validate();
  const auto& M = mirror_matrix();
  MirroredScene out;
  out.scene.ground_plane = false;
  const int N = scene.size();
  for (int p = 0; p < N; ++p) {
    const auto i = static_cast<std::size_t>(p);
    out.scene.add(scene.positions[i], scene.polarizability[i], scene.region[i]);
  }
  for (int p = 0; p < N; ++p) {
    const auto i = static_cast<std::size_t>(p);
    out.scene.add(M * scene.positions[i], Eigen::Matrix3d(M * scene.polarizability[i] * M), scene.region[i]);
  }
  out.image_of.resize(static_cast<std::size_t>(2 * N));
  for (int p = 0; p < N; ++p) {
    out.image_of[static_cast<std::size_t>(p)] = p + N;
    out.image_of[static_cast<std::size_t>(p + N)] = p;
  }
  return out;
}

}  // namespace subcm
