#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "subcm/dipole.hpp"
#include "subcm/errors.hpp"
#include "support/scenes.hpp"

using namespace subcm;
using subcm::testing::random_scene;
using subcm::testing::SceneOptions;

TEST_CASE("single dipole radiation matrix factors through degree-1 waves") {
  DipoleScene scene;
  scene.add(Vec3(0.1, -0.2, 0.05), 1e-3);
  const double k = 2.0;
  const auto b = assemble_impedance(scene, k);
  CHECK(factorization_residual(b) < 1e-10);
  // A dipole at the origin only touches the l = 1 rows.
  DipoleScene origin;
  origin.add(Vec3::Zero(), 1e-3);
  const auto u = assemble_projection(origin, k, basis(4));
  for (int n = 0; n < u.rows(); ++n) {
    if (basis(4)[n].l > 1) CHECK(u.row(n).norm() == 0.0);
  }
  const auto bo = assemble_impedance(origin, k);
  CHECK(factorization_residual(bo) < 1e-12);
}

TEST_CASE("reciprocity and positive radiation") {
  std::mt19937_64 rng(7);
  const auto scene = random_scene(rng, {3, 2, 0.3, 0.1, true});
  const double k = 0.5 / 0.3;
  const auto b = assemble_impedance(scene, k);
  CHECK((b.z - b.z.transpose()).norm() == 0.0);
  const Eigen::MatrixXcd re = 0.5 * (b.z + b.z.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(re);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12 * b.z.norm());
  CHECK(b.u.imag().norm() == 0.0);
}

TEST_CASE("dyadic Green's function is symmetric and translation invariant") {
  const Vec3 a(0.1, 0.2, -0.3), c(-0.4, 0.5, 0.2);
  const auto g1 = dyadic_green(a, c, 3.0);
  const auto g2 = dyadic_green(c, a, 3.0);
  CHECK((g1 - g1.transpose()).norm() < 1e-14 * g1.norm());
  CHECK((g1 - g2).norm() < 1e-14 * g1.norm());
  CHECK_THROWS_AS(dyadic_green(a, a, 3.0), GeometryError);
}

TEST_CASE("factorization of the radiation matrix on a 20-dipole cloud") {
  std::mt19937_64 rng(11);
  for (double ka : {0.3, 1.0, 2.0}) {
    const auto scene = random_scene(rng, {10, 10, 1.0, 0.08, true});
    const auto b = assemble_impedance(scene, ka);
    CHECK(factorization_residual(b) < 1e-8);
  }
}

TEST_CASE("transition matrices of a lossless cloud") {
  std::mt19937_64 rng(3);
  const auto scene = random_scene(rng, {10, 10, 1.0, 0.08, false});
  const auto ts = transition(scene, 1.2);
  CHECK(check_unitary(ts.s).deviation < 1e-8);
  CHECK(check_unitary(ts.s_b).deviation < 1e-8);
  CHECK(check_t_power(ts.t).deviation < 1e-8);
  CHECK(check_t_power(ts.t_b).deviation < 1e-8);
  CHECK((ts.t.data - ts.t.data.transpose()).norm() < 1e-10 * ts.t.data.norm());

  // No background: S_b = I.
  auto all_c = scene;
  for (auto& r : all_c.region) r = Region::Controllable;
  const auto tc = transition(all_c, 1.2);
  CHECK(tc.t_b.data.norm() == 0.0);
  // No controllable region: T = T_b.
  auto all_b = scene;
  for (auto& r : all_b.region) r = Region::Background;
  const auto tb = transition(all_b, 1.2);
  CHECK((tb.t.data - tb.t_b.data).norm() < 1e-12 * tb.t.data.norm());
}

TEST_CASE("scene validation") {
  DipoleScene s;
  s.add(Vec3(0, 0, 0.1), 1e-3);
  s.add(Vec3(0, 0, 0.1), 1e-3);
  CHECK_THROWS_AS(assemble_impedance(s, 1.0), GeometryError);
  DipoleScene t;
  t.add(Vec3(0, 0, 0.1), -1e-3);
  CHECK_THROWS_AS(assemble_impedance(t, 1.0), DomainError);
  DipoleScene g;
  g.add(Vec3(0, 0, 0.0), 1e-3);
  g.ground_plane = true;
  CHECK_THROWS_AS(assemble_impedance(g, 1.0), GeometryError);
  CHECK_THROWS_AS(mirror_scene(g), GeometryError);
  DipoleScene p;
  p.add(Vec3(0, 0, 0.1), 1e-3);
  p.ports.push_back({0, 2, -50.0, 1.0});
  CHECK_THROWS_AS(assemble_impedance(p, 1.0), DomainError);
  CHECK_THROWS_AS(assemble_impedance(s, 0.0), DomainError);
}

TEST_CASE("generalized scattering matrix with ports") {
  std::mt19937_64 rng(5);
  auto scene = random_scene(rng, {6, 4, 0.5, 0.1, false});
  const double k = 2.0;
  const auto plain = transition(scene, k).s;
  CHECK((generalized_scattering(scene, k).data - plain.data).norm() == 0.0);

  scene.ports.push_back({5, 2, 73.0, 0.05});
  scene.ports.push_back({8, 0, 50.0, 0.05});
  const auto sg = generalized_scattering(scene, k);
  CHECK(sg.port_count == 2);
  CHECK(sg.dim() == plain.dim() + 2);
  CHECK(check_unitary(sg).deviation < 1e-8);
  CHECK((sg.data - sg.data.transpose()).norm() < 1e-10);
}

TEST_CASE("image construction") {
  DipoleScene v;
  v.ground_plane = true;
  v.add(Vec3(0, 0, 0.2), 1e-3);
  const auto m = mirror_scene(v);
  REQUIRE(m.scene.size() == 2);
  CHECK((m.scene.positions[1] - Vec3(0, 0, -0.2)).norm() == 0.0);
  CHECK(m.image_of[0] == 1);

  // Symmetric excitation of the explicit mirrored scene: the image carries -M x.
  std::mt19937_64 rng(9);
  auto scene = random_scene(rng, {3, 0, 0.5, 0.1, true, 0.2});
  scene.ground_plane = true;
  const auto mir = mirror_scene(scene);
  const double k = 2.5;
  const auto wb = scene_basis(mir.scene, k);
  const auto blocks = assemble_impedance(mir.scene, k, wb);
  const auto keep = ground_plane_filter(wb);
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(wb.size());
  for (int i : keep) a(i) = cplx(std::cos(i), std::sin(0.3 * i));
  const Eigen::VectorXcd x = blocks.z.partialPivLu().solve(blocks.u.transpose() * a);
  const Eigen::Matrix3d M = Vec3(1, 1, -1).asDiagonal();
  const int N = scene.size();
  for (int p = 0; p < N; ++p) {
    // Unknowns are ordered by dipole index here (single region).
    const Eigen::Vector3cd xp = x.segment(3 * p, 3);
    const Eigen::Vector3cd xi = x.segment(3 * (p + N), 3);
    CHECK((xi + M * xp).norm() < 1e-10 * xp.norm());
  }

  // Forbidden-parity coupling of the mirrored scene's S vanishes.
  const auto ts = transition(blocks);
  std::vector<int> drop;
  for (int i = 0; i < wb.size(); ++i)
    if (std::find(keep.begin(), keep.end(), i) == keep.end()) drop.push_back(i);
  double cross = 0.0;
  for (int i : keep)
    for (int j : drop) cross = std::max({cross, std::abs(ts.s.data(i, j)), std::abs(ts.s.data(j, i))});
  CHECK(cross < 1e-10 * ts.s.data.norm());

  // Folded half-space system reproduces the mirrored scene on the allowed waves.
  const auto half = assemble_impedance(scene, k, wb);
  CHECK(factorization_residual(half) < 1e-10);
  const auto th = transition(half);
  double diff = 0.0;
  for (int i : keep)
    for (int j : keep) diff = std::max(diff, std::abs(th.t.data(i, j) - ts.t.data(i, j)));
  CHECK(diff < 1e-10 * ts.t.data.norm());
}
