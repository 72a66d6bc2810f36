#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "subcm/dipole.hpp"
#include "subcm/errors.hpp"
#include "subcm/iterative.hpp"
#include "subcm/modes.hpp"
#include "support/scenes.hpp"

using namespace subcm;
using subcm::testing::random_scene;

namespace {

Eigen::MatrixXcd random_unitary(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXcd m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  return qr.householderQ();
}

// U U^T is unitary and complex symmetric.
Eigen::MatrixXcd symmetric_unitary(std::mt19937_64& rng, int n) {
  const Eigen::MatrixXcd u = random_unitary(rng, n);
  return u * u.transpose();
}

OperatorMatrix op(OperatorKind kind, const Eigen::MatrixXcd& m) { return OperatorMatrix{kind, WaveBasis{}, static_cast<int>(m.rows()), m}; }

}  // namespace

TEST_CASE("composed products") {
  Eigen::MatrixXcd t1(1, 1), z1 = Eigen::MatrixXcd::Zero(1, 1);
  t1(0, 0) = -1.0;
  const auto o1 = dense_oracle(op(OperatorKind::T, t1), op(OperatorKind::T, z1));
  Eigen::VectorXcd a1(1);
  a1(0) = 1.0;
  CHECK(composed_matvec(o1, a1)(0) == cplx(-1.0));

  std::mt19937_64 rng(5);
  const int n = 20;
  const Eigen::MatrixXcd s = symmetric_unitary(rng, n);
  const Eigen::MatrixXcd sb = symmetric_unitary(rng, n);
  const Eigen::MatrixXcd t = 0.5 * (s - Eigen::MatrixXcd::Identity(n, n));
  const Eigen::MatrixXcd tb = 0.5 * (sb - Eigen::MatrixXcd::Identity(n, n));
  const auto os = dense_oracle(op(OperatorKind::S, s), op(OperatorKind::S, sb));
  const auto ot = dense_oracle(op(OperatorKind::T, t), op(OperatorKind::T, tb));
  const auto o0 = dense_oracle(op(OperatorKind::T, t), op(OperatorKind::T, Eigen::MatrixXcd::Zero(n, n)));
  const Eigen::MatrixXcd es = sb.adjoint() * s;
  const Eigen::MatrixXcd et = 2.0 * tb.adjoint() * t + tb.adjoint() + t;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int probe = 0; probe < 5; ++probe) {
    Eigen::VectorXcd a(n);
    for (int i = 0; i < n; ++i) a(i) = cplx(g(rng), g(rng));
    CHECK((composed_matvec(os, a) - es * a).norm() < 1e-12 * a.norm());
    CHECK((composed_matvec(ot, a) - et * a).norm() < 1e-12 * a.norm());
    CHECK((composed_matvec(o0, a) - t * a).norm() < 1e-13 * a.norm());
  }
  CHECK(validate_oracle(os).pass);
  CHECK_THROWS_AS(composed_matvec(os, Eigen::VectorXcd::Zero(3)), ShapeError);
}

TEST_CASE("oracle contract violations are detected") {
  std::mt19937_64 rng(6);
  const int n = 12;
  const Eigen::MatrixXcd u = random_unitary(rng, n);
  const Eigen::MatrixXcd sym = symmetric_unitary(rng, n);
  const auto bad = dense_oracle(op(OperatorKind::S, sym), op(OperatorKind::S, u));
  const auto rep = validate_oracle(bad);
  CHECK_FALSE(rep.pass);
  CHECK(rep.symmetry > 1e-3);
  CHECK_THROWS_AS(iterate(bad), PreconditionError);

  ScatterOracle nonlinear = dense_oracle(op(OperatorKind::S, sym), op(OperatorKind::S, sym));
  nonlinear.apply = [sym](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return sym * x + Eigen::VectorXcd::Constant(x.size(), cplx(1e-3));
  };
  CHECK(validate_oracle(nonlinear).linearity > 1e-6);
  CHECK_THROWS_AS(iterate(nonlinear), PreconditionError);

  ScatterOracle short_out = dense_oracle(op(OperatorKind::S, sym), op(OperatorKind::S, sym));
  short_out.apply = [](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return x.head(x.size() - 1); };
  CHECK_THROWS_AS(validate_oracle(short_out), ShapeError);
}

TEST_CASE("Krylov exactness on an invariant subspace") {
  const int n = 10;
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(n);
  d(0) = -1.0;
  d(1) = -0.5;
  d(2) = -0.1;
  const auto o = dense_oracle(op(OperatorKind::T, d.asDiagonal()), op(OperatorKind::T, Eigen::MatrixXcd::Zero(n, n)));
  IterationOptions opts;
  opts.n_modes = 3;
  opts.start = Eigen::VectorXcd::Zero(n);
  (*opts.start).head(3).setOnes();
  const auto r = iterate(o, opts);
  CHECK(r.converged);
  CHECK(r.state.m == 3);
  REQUIRE(r.modes.size() == 3);
  CHECK(std::abs(r.modes.eigen[0].t - cplx(-1.0)) < 1e-14);
  CHECK(std::abs(r.modes.eigen[1].t - cplx(-0.5)) < 1e-14);
  CHECK(std::abs(r.modes.eigen[2].t - cplx(-0.1)) < 1e-14);
}

TEST_CASE("zero operator terminates immediately") {
  const int n = 8;
  const Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(n, n);
  const auto r = iterate(dense_oracle(op(OperatorKind::T, z), op(OperatorKind::T, z)));
  CHECK(r.converged);
  CHECK(r.state.m == 1);
  REQUIRE(r.modes.size() == 5);
  for (const auto& e : r.modes.eigen) CHECK(e.t == cplx(0.0));
}

TEST_CASE("dominant modes of random scenes match the dense solver") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    const auto scene = random_scene(rng, {6 + trial, 5, 1.0, 0.1, trial % 2 == 1});
    const double k = 0.7 + 0.1 * trial;
    const auto ts = transition(scene, k);
    REQUIRE(ts.t.dim() <= 300);
    const auto dense = cm_t_form(ts.t, ts.t_b, Representation::Excitation);
    for (auto form : {OracleForm::TForm, OracleForm::SForm}) {
      const auto o = form == OracleForm::TForm ? dense_oracle(ts.t, ts.t_b) : dense_oracle(ts.s, ts.s_b);
      IterationOptions opts;
      opts.max_iter = 60;
      const auto r = iterate(o, opts);
      CHECK(r.converged);
      CHECK(r.state.m <= 60);
      REQUIRE(r.modes.size() == 5);
      for (int n = 0; n < 5; ++n) {
        const auto un = static_cast<std::size_t>(n);
        CHECK(std::abs(r.modes.eigen[un].modal_significance() - dense.eigen[un].modal_significance()) < 1e-6);
        CHECK(std::abs(r.modes.eigen[un].t - dense.eigen[un].t) < 1e-6);
      }
      CHECK((r.modes.f - ts.s_b.data * r.modes.a).norm() < 1e-10);
      double prev = 1.0;
      for (const auto& e : r.log) {
        CHECK(e.orthogonality < 1e-10);
        CHECK(e.krylov_residual <= prev + 1e-12);
        prev = e.krylov_residual;
      }
    }
  }
}

TEST_CASE("fixed seed gives identical runs") {
  std::mt19937_64 rng(88);
  const auto scene = random_scene(rng, {5, 5, 1.0, 0.1, false});
  const auto ts = transition(scene, 0.9);
  const auto o = dense_oracle(ts.t, ts.t_b);
  const auto r1 = iterate(o), r2 = iterate(o);
  REQUIRE(r1.state.m == r2.state.m);
  CHECK(r1.state.basis_vectors == r2.state.basis_vectors);
  for (int n = 0; n < r1.modes.size(); ++n)
    CHECK(r1.modes.eigen[static_cast<std::size_t>(n)].t == r2.modes.eigen[static_cast<std::size_t>(n)].t);
  IterationOptions other;
  other.seed = 7;
  CHECK_FALSE(iterate(o, other).state.basis_vectors == r1.state.basis_vectors);
}
