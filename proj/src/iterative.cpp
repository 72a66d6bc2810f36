#include "subcm/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "subcm/errors.hpp"

namespace subcm {

namespace {

Eigen::VectorXcd random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) {
    const double re = g(rng);
    v(i) = cplx(re, g(rng));
  }
  return v;
}

Eigen::VectorXcd call(const ScatterOracle::Apply& f, const Eigen::VectorXcd& x, int dim, const char* what) {
  Eigen::VectorXcd y = f(x);
  if (y.size() != dim) throw ShapeError(std::string("scatter oracle (") + what + ") returned a vector of wrong length");
  return y;
}

// Operator with eigenvalues t: the T-form composition itself, or (S_b^H S - I)/2.
Eigen::VectorXcd t_operator(const ScatterOracle& o, const Eigen::VectorXcd& a) {
  Eigen::VectorXcd y = composed_matvec(o, a);
  if (o.kind == OracleForm::SForm) y = 0.5 * (y - a);
  return y;
}

}  // namespace

ScatterOracle dense_oracle(const OperatorMatrix& m, const OperatorMatrix& m_b) {
  if (m.dim() != m_b.dim()) throw ShapeError("dense_oracle: operators differ in dimension");
  if (m.kind != m_b.kind || (m.kind != OperatorKind::S && m.kind != OperatorKind::T)) {
    throw ShapeError("dense_oracle: operators must both be S or both be T");
  }
  auto full = std::make_shared<const Eigen::MatrixXcd>(m.data);
  auto back = std::make_shared<const Eigen::MatrixXcd>(m_b.data);
  ScatterOracle o;
  o.apply = [full](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return *full * x; };
  o.apply_background = [back](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return *back * x; };
  o.kind = m.kind == OperatorKind::S ? OracleForm::SForm : OracleForm::TForm;
  o.dim = m.dim();
  o.basis = m.basis;
  o.port_count = m.port_count;
  return o;
}

OracleReport validate_oracle(const ScatterOracle& oracle, std::uint64_t seed, double tol, int probes) {
  if (!oracle.apply || !oracle.apply_background) throw PreconditionError("scatter oracle has no callback");
  if (oracle.dim <= 0) throw ShapeError("scatter oracle dimension must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  OracleReport r;
  for (const auto* f : {&oracle.apply, &oracle.apply_background}) {
    for (int p = 0; p < probes; ++p) {
      const Eigen::VectorXcd x = random_vector(rng, oracle.dim);
      const Eigen::VectorXcd y = random_vector(rng, oracle.dim);
      const cplx alpha(u(rng), u(rng)), beta(u(rng), u(rng));
      const Eigen::VectorXcd fx = call(*f, x, oracle.dim, "probe");
      const Eigen::VectorXcd fy = call(*f, y, oracle.dim, "probe");
      const Eigen::VectorXcd fxy = call(*f, alpha * x + beta * y, oracle.dim, "probe");
      const double scale = std::abs(alpha) * fx.norm() + std::abs(beta) * fy.norm();
      if (scale > 0.0) r.linearity = std::max(r.linearity, (fxy - alpha * fx - beta * fy).norm() / scale);
      else r.linearity = std::max(r.linearity, fxy.norm());
      const double sscale = std::max(fx.norm() * y.norm(), fy.norm() * x.norm());
      if (sscale > 0.0) r.symmetry = std::max(r.symmetry, std::abs(y.cwiseProduct(fx).sum() - x.cwiseProduct(fy).sum()) / sscale);
    }
  }
  r.pass = r.linearity < tol && r.symmetry < tol;
  return r;
}

Eigen::VectorXcd composed_matvec(const ScatterOracle& o, const Eigen::VectorXcd& a) {
  if (a.size() != o.dim) throw ShapeError("composed_matvec: vector length does not match the oracle");
  const Eigen::VectorXcd f1 = call(o.apply, a, o.dim, "full scene");
  if (o.kind == OracleForm::SForm) {
    return call(o.apply_background, f1.conjugate(), o.dim, "background").conjugate();
  }
  const Eigen::VectorXcd hat = (a + 2.0 * f1).conjugate();
  return f1 + call(o.apply_background, hat, o.dim, "background").conjugate();
}

IterationResult iterate(const ScatterOracle& oracle, const IterationOptions& opts) {
  const int n = oracle.dim;
  if (opts.n_modes < 1) throw DomainError("iterate: n_modes must be >= 1");
  if (n < opts.n_modes) throw ShapeError("iterate: oracle dimension is smaller than n_modes");
  if (opts.max_iter < 1) throw DomainError("iterate: max_iter must be >= 1");
  if (opts.validate) {
    const auto rep = validate_oracle(oracle, opts.seed ^ 0x5bd1e995ULL);
    if (!rep.pass) {
      throw PreconditionError("iterate: oracle is not linear and complex-symmetric (linearity " +
                              std::to_string(rep.linearity) + ", symmetry " + std::to_string(rep.symmetry) + ")");
    }
  }

  IterationResult out;
  const int max_m = std::min(opts.max_iter, n);
  Eigen::MatrixXcd q(n, max_m), f(n, max_m);
  Eigen::VectorXcd next;
  if (opts.start) {
    if (opts.start->size() != n) throw ShapeError("iterate: start vector has the wrong length");
    next = *opts.start;
  } else {
    std::mt19937_64 rng(opts.seed);
    next = random_vector(rng, n);
  }
  if (next.norm() == 0.0) throw DomainError("iterate: start vector is zero");

  double f1_norm = 0.0;
  double krylov = 1.0;
  std::vector<cplx> prev;
  int quiet = 0;
  int m = 0;
  Eigen::VectorXcd ritz_values;
  Eigen::MatrixXcd ritz_vectors;
  auto ritz = [&](int size) {
    const Eigen::MatrixXcd h = q.leftCols(size).adjoint() * f.leftCols(size);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw LinearSolveError("iterate: projected eigenproblem did not converge", 0.0);
    ritz_values = es.eigenvalues();
    ritz_vectors = es.eigenvectors();
  };

  while (m < max_m) {
    // Orthogonalize against the current basis (two MGS passes when needed), then normalize.
    Eigen::VectorXcd a = next;
    const double before = a.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (int p = 0; p < m; ++p) a -= q.col(p).dot(a) * q.col(p);
      if (m == 0 || a.norm() > 0.5 * before) break;
    }
    const double an = a.norm();
    if (an == 0.0) break;
    q.col(m) = a / an;
    f.col(m) = t_operator(oracle, q.col(m));
    out.oracle_calls += 2;
    if (m == 0) f1_norm = f.col(0).norm();
    ++m;

    IterationLogEntry e;
    e.m = m;
    {
      const Eigen::MatrixXcd qq = q.leftCols(m);
      Eigen::MatrixXcd g = qq.adjoint() * qq;
      g.diagonal().array() -= 1.0;
      e.orthogonality = g.cwiseAbs().maxCoeff();
    }
    if (f1_norm == 0.0) {
      // Zero operator: every estimate is t = 0.
      out.log.push_back(e);
      out.converged = true;
      break;
    }
    // a_{m+1} = f_m - P_m f_m
    next = f.col(m - 1);
    for (int p = 0; p < m; ++p) next -= q.col(p).dot(next) * q.col(p);
    e.residual = next.norm() / f1_norm;
    krylov *= next.norm();
    e.krylov_residual = krylov;

    ritz(m);
    std::vector<cplx> cur(ritz_values.data(), ritz_values.data() + ritz_values.size());
    std::stable_sort(cur.begin(), cur.end(), [](cplx x, cplx y) { return std::abs(x) > std::abs(y); });
    const int track = std::min<int>(opts.n_modes, static_cast<int>(cur.size()));
    if (static_cast<int>(prev.size()) >= track && track == opts.n_modes) {
      for (int i = 0; i < track; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        e.drift = std::max(e.drift, std::abs(cur[ui] - prev[ui]) / std::max(std::abs(cur[ui]), 1e-300));
      }
      quiet = e.drift < opts.tol_eig ? quiet + 1 : 0;
    } else {
      e.drift = 1.0;
    }
    prev = cur;
    out.log.push_back(e);
    if (e.residual < opts.tol_residual) {
      out.converged = true;
      break;
    }
    if (quiet >= opts.stagnation_window) {
      out.converged = true;
      break;
    }
  }

  ModeSet& ms = out.modes;
  ms.basis = oracle.basis;
  ms.port_count = oracle.port_count;
  ms.add_diagnostic("iterations", m);
  const int keep = std::min(opts.n_modes, n);
  if (f1_norm == 0.0 || m == 0) {
    ms.a = Eigen::MatrixXcd::Zero(n, keep);
    for (int i = 0; i < keep && i < m; ++i) ms.a.col(i) = q.col(i);
    for (int i = 0; i < keep; ++i) ms.eigen.push_back(eigen_from_t(0.0));
  } else {
    if (ritz_values.size() != m) ritz(m);
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return std::abs(ritz_values(x)) > std::abs(ritz_values(y)); });
    const int k = std::min(keep, m);
    ms.a = Eigen::MatrixXcd(n, k);
    for (int i = 0; i < k; ++i) {
      const int j = order[static_cast<std::size_t>(i)];
      Eigen::VectorXcd v = q.leftCols(m) * ritz_vectors.col(j);
      v.normalize();
      ms.a.col(i) = v;
      ms.eigen.push_back(eigen_from_t(ritz_values(j)));
    }
  }
  // f_n = S_b a_n with one background application per mode.
  ms.f = Eigen::MatrixXcd(n, ms.a.cols());
  for (Eigen::Index i = 0; i < ms.a.cols(); ++i) {
    const Eigen::VectorXcd y = call(oracle.apply_background, ms.a.col(i), n, "background");
    ms.f.col(i) = oracle.kind == OracleForm::SForm ? y : Eigen::VectorXcd(ms.a.col(i) + 2.0 * y);
    ++out.oracle_calls;
  }
  ms.cancellation_sensitive.assign(static_cast<std::size_t>(ms.size()), false);
  for (int i = 0; i < ms.size(); ++i)
    ms.cancellation_sensitive[static_cast<std::size_t>(i)] = std::abs(ms.eigen[static_cast<std::size_t>(i)].t) < 0.5e-6;

  out.state.m = m;
  out.state.basis_vectors = q.leftCols(m);
  out.state.responses = f.leftCols(m);
  out.state.eigen_estimates = prev;
  return out;
}

}  // namespace subcm
