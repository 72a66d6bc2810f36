#include "subcm/modes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "subcm/errors.hpp"

namespace subcm {

namespace {

const cplx kJ{0.0, 1.0};

struct NormalEigen {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
  double offdiag = 0.0;  // strictly upper part of the Schur factor, relative
};

// Eigenpairs of a (numerically) normal matrix from its complex Schur form. The Schur
// vectors are orthonormal, so degenerate clusters come out orthonormalized.
NormalEigen schur_eigen(const Eigen::MatrixXcd& a) {
  NormalEigen out;
  if (a.rows() == 0) return out;
  Eigen::ComplexSchur<Eigen::MatrixXcd> cs(a);
  if (cs.info() != Eigen::Success) throw LinearSolveError("complex Schur decomposition did not converge", 0.0);
  const auto& r = cs.matrixT();
  out.values = r.diagonal();
  out.vectors = cs.matrixU();
  const double nr = std::max(1.0, r.norm());
  out.offdiag = r.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() / nr;
  return out;
}

// Normal matrix whose spectrum is mostly the trivial value `sigma`. The range of a - sigma I
// (rank-revealing QR) carries all nontrivial eigenpairs; the orthogonal complement gets
// eigenvalue sigma exactly. For dipole scenes the range is at most 3N wide, far below the
// wave dimension, so this replaces one large Schur form with a small one.
NormalEigen normal_eigen(const Eigen::MatrixXcd& a, cplx sigma) {
  const Eigen::Index n = a.rows();
  if (n == 0) return {};
  Eigen::MatrixXcd shifted = a;
  shifted.diagonal().array() -= sigma;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(shifted);
  const auto& rr = qr.matrixQR();
  const double r0 = std::abs(rr(0, 0));
  Eigen::Index rank = 0;
  while (rank < n && std::abs(rr(rank, rank)) > 1e-13 * std::max(1.0, r0)) ++rank;
  if (rank > n / 2) return schur_eigen(a);

  const Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd qr_ = q.leftCols(rank);
  const Eigen::MatrixXcd small = qr_.adjoint() * a * qr_;
  NormalEigen inner = schur_eigen(small);
  NormalEigen out;
  out.values = Eigen::VectorXcd::Constant(n, sigma);
  out.values.head(rank) = inner.values;
  out.vectors.resize(n, n);
  out.vectors.leftCols(rank) = qr_ * inner.vectors;
  out.vectors.rightCols(n - rank) = q.rightCols(n - rank);
  // Coupling left out by the truncation, relative like the Schur off-diagonal.
  const double leak = (shifted * q.rightCols(n - rank)).norm();
  out.offdiag = std::hypot(inner.offdiag, leak / std::max(1.0, a.norm()));
  return out;
}

// General eigenpairs with unit columns.
NormalEigen general_eigen(const Eigen::MatrixXcd& a) {
  NormalEigen out;
  if (a.rows() == 0) return out;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) throw LinearSolveError("eigen decomposition did not converge", 0.0);
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
    const double n = out.vectors.col(j).norm();
    if (n > 0.0) out.vectors.col(j) /= n;
  }
  return out;
}

// Groups of indices whose values lie within tol * (1 + |value|) of each other (chained).
std::vector<std::vector<int>> clusters(const Eigen::VectorXcd& values, double tol) {
  const int n = static_cast<int>(values.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (values(a).real() != values(b).real()) return values(a).real() < values(b).real();
    return values(a).imag() < values(b).imag();
  });
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::vector<std::vector<int>> out;
  for (int i : order) {
    if (used[static_cast<std::size_t>(i)]) continue;
    std::vector<int> group{i};
    used[static_cast<std::size_t>(i)] = true;
    for (std::size_t g = 0; g < group.size(); ++g) {
      for (int j : order) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const cplx vg = values(group[g]);
        if (std::abs(values(j) - vg) <= tol * (1.0 + std::abs(vg))) {
          group.push_back(j);
          used[static_cast<std::size_t>(j)] = true;
        }
      }
    }
    std::sort(group.begin(), group.end());
    out.push_back(std::move(group));
  }
  return out;
}

// Orthonormalize columns of `v` inside each cluster and apply the same change of basis to `w`.
void orthonormalize_clusters(const Eigen::VectorXcd& values, Eigen::MatrixXcd& v, Eigen::MatrixXcd* w,
                             double tol) {
  for (const auto& g : clusters(values, tol)) {
    if (g.size() < 2) continue;
    const Eigen::MatrixXcd vc = v(Eigen::all, g);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(vc);
    const Eigen::MatrixXcd r = qr.matrixQR().topRows(static_cast<Eigen::Index>(g.size()))
                                   .triangularView<Eigen::Upper>();
    if (std::abs(r.diagonal().prod()) < 1e-300 ||
        r.diagonal().cwiseAbs().minCoeff() < 1e-12 * r.diagonal().cwiseAbs().maxCoeff()) {
      continue;  // dependent vectors; leave the cluster alone
    }
    const Eigen::MatrixXcd rinv = r.inverse();
    v(Eigen::all, g) = vc * rinv;
    if (w) (*w)(Eigen::all, g) = (*w)(Eigen::all, g) * rinv;
  }
}

double l_centroid(const Eigen::VectorXcd& a, const WaveBasis& basis) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double w = std::norm(a(i));
    const double l = i < basis.size() ? basis[static_cast<int>(i)].l : 0.0;
    num += w * l;
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

void check_same_space(const OperatorMatrix& x, const OperatorMatrix& y, const char* what) {
  if (x.data.rows() != x.data.cols() || y.data.rows() != y.data.cols()) {
    throw ShapeError(std::string(what) + ": operators must be square");
  }
  if (x.dim() != y.dim() || x.port_count != y.port_count) {
    throw ShapeError(std::string(what) + ": operator dimensions differ");
  }
  if (!(x.basis == y.basis)) throw ShapeError(std::string(what) + ": operators use different bases");
  if (x.dim() != x.basis.size() + x.port_count) throw ShapeError(std::string(what) + ": operator does not match its basis");
}

void flag_cancellation(ModeSet& m, const Eigen::MatrixXcd& s, const Eigen::MatrixXcd& s_b, double tol) {
  m.cancellation_sensitive.assign(static_cast<std::size_t>(m.size()), false);
  for (int n = 0; n < m.size(); ++n) {
    const Eigen::VectorXcd sa = s * m.a.col(n);
    const Eigen::VectorXcd diff = sa - s_b * m.a.col(n);
    m.cancellation_sensitive[static_cast<std::size_t>(n)] = diff.norm() < tol * sa.norm();
  }
}

Eigen::MatrixXcd identity_plus_twice(const Eigen::MatrixXcd& t) {
  Eigen::MatrixXcd s = 2.0 * t;
  s.diagonal().array() += 1.0;
  return s;
}

}  // namespace

std::vector<cplx> ModeSet::t_values() const {
  std::vector<cplx> out;
  out.reserve(eigen.size());
  for (const auto& e : eigen) out.push_back(e.t);
  return out;
}

std::optional<double> ModeSet::diagnostic(const std::string& name) const {
  for (const auto& [k, v] : diagnostics)
    if (k == name) return v;
  return std::nullopt;
}

double orthonormality_deviation(const Eigen::MatrixXcd& v) {
  std::vector<int> nz;
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    if (v.col(j).norm() > 0.0) nz.push_back(static_cast<int>(j));
  if (nz.empty()) return 0.0;
  const Eigen::MatrixXcd vv = v(Eigen::all, nz);
  Eigen::MatrixXcd g = vv.adjoint() * vv;
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

void sort_modes(ModeSet& m) {
  const int n = m.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> mag(static_cast<std::size_t>(n)), cen(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    mag[static_cast<std::size_t>(i)] = std::abs(m.eigen[static_cast<std::size_t>(i)].t);
    const Eigen::VectorXcd v = (m.a.cols() == n && m.a.col(i).norm() > 0.0) ? Eigen::VectorXcd(m.a.col(i))
                                                                            : Eigen::VectorXcd(m.f.col(i));
    cen[static_cast<std::size_t>(i)] = l_centroid(v, m.basis);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return mag[static_cast<std::size_t>(a)] > mag[static_cast<std::size_t>(b)]; });
  // Ties in |t| (chained within 1e-10) are ordered by l content.
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s + 1;
    while (e < order.size() &&
           mag[static_cast<std::size_t>(order[e - 1])] - mag[static_cast<std::size_t>(order[e])] < 1e-10) {
      ++e;
    }
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(e),
                     [&](int a, int b) { return cen[static_cast<std::size_t>(a)] < cen[static_cast<std::size_t>(b)]; });
    s = e;
  }
  auto permute_cols = [&](Eigen::MatrixXcd& x) {
    if (x.cols() != n) return;
    x = Eigen::MatrixXcd(x(Eigen::all, order));
  };
  std::vector<EigenTriple> e2;
  std::vector<bool> c2;
  for (int i : order) {
    e2.push_back(m.eigen[static_cast<std::size_t>(i)]);
    if (static_cast<int>(m.cancellation_sensitive.size()) == n) c2.push_back(m.cancellation_sensitive[static_cast<std::size_t>(i)]);
  }
  m.eigen = std::move(e2);
  if (static_cast<int>(m.cancellation_sensitive.size()) == n) m.cancellation_sensitive = std::move(c2);
  permute_cols(m.a);
  permute_cols(m.f);
  if (m.currents) permute_cols(*m.currents);
  if (m.controllable_currents) permute_cols(*m.controllable_currents);
}

ModeSet cm_scattering(const OperatorMatrix& s, const OperatorMatrix& s_b, const ModeOptions& opts) {
  check_same_space(s, s_b, "cm_scattering");
  ModeSet m;
  m.basis = s.basis;
  m.port_count = s.port_count;
  const auto ub = check_unitary(s_b.data);
  const auto us = check_unitary(s.data);
  m.add_diagnostic("unitarity_s", us.deviation);
  m.add_diagnostic("unitarity_s_b", ub.deviation);

  NormalEigen ne;
  if (ub.deviation <= opts.unitary_tol) {
    ne = normal_eigen(s_b.data.adjoint() * s.data, cplx(1.0));
    m.add_diagnostic("schur_offdiag", ne.offdiag);
  } else {
    m.general_solver_fallback = true;
    ne = general_eigen(solve_checked(s_b.data, s.data, "background scattering matrix S_b"));
    orthonormalize_clusters(ne.values, ne.vectors, nullptr, opts.cluster_tol);
  }
  m.a = ne.vectors;
  for (Eigen::Index i = 0; i < ne.values.size(); ++i) m.eigen.push_back(eigen_maps(ne.values(i)));
  m.f = s_b.data * m.a;
  flag_cancellation(m, s.data, s_b.data, opts.cancellation_tol);
  sort_modes(m);
  return m;
}

ModeSet cm_t_form(const OperatorMatrix& t, const OperatorMatrix& t_b, Representation rep, const ModeOptions& opts) {
  check_same_space(t, t_b, "cm_t_form");
  ModeSet m;
  m.basis = t.basis;
  m.port_count = t.port_count;
  const Eigen::MatrixXcd tbh = t_b.data.adjoint();
  const Eigen::MatrixXcd op = rep == Representation::Excitation ? Eigen::MatrixXcd(2.0 * tbh * t.data + tbh + t.data)
                                                                : Eigen::MatrixXcd(2.0 * t.data * tbh + tbh + t.data);
  const Eigen::MatrixXcd sb = identity_plus_twice(t_b.data);
  const auto ub = check_unitary(sb);
  m.add_diagnostic("unitarity_s_b", ub.deviation);
  NormalEigen ne;
  if (ub.deviation <= opts.unitary_tol) {
    ne = normal_eigen(op, cplx(0.0));
    m.add_diagnostic("schur_offdiag", ne.offdiag);
  } else {
    m.general_solver_fallback = true;
    ne = general_eigen(op);
    orthonormalize_clusters(ne.values, ne.vectors, nullptr, opts.cluster_tol);
  }
  for (Eigen::Index i = 0; i < ne.values.size(); ++i) m.eigen.push_back(eigen_from_t(ne.values(i)));
  if (rep == Representation::Excitation) {
    m.a = ne.vectors;
    m.f = sb * m.a;
  } else {
    m.f = ne.vectors;
    m.a = sb.adjoint() * m.f;
  }
  flag_cancellation(m, identity_plus_twice(t.data), sb, opts.cancellation_tol);
  sort_modes(m);
  return m;
}

SchurSystem schur_system(const BlockImpedance& blocks) {
  SchurSystem sys;
  const Eigen::MatrixXcd zcc = blocks.zcc();
  const Eigen::MatrixXcd uc = blocks.uc();
  if (blocks.nb == 0) {
    sys.z_tilde = zcc;
    sys.u_tilde = uc;
  } else {
    const Eigen::MatrixXcd zbc = blocks.zbc();
    const Eigen::MatrixXcd x = solve_checked(blocks.zbb(), zbc, "background block Z_bb");
    const double nz = zbc.norm();
    sys.schur_residual = nz > 0.0 ? (blocks.zbb() * x - zbc).norm() / nz : 0.0;
    sys.z_tilde = zcc - blocks.zcb() * x;
    sys.u_tilde = uc - blocks.ub() * x;
  }
  sys.r_tilde = 0.5 * (sys.z_tilde + sys.z_tilde.adjoint());
  sys.x_tilde = (sys.z_tilde - sys.z_tilde.adjoint()) / (2.0 * kJ);
  const double nr = sys.r_tilde.norm();
  sys.factorization_residual = nr > 0.0 ? (sys.r_tilde - sys.u_tilde.adjoint() * sys.u_tilde).norm() / nr : 0.0;
  return sys;
}

ModeSet cm_impedance_substructure(const BlockImpedance& blocks, const ModeOptions& opts) {
  const SchurSystem sys = schur_system(blocks);
  ModeSet m;
  m.basis = blocks.basis;
  m.port_count = blocks.port_count;
  m.add_diagnostic("schur_factorization", sys.factorization_residual);
  const int nc = blocks.nc;
  if (nc == 0) {
    m.a.resize(blocks.wave_dim(), 0);
    m.f.resize(blocks.wave_dim(), 0);
    m.controllable_currents = Eigen::MatrixXcd(0, 0);
    m.currents = Eigen::MatrixXcd(blocks.n(), 0);
    return m;
  }

  if (sys.r_tilde.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> rs(sys.r_tilde, Eigen::EigenvaluesOnly);
    const double lo = rs.eigenvalues().minCoeff();
    const double hi = std::max(rs.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    m.add_diagnostic("r_tilde_min_eig", lo / hi);
    m.indefinite_radiation = lo < -1e-10 * hi;
  }

  // R~ I = -t Z~ I  <=>  (-Z~^-1 R~) I = t I.
  const Eigen::MatrixXcd op = -solve_checked(sys.z_tilde, sys.r_tilde, "Schur complement Z~");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op);
  if (es.info() != Eigen::Success) throw LinearSolveError("impedance eigenproblem did not converge", 0.0);
  Eigen::VectorXcd t = es.eigenvalues();
  Eigen::MatrixXcd ic = es.eigenvectors();
  Eigen::MatrixXcd f = -sys.u_tilde * ic;

  // Unit scattered field for radiating modes; non-radiating modes keep unit current and t = 0.
  const double scale = std::max(sys.u_tilde.norm(), 1e-300);
  std::vector<int> radiating;
  for (int n = 0; n < nc; ++n) {
    const double in = ic.col(n).norm();
    const double fn = f.col(n).norm();
    if (fn > 1e-10 * scale * in) {
      ic.col(n) /= fn;
      f.col(n) /= fn;
      radiating.push_back(n);
    } else {
      ic.col(n) /= in;
      f.col(n).setZero();
      t(n) = 0.0;
    }
  }
  {
    const Eigen::VectorXcd tr = t(radiating);
    Eigen::MatrixXcd fr = f(Eigen::all, radiating);
    Eigen::MatrixXcd ir = ic(Eigen::all, radiating);
    orthonormalize_clusters(tr, fr, &ir, opts.cluster_tol);
    f(Eigen::all, radiating) = fr;
    ic(Eigen::all, radiating) = ir;
  }

  // Background response: T_b and the background currents driven by the controllable ones.
  Eigen::MatrixXcd t_b = blocks.t0();
  Eigen::MatrixXcd ib(blocks.nb, nc);
  if (blocks.nb > 0) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(blocks.zbb());
    const Eigen::MatrixXcd ub = blocks.ub();
    t_b -= ub * lu.solve(ub.transpose());
    ib = -lu.solve(blocks.zbc() * ic);
  }
  const Eigen::MatrixXcd s_b = identity_plus_twice(t_b);
  m.f = f;
  m.a = s_b.adjoint() * f;
  for (int n = 0; n < nc; ++n) m.eigen.push_back(eigen_from_t(t(n)));
  m.controllable_currents = ic;
  Eigen::MatrixXcd full(blocks.n(), nc);
  full.topRows(blocks.nb) = ib;
  full.bottomRows(nc) = ic;
  m.currents = full;

  // ||(S - S_b) a|| = 2 |t| for unit f; compare with ||S a|| = ||s S_b a||.
  m.cancellation_sensitive.assign(static_cast<std::size_t>(nc), false);
  for (int n = 0; n < nc; ++n) {
    const double sa = std::abs(2.0 * t(n) + 1.0) * m.f.col(n).norm();
    m.cancellation_sensitive[static_cast<std::size_t>(n)] = 2.0 * std::abs(t(n)) * m.f.col(n).norm() < opts.cancellation_tol * sa;
  }
  sort_modes(m);
  return m;
}

TildeTMatrix tilde_tmatrix(const BlockImpedance& blocks) {
  TildeTMatrix out;
  const int dim = blocks.wave_dim();
  out.t_tilde = OperatorMatrix{OperatorKind::T, blocks.basis, blocks.port_count, Eigen::MatrixXcd::Zero(dim, dim)};
  const auto ts = transition(blocks);
  const Eigen::MatrixXcd tbh = ts.t_b.data.adjoint();
  const Eigen::MatrixXcd lhs = 2.0 * ts.t.data * tbh + tbh + ts.t.data;
  if (blocks.nc > 0) {
    const SchurSystem sys = schur_system(blocks);
    out.t_tilde.data = -sys.u_tilde * solve_checked(sys.z_tilde, sys.u_tilde.adjoint(), "Schur complement Z~");
  }
  const double nt = out.t_tilde.data.norm();
  const double diff = (lhs - out.t_tilde.data).norm();
  out.identity_residual = nt > 0.0 ? diff / nt : diff;
  return out;
}

CurrentRecovery recover_currents(const Eigen::VectorXcd& a_n, cplx t_n, const BlockImpedance& blocks) {
  if (a_n.size() != blocks.wave_dim()) throw ShapeError("recover_currents: excitation does not match the basis");
  CurrentRecovery r;
  r.full = solve_checked(blocks.z, blocks.u.transpose() * a_n, "impedance matrix Z");
  if (blocks.nb > 0) {
    const Eigen::VectorXcd ub_a = blocks.ub().transpose() * a_n;
    r.full.head(blocks.nb) -= solve_checked(blocks.zbb(), ub_a, "background block Z_bb");
  }
  r.background = r.full.head(blocks.nb);
  if (std::abs(t_n) > 0.0 && blocks.nc > 0) {
    const SchurSystem sys = schur_system(blocks);
    Eigen::MatrixXcd t_b = blocks.t0();
    if (blocks.nb > 0) t_b -= blocks.ub() * solve_checked(blocks.zbb(), blocks.ub().transpose(), "background block Z_bb");
    // Field radiated by the difference currents, t_n S_b a_n (unit-normalized f scaled by t_n).
    const Eigen::VectorXcd f = t_n * (identity_plus_twice(t_b) * a_n);
    Eigen::VectorXcd ic = solve_checked(sys.z_tilde, sys.u_tilde.adjoint() * f, "Schur complement Z~") / t_n;
    const Eigen::VectorXcd ref = r.full.tail(blocks.nc);
    const double nref = ref.norm();
    r.agreement = nref > 0.0 ? (ic - ref).norm() / nref : ic.norm();
    r.from_field = std::move(ic);
  }
  return r;
}

void attach_currents(ModeSet& modes, const BlockImpedance& blocks) {
  if (modes.a.rows() != blocks.wave_dim()) throw ShapeError("attach_currents: modes do not match the impedance system");
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(blocks.z);
  if (!(lu.rcond() > 1e-14)) throw LinearSolveError("impedance matrix Z is numerically singular", lu.rcond());
  Eigen::MatrixXcd full = lu.solve(blocks.u.transpose() * modes.a);
  if (blocks.nb > 0) {
    full.topRows(blocks.nb) -= solve_checked(blocks.zbb(), blocks.ub().transpose() * modes.a, "background block Z_bb");
  }
  modes.controllable_currents = full.bottomRows(blocks.nc);
  modes.currents = std::move(full);
}

std::vector<PowerResidual> substructure_power_check(const OperatorMatrix& t, const OperatorMatrix& t_b,
                                                    const ModeSet& modes) {
  check_same_space(t, t_b, "substructure_power_check");
  if (modes.a.rows() != t.dim()) throw ShapeError("substructure_power_check: modes do not match the operators");
  const Eigen::MatrixXcd d = (t.data - t_b.data) * modes.a;
  std::vector<PowerResidual> out;
  for (int n = 0; n < modes.size(); ++n) {
    const cplx tn = modes.eigen[static_cast<std::size_t>(n)].t;
    const double a2 = modes.a.col(n).squaredNorm();
    PowerResidual p;
    p.difference_power = 0.5 * d.col(n).squaredNorm();
    p.real_part_power = -0.5 * tn.real() * a2;
    p.modulus_power = 0.5 * std::norm(tn) * a2;
    p.residual = std::max({std::abs(p.difference_power - p.real_part_power),
                           std::abs(p.difference_power - p.modulus_power),
                           std::abs(p.real_part_power - p.modulus_power)});
    out.push_back(p);
  }
  return out;
}

ModeSet cm_ground_plane(const BlockImpedance& blocks, const ModeOptions& opts) {
  const auto ts = transition(blocks);
  std::vector<int> keep = ground_plane_filter(blocks.basis);
  const WaveBasis sub = blocks.basis.subset(keep);
  for (int q = 0; q < blocks.port_count; ++q) keep.push_back(blocks.basis.size() + q);
  const OperatorMatrix s{OperatorKind::S, sub, blocks.port_count, ts.s.data(keep, keep)};
  const OperatorMatrix s_b{OperatorKind::S, sub, blocks.port_count, ts.s_b.data(keep, keep)};
  ModeSet m = cm_scattering(s, s_b, opts);
  // Leakage of the restricted operators into the dropped waves.
  std::vector<int> drop;
  for (int i = 0, j = 0; i < ts.s.dim(); ++i) {
    if (j < static_cast<int>(keep.size()) && keep[static_cast<std::size_t>(j)] == i) {
      ++j;
    } else {
      drop.push_back(i);
    }
  }
  double leak = 0.0;
  if (!drop.empty()) leak = ts.s.data(drop, keep).cwiseAbs().maxCoeff() / std::max(ts.s.data.norm(), 1e-300);
  m.add_diagnostic("parity_leakage", leak);
  return m;
}

ModeSet cm_ground_plane(const DipoleScene& scene, double k, const ModeOptions& opts) {
  if (!scene.ground_plane) throw DomainError("cm_ground_plane: scene has no ground plane");
  return cm_ground_plane(assemble_impedance(scene, k), opts);
}

SweepResult track_modes(const std::vector<ModeSet>& sweep, double threshold) {
  SweepResult out;
  if (sweep.empty()) return out;
  for (const auto& m : sweep) {
    if (!(m.basis == sweep.front().basis) || m.port_count != sweep.front().port_count) {
      throw ShapeError("track_modes: every frequency must use the same basis");
    }
    out.frequencies.push_back(m.frequency);
  }
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (!(sweep[i].frequency >= sweep[i - 1].frequency)) throw DomainError("track_modes: frequencies must ascend");
  }
  out.trace_of.resize(sweep.size());
  auto& first = out.trace_of.front();
  for (int n = 0; n < sweep.front().size(); ++n) first.push_back(out.n_traces++);

  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const auto& prev = sweep[i - 1];
    const auto& next = sweep[i];
    const Eigen::MatrixXd c = (prev.a.adjoint() * next.a).cwiseAbs();
    struct Pair {
      double score;
      int m, n;
    };
    std::vector<Pair> pairs;
    for (int mm = 0; mm < prev.size(); ++mm)
      for (int nn = 0; nn < next.size(); ++nn)
        if (c(mm, nn) >= threshold) pairs.push_back({c(mm, nn), mm, nn});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.score > y.score; });
    std::vector<int> assigned(static_cast<std::size_t>(next.size()), -1);
    std::vector<bool> taken(static_cast<std::size_t>(prev.size()), false);
    for (const auto& p : pairs) {
      if (taken[static_cast<std::size_t>(p.m)] || assigned[static_cast<std::size_t>(p.n)] >= 0) continue;
      taken[static_cast<std::size_t>(p.m)] = true;
      assigned[static_cast<std::size_t>(p.n)] = out.trace_of[i - 1][static_cast<std::size_t>(p.m)];
    }
    for (auto& a : assigned)
      if (a < 0) a = out.n_traces++;
    out.trace_of[i] = std::move(assigned);
  }
  return out;
}

}  // namespace subcm
