#include "subcm/network.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "subcm/errors.hpp"

namespace subcm {

namespace {

void require_square(const Eigen::MatrixXcd& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + ": matrix is not square");
}

}  // namespace

Eigen::MatrixXcd s_from_t(const Eigen::MatrixXcd& t) {
  require_square(t, "s_from_t");
  Eigen::MatrixXcd s = 2.0 * t;
  s.diagonal().array() += 1.0;
  return s;
}

Eigen::MatrixXcd t_from_s(const Eigen::MatrixXcd& s) {
  require_square(s, "t_from_s");
  Eigen::MatrixXcd t = s;
  t.diagonal().array() -= 1.0;
  return 0.5 * t;
}

OperatorMatrix s_from_t(const OperatorMatrix& t) {
  OperatorMatrix out{OperatorKind::S, t.basis, t.port_count, s_from_t(t.data)};
  return out;
}

OperatorMatrix t_from_s(const OperatorMatrix& s) {
  OperatorMatrix out{OperatorKind::T, s.basis, s.port_count, t_from_s(s.data)};
  return out;
}

EigenTriple eigen_maps(cplx s) {
  EigenTriple e;
  e.s = s;
  e.t = (s - 1.0) / 2.0;
  if (s == cplx(1.0, 0.0)) {
    e.lambda = cplx(std::numeric_limits<double>::infinity(), 0.0);
    e.lambda_infinite = true;
  } else {
    e.lambda = cplx(0.0, 1.0) * (s + 1.0) / (s - 1.0);
    e.lambda_infinite = false;
  }
  return e;
}

EigenTriple eigen_from_t(cplx t) {
  EigenTriple e = eigen_maps(2.0 * t + 1.0);
  e.t = t;
  if (t == cplx(0.0, 0.0)) {
    e.lambda = cplx(std::numeric_limits<double>::infinity(), 0.0);
    e.lambda_infinite = true;
  } else {
    // lambda = j (s + 1)/(s - 1) = j (t + 1)/t, which avoids the cancellation in s - 1.
    e.lambda = cplx(0.0, 1.0) * (t + 1.0) / t;
    e.lambda_infinite = false;
  }
  return e;
}

CheckReport check_unitary(const Eigen::MatrixXcd& m, double tol) {
  require_square(m, "check_unitary");
  CheckReport r;
  if (m.rows() == 0) return r;
  Eigen::MatrixXcd g = m.adjoint() * m;
  g.diagonal().array() -= 1.0;
  r.deviation = g.norm() / std::sqrt(static_cast<double>(m.rows()));
  r.pass = r.deviation <= tol;
  return r;
}

CheckReport check_t_power(const Eigen::MatrixXcd& t, double tol) {
  require_square(t, "check_t_power");
  CheckReport r;
  if (t.rows() == 0) return r;
  const Eigen::MatrixXcd g = t.adjoint() * t + 0.5 * (t + t.adjoint());
  r.deviation = g.norm() / std::sqrt(static_cast<double>(t.rows()));
  r.pass = r.deviation <= tol;
  return r;
}

CheckReport check_unitary(const OperatorMatrix& m, double tol) { return check_unitary(m.data, tol); }
CheckReport check_t_power(const OperatorMatrix& t, double tol) { return check_t_power(t.data, tol); }

Eigen::MatrixXcd embed_identity(const Eigen::MatrixXcd& m, std::span<const int> index_map, int target_dim,
                                cplx fill) {
  require_square(m, "embed_identity");
  if (static_cast<Eigen::Index>(index_map.size()) != m.rows()) {
    throw ShapeError("embed_identity: index map length does not match the operator");
  }
  std::vector<bool> used(static_cast<std::size_t>(std::max(target_dim, 0)), false);
  for (int i : index_map) {
    if (i < 0 || i >= target_dim) throw MappingError("embed_identity: index outside the target basis");
    if (used[static_cast<std::size_t>(i)]) throw MappingError("embed_identity: index map is not injective");
    used[static_cast<std::size_t>(i)] = true;
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(target_dim, target_dim);
  out.diagonal().setConstant(fill);
  const auto n = static_cast<int>(index_map.size());
  for (int j = 0; j < n; ++j) {
    out(index_map[static_cast<std::size_t>(j)], index_map[static_cast<std::size_t>(j)]) = 0.0;
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(index_map[static_cast<std::size_t>(i)], index_map[static_cast<std::size_t>(j)]) = m(i, j);
  return out;
}

OperatorMatrix embed_identity(const OperatorMatrix& m, const WaveBasis& target) {
  if (m.kind != OperatorKind::S && m.kind != OperatorKind::T) {
    throw ShapeError("embed_identity: only S or T operators can be embedded");
  }
  if (m.port_count != 0) throw ShapeError("embed_identity: port-augmented operators are not supported");
  if (m.dim() != m.basis.size()) throw ShapeError("embed_identity: operator does not match its basis");
  std::vector<int> map;
  map.reserve(static_cast<std::size_t>(m.basis.size()));
  for (const auto& idx : m.basis.indices()) {
    auto pos = target.find(idx);
    if (!pos) throw MappingError("embed_identity: wave missing from the target basis");
    map.push_back(*pos);
  }
  const cplx fill = (m.kind == OperatorKind::S) ? cplx(1.0) : cplx(0.0);
  return OperatorMatrix{m.kind, target, 0, embed_identity(m.data, map, target.size(), fill)};
}

}  // namespace subcm
