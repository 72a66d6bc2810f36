#pragma once

// Operator algebra shared by the backends: S <-> T, eigenvalue maps, lossless checks
// and basis embedding.

#include <span>

#include <Eigen/Core>

#include "subcm/swe.hpp"

namespace subcm {

enum class OperatorKind { S, T, Z, Projection };

/// Dense operator tagged with its wave basis. `port_count` trailing rows/columns
/// (S, T kinds) carry lumped-port power waves after the spherical waves.
struct OperatorMatrix {
  OperatorKind kind = OperatorKind::T;
  WaveBasis basis;
  int port_count = 0;
  Eigen::MatrixXcd data;

  int dim() const noexcept { return static_cast<int>(data.rows()); }
};

/// S = 2T + I.
OperatorMatrix s_from_t(const OperatorMatrix& t);
/// T = (S - I) / 2.
OperatorMatrix t_from_s(const OperatorMatrix& s);
Eigen::MatrixXcd s_from_t(const Eigen::MatrixXcd& t);
Eigen::MatrixXcd t_from_s(const Eigen::MatrixXcd& s);

struct EigenTriple {
  cplx s{1.0, 0.0};
  cplx t{0.0, 0.0};
  cplx lambda{0.0, 0.0};
  bool lambda_infinite = true;  // s == 1 exactly

  double modal_significance() const { return std::abs(t); }
};

/// t = (s - 1)/2, lambda = j (s + 1)/(s - 1).
EigenTriple eigen_maps(cplx s);
/// Same triple starting from t (s = 2t + 1).
EigenTriple eigen_from_t(cplx t);

struct CheckReport {
  double deviation = 0.0;
  bool pass = true;
};

/// ||M^H M - I||_F / sqrt(dim).
CheckReport check_unitary(const Eigen::MatrixXcd& m, double tol = 1e-8);
/// ||T^H T + Re T||_F / sqrt(dim), Re taken as the Hermitian part (T + T^H)/2.
CheckReport check_t_power(const Eigen::MatrixXcd& t, double tol = 1e-8);
CheckReport check_unitary(const OperatorMatrix& m, double tol = 1e-8);
CheckReport check_t_power(const OperatorMatrix& t, double tol = 1e-8);

/// Place M into a larger operator through an injective index map; remaining
/// diagonal entries are 1 (or 0 when `fill` is 0, the T-kind equivalent).
Eigen::MatrixXcd embed_identity(const Eigen::MatrixXcd& m, std::span<const int> index_map, int target_dim,
                                cplx fill = 1.0);

/// Embed M into a basis containing all of M's waves. S kind is padded with identity,
/// T kind with zeros, so both describe the same scatterer.
OperatorMatrix embed_identity(const OperatorMatrix& m, const WaveBasis& target);

}  // namespace subcm
