#pragma once

// Matrix-free estimation of dominant substructure modes from scattering-solver callbacks.
//
// Only forward applications T x, T_b x (or S x, S_b x) are needed. The adjoint of the
// background operator is reached through conjugation, which requires complex-symmetric
// (reciprocal) operators.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "subcm/modes.hpp"
#include "subcm/network.hpp"

namespace subcm {

enum class OracleForm { TForm, SForm };

struct ScatterOracle {
  using Apply = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;
  Apply apply;             // full scene
  Apply apply_background;  // background only
  OracleForm kind = OracleForm::TForm;
  int dim = 0;
  WaveBasis basis;         // labels for the result; may be empty
  int port_count = 0;
};

/// Oracle backed by dense operators of kind T (T-form) or S (S-form).
ScatterOracle dense_oracle(const OperatorMatrix& m, const OperatorMatrix& m_b);

struct OracleReport {
  double linearity = 0.0;   // worst relative defect over both operators
  double symmetry = 0.0;    // worst |y^T M x - x^T M y| relative
  bool pass = true;
};

/// Probe linearity and complex symmetry of both callbacks with random vectors.
OracleReport validate_oracle(const ScatterOracle& oracle, std::uint64_t seed = 42, double tol = 1e-10,
                             int probes = 3);

/// S_b^H S a = (S_b (S a)^*)^* for SForm, (2 T_b^H T + T_b^H + T) a = (T_b (a + 2 T a)^*)^* + T a for TForm.
Eigen::VectorXcd composed_matvec(const ScatterOracle& oracle, const Eigen::VectorXcd& a);

struct IterationOptions {
  int max_iter = 100;
  int n_modes = 5;
  double tol_residual = 1e-8;  // relative to |f_1|
  double tol_eig = 1e-6;       // relative drift of the tracked Ritz values
  int stagnation_window = 3;   // consecutive iterations below tol_eig
  std::uint64_t seed = 42;
  std::optional<Eigen::VectorXcd> start;  // replaces the random start vector
  bool validate = true;                   // probe the oracle first
};

struct IterationLogEntry {
  int m = 0;
  double residual = 0.0;  // |a_{m+1}| before normalization, relative to |f_1|
  /// Distance of A^m a_1 from the Krylov space, the product of the raw |a_{j+1}|. Non-increasing
  /// whenever |A| <= 1, which holds for lossless operators.
  double krylov_residual = 0.0;
  double drift = 0.0;     // largest relative change of the tracked Ritz values
  double orthogonality = 0.0;
};

/// Krylov basis and responses after the last iteration.
struct IterationState {
  int m = 0;
  Eigen::MatrixXcd basis_vectors;  // a_1 ... a_m, orthonormal
  Eigen::MatrixXcd responses;      // f_p = A a_p
  std::vector<cplx> eigen_estimates;
};

struct IterationResult {
  ModeSet modes;  // the n_modes dominant Ritz pairs, t eigenvalues
  std::vector<IterationLogEntry> log;
  IterationState state;
  bool converged = false;
  int oracle_calls = 0;
};

/// Arnoldi iteration on the composed operator with modified Gram-Schmidt (orthogonalize,
/// then normalize; a second pass when orthogonality is lost). Eigenvalues come from the
/// m x m projection Q^H A Q of the rank-m estimate A_m = sum f_p a_p^H.
IterationResult iterate(const ScatterOracle& oracle, const IterationOptions& opts = {});

}  // namespace subcm
