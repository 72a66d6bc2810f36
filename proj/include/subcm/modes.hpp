#pragma once

// Dense substructure characteristic-mode engines.
//
// Modes solve S a = s S_b a. With lossless S and S_b the reduced operator S_b^H S is
// unitary, so its Schur form is diagonal and the Schur vectors are orthonormal modes.
// t = (s - 1)/2 is the transition eigenvalue, |t| the modal significance.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "subcm/dipole.hpp"
#include "subcm/network.hpp"
#include "subcm/swe.hpp"

namespace subcm {

struct ModeSet {
  double frequency = 0.0;  // Hz, informational
  WaveBasis basis;
  int port_count = 0;
  std::vector<EigenTriple> eigen;               // ordered by |t| descending
  Eigen::MatrixXcd a;                           // excitations, one column per mode
  Eigen::MatrixXcd f;                           // scattered fields f_n = S_b a_n
  std::optional<Eigen::MatrixXcd> currents;     // I_n, background unknowns first
  std::optional<Eigen::MatrixXcd> controllable_currents;  // I_cn
  std::vector<bool> cancellation_sensitive;
  bool general_solver_fallback = false;  // S_b was not unitary; modes from a general eigensolver
  bool indefinite_radiation = false;     // R~ had negative eigenvalues beyond tolerance
  std::vector<std::pair<std::string, double>> diagnostics;

  int size() const noexcept { return static_cast<int>(eigen.size()); }
  std::vector<cplx> t_values() const;
  void add_diagnostic(std::string name, double value) { diagnostics.emplace_back(std::move(name), value); }
  std::optional<double> diagnostic(const std::string& name) const;
};

struct ModeOptions {
  double unitary_tol = 1e-6;       // S_b deviation above which the general solver is used
  double cancellation_tol = 1e-6;  // ||(S - S_b) a|| < tol ||S a||
  double cluster_tol = 1e-9;       // relative eigenvalue gap of a degenerate cluster
};

/// Modes of S a = s S_b a via the Schur form of S_b^H S.
ModeSet cm_scattering(const OperatorMatrix& s, const OperatorMatrix& s_b, const ModeOptions& opts = {});

enum class Representation { Excitation, Scattered };

/// Modes of (2 T_b^H T + T_b^H + T) a = t a (Excitation) or (2 T T_b^H + T_b^H + T) f = t f (Scattered).
ModeSet cm_t_form(const OperatorMatrix& t, const OperatorMatrix& t_b, Representation rep,
                  const ModeOptions& opts = {});

/// Background currents eliminated from the impedance system.
struct SchurSystem {
  Eigen::MatrixXcd z_tilde;  // Z_cc - Z_cb Z_bb^-1 Z_bc
  Eigen::MatrixXcd r_tilde;  // Hermitian part of Z~
  Eigen::MatrixXcd x_tilde;  // (Z~ - Z~^H) / 2j
  Eigen::MatrixXcd u_tilde;  // U_c - U_b Z_bb^-1 Z_bc
  double schur_residual = 0.0;          // ||Z_bb X - Z_bc|| / ||Z_bc|| of the elimination solve
  double factorization_residual = 0.0;  // ||R~ - U~^H U~|| / ||R~||
};

SchurSystem schur_system(const BlockImpedance& blocks);

/// X~ I = lambda R~ I, solved as R~ I = -t Z~ I. Stores I_cn and f_n = -U~ I_cn with unit f_n.
ModeSet cm_impedance_substructure(const BlockImpedance& blocks, const ModeOptions& opts = {});

struct TildeTMatrix {
  OperatorMatrix t_tilde;           // -U~ Z~^-1 U~^H
  double identity_residual = 0.0;   // ||(2 T T_b^H + T_b^H + T) - T~||_F / ||T~||_F
};

TildeTMatrix tilde_tmatrix(const BlockImpedance& blocks);

struct CurrentRecovery {
  Eigen::VectorXcd full;                      // I_n from the excitation a_n
  Eigen::VectorXcd background;                // its background block
  std::optional<Eigen::VectorXcd> from_field; // I_cn from g_n = t_n S_b a_n
  double agreement = 0.0;                     // relative difference of the controllable blocks
};

/// I_n = Z^-1 U^T a_n - [Z_bb^-1 U_b^T a_n; 0] and, for t_n != 0, I_cn = Z~^-1 U~^H g_n / t_n
/// where g_n = t_n S_b a_n is the field radiated by I_n (g_n = -U~ I_cn).
CurrentRecovery recover_currents(const Eigen::VectorXcd& a_n, cplx t_n, const BlockImpedance& blocks);

/// Attach I_n (and I_cn) to every mode of `modes`.
void attach_currents(ModeSet& modes, const BlockImpedance& blocks);

struct PowerResidual {
  double difference_power = 0.0;  // |(T - T_b) a|^2 / 2
  double real_part_power = 0.0;   // -Re t |a|^2 / 2
  double modulus_power = 0.0;     // |t|^2 |a|^2 / 2
  double residual = 0.0;          // largest pairwise mismatch
};

std::vector<PowerResidual> substructure_power_check(const OperatorMatrix& t, const OperatorMatrix& t_b,
                                                    const ModeSet& modes);

/// Ground-plane modes: folded image system restricted to the parity-compatible waves (plus ports).
ModeSet cm_ground_plane(const DipoleScene& scene, double k, const ModeOptions& opts = {});
ModeSet cm_ground_plane(const BlockImpedance& blocks, const ModeOptions& opts = {});

struct SweepResult {
  std::vector<double> frequencies;
  std::vector<std::vector<int>> trace_of;  // [frequency][mode rank] -> trace id
  int n_traces = 0;
};

/// Greedy tracking by |a_m^H a_n| between neighbouring frequencies.
SweepResult track_modes(const std::vector<ModeSet>& sweep, double threshold = 0.5);

/// Largest |a_m^H a_n - delta_mn| over the nonzero columns.
double orthonormality_deviation(const Eigen::MatrixXcd& v);

/// Order modes by |t| descending, ties broken by ascending l content.
void sort_modes(ModeSet& modes);

}  // namespace subcm
