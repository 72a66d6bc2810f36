#pragma once

// Optimal one-to-one matching of eigenvalue lists.

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace subcm {

/// Minimum-cost perfect assignment for a square cost matrix (Hungarian method).
/// Returns column index assigned to each row.
std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost);

struct SpectralMatch {
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  std::vector<int> pairing;  // index into the second list for each entry of the first (-1: matched to padding)
};

/// Match two eigenvalue multisets by |x - y|. Values with |x| < trim are dropped first and
/// the shorter list is padded with zeros.
SpectralMatch match_spectra(const std::vector<std::complex<double>>& a, const std::vector<std::complex<double>>& b,
                            double trim = 1e-9);

}  // namespace subcm
