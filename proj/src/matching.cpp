#include "subcm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "subcm/errors.hpp"

namespace subcm {

std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("optimal_assignment: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  // Potentials formulation, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

SpectralMatch match_spectra(const std::vector<std::complex<double>>& a, const std::vector<std::complex<double>>& b,
                            double trim) {
  std::vector<int> ia, ib;
  for (int i = 0; i < static_cast<int>(a.size()); ++i)
    if (std::abs(a[static_cast<std::size_t>(i)]) >= trim) ia.push_back(i);
  for (int i = 0; i < static_cast<int>(b.size()); ++i)
    if (std::abs(b[static_cast<std::size_t>(i)]) >= trim) ib.push_back(i);
  const int n = static_cast<int>(std::max(ia.size(), ib.size()));
  SpectralMatch out;
  out.pairing.assign(a.size(), -1);
  if (n == 0) return out;
  auto val = [](const std::vector<std::complex<double>>& x, const std::vector<int>& idx, int i) {
    return i < static_cast<int>(idx.size()) ? x[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]
                                            : std::complex<double>(0.0);
  };
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = std::abs(val(a, ia, i) - val(b, ib, j));
  const auto assign = optimal_assignment(cost);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = cost(i, assign[static_cast<std::size_t>(i)]);
    out.max_deviation = std::max(out.max_deviation, d);
    sum += d;
    if (i < static_cast<int>(ia.size()) && assign[static_cast<std::size_t>(i)] < static_cast<int>(ib.size())) {
      out.pairing[static_cast<std::size_t>(ia[static_cast<std::size_t>(i)])] = ib[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
  }
  out.mean_deviation = sum / n;
  return out;
}

}  // namespace subcm
