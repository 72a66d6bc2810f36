#include "subcm/swe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "subcm/errors.hpp"
#include "subcm/special.hpp"

namespace subcm {

namespace {

constexpr double kPi = std::numbers::pi;

// Real spherical harmonics and their surface-gradient components at one direction.
// Y, dtheta Y and (1/sin theta) dphi Y, indexed by lm = l*l + l + m - 1 (l >= 1).
struct AngularSet {
  int L = 0;
  std::vector<double> y, dth, dph;
  Vec3 r_hat, th_hat, ph_hat;

  static int lm(int l, int m) { return l * l + l + m - 1; }
};

AngularSet angular_set(int L, double x, double s, double phi) {
  AngularSet a;
  a.L = L;
  const std::size_t n = static_cast<std::size_t>((L + 1) * (L + 1) - 1);
  a.y.assign(n, 0.0);
  a.dth.assign(n, 0.0);
  a.dph.assign(n, 0.0);
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  a.r_hat = Vec3(s * cp, s * sp, x);
  a.th_hat = Vec3(x * cp, x * sp, -s);
  a.ph_hat = Vec3(-sp, cp, 0.0);

  // Normalized Legendre P_l^m (no Condon-Shortley phase) and u_l^m = P_l^m / sin(theta).
  // Stored in flat [m][l] tables of size (L+1)^2.
  const int W = L + 1;
  std::vector<double> P(static_cast<std::size_t>(W * W), 0.0);
  std::vector<double> U(static_cast<std::size_t>(W * W), 0.0);
  auto at = [W](std::vector<double>& t, int m, int l) -> double& {
    return t[static_cast<std::size_t>(m * W + l)];
  };

  at(P, 0, 0) = 1.0 / std::sqrt(4.0 * kPi);
  if (L >= 1) at(P, 0, 1) = std::sqrt(3.0) * x * at(P, 0, 0);
  for (int l = 2; l <= L; ++l) {
    const double al = std::sqrt((4.0 * l * l - 1.0) / (l * l));
    const double bl = std::sqrt(((l - 1.0) * (l - 1.0)) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
    at(P, 0, l) = al * (x * at(P, 0, l - 1) - bl * at(P, 0, l - 2));
  }
  double umm = 0.0;
  for (int m = 1; m <= L; ++m) {
    umm = (m == 1) ? std::sqrt(3.0 / (8.0 * kPi)) : std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * umm;
    at(U, m, m) = umm;
    if (m + 1 <= L) at(U, m, m + 1) = std::sqrt(2.0 * m + 3.0) * x * umm;
    for (int l = m + 2; l <= L; ++l) {
      const double al = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      const double bl = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m) /
                                  (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      at(U, m, l) = al * (x * at(U, m, l - 1) - bl * at(U, m, l - 2));
    }
    for (int l = m; l <= L; ++l) at(P, m, l) = s * at(U, m, l);
  }

  const double sqrt2 = std::numbers::sqrt2;
  for (int l = 1; l <= L; ++l) {
    // m = 0
    {
      const int i = AngularSet::lm(l, 0);
      a.y[static_cast<std::size_t>(i)] = at(P, 0, l);
      a.dth[static_cast<std::size_t>(i)] = -std::sqrt(l * (l + 1.0)) * s * at(U, 1, l);
      a.dph[static_cast<std::size_t>(i)] = 0.0;
    }
    for (int m = 1; m <= l; ++m) {
      const double u_lm = at(U, m, l);
      const double u_l1m = (l - 1 >= m) ? at(U, m, l - 1) : 0.0;
      const double dP = l * x * u_lm - std::sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l - m) * (l + m)) * u_l1m;
      const double cm = std::cos(m * phi);
      const double sm = std::sin(m * phi);
      const int ip = AngularSet::lm(l, m);
      const int in = AngularSet::lm(l, -m);
      a.y[static_cast<std::size_t>(ip)] = sqrt2 * at(P, m, l) * cm;
      a.dth[static_cast<std::size_t>(ip)] = sqrt2 * dP * cm;
      a.dph[static_cast<std::size_t>(ip)] = -sqrt2 * m * u_lm * sm;
      a.y[static_cast<std::size_t>(in)] = sqrt2 * at(P, m, l) * sm;
      a.dth[static_cast<std::size_t>(in)] = sqrt2 * dP * sm;
      a.dph[static_cast<std::size_t>(in)] = sqrt2 * m * u_lm * cm;
    }
  }
  return a;
}

AngularSet angular_set_at(int L, const Vec3& p) {
  const double r = p.norm();
  if (r == 0.0) return angular_set(L, 1.0, 0.0, 0.0);
  const double x = std::clamp(p.z() / r, -1.0, 1.0);
  const double s = std::hypot(p.x(), p.y()) / r;
  const double phi = (p.x() == 0.0 && p.y() == 0.0) ? 0.0 : std::atan2(p.y(), p.x());
  return angular_set(L, x, s, phi);
}

// Vector angular functions of one index.
struct VectorHarmonics {
  Vec3 a1, a2, a3;
};

VectorHarmonics vector_harmonics(const AngularSet& a, int l, int m) {
  const auto i = static_cast<std::size_t>(AngularSet::lm(l, m));
  const double inv = 1.0 / std::sqrt(l * (l + 1.0));
  VectorHarmonics h;
  h.a2 = inv * (a.th_hat * a.dth[i] + a.ph_hat * a.dph[i]);
  h.a1 = inv * (a.th_hat * a.dph[i] - a.ph_hat * a.dth[i]);
  h.a3 = a.r_hat * a.y[i];
  return h;
}

// Radial factors of a wave family: TE factor z_l, TM tangential (x z_l)'/x, TM radial sqrt(l(l+1)) z_l/x.
template <typename T>
struct Radial {
  std::vector<T> te, tm_t, tm_r;
};

Radial<double> regular_radial(int L, double x) {
  Radial<double> r;
  r.te.assign(static_cast<std::size_t>(L) + 1, 0.0);
  r.tm_t = r.te;
  r.tm_r = r.te;
  if (x == 0.0) {
    if (L >= 1) {
      r.tm_t[1] = 2.0 / 3.0;
      r.tm_r[1] = std::numbers::sqrt2 / 3.0;
    }
    return r;
  }
  const auto j = special::spherical_bessel_j(L, x);
  for (int l = 1; l <= L; ++l) {
    const auto il = static_cast<std::size_t>(l);
    r.te[il] = j[il];
    r.tm_t[il] = j[il - 1] - l * j[il] / x;
    r.tm_r[il] = std::sqrt(l * (l + 1.0)) * j[il] / x;
  }
  return r;
}

Radial<cplx> outgoing_radial(int L, double x) {
  if (!(x > 0.0)) throw DomainError("outgoing waves are singular at the origin");
  const auto j = special::spherical_bessel_j(L, x);
  const auto y = special::spherical_bessel_y(L, x);
  Radial<cplx> r;
  r.te.assign(static_cast<std::size_t>(L) + 1, cplx{});
  r.tm_t = r.te;
  r.tm_r = r.te;
  for (int l = 1; l <= L; ++l) {
    const auto il = static_cast<std::size_t>(l);
    const cplx h{j[il], -y[il]};
    const cplx hm{j[il - 1], -y[il - 1]};
    r.te[il] = h;
    r.tm_t[il] = hm - static_cast<double>(l) * h / x;
    r.tm_r[il] = std::sqrt(l * (l + 1.0)) * h / x;
  }
  return r;
}

template <typename T>
Eigen::Matrix<T, 3, 1> wave_from(const AngularSet& a, const Radial<T>& r, const WaveIndex& idx) {
  const auto h = vector_harmonics(a, idx.l, idx.m);
  const auto il = static_cast<std::size_t>(idx.l);
  if (idx.pol == Polarization::TE) return h.a1.cast<T>() * r.te[il];
  return h.a2.cast<T>() * r.tm_t[il] + h.a3.cast<T>() * r.tm_r[il];
}

void check_index(const WaveIndex& idx) {
  if (idx.l < 1 || std::abs(idx.m) > idx.l) {
    throw DomainError("invalid wave index (l=" + std::to_string(idx.l) + ", m=" + std::to_string(idx.m) + ")");
  }
}

void check_wavenumber(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("wavenumber must be finite and positive");
}

}  // namespace

WaveBasis WaveBasis::full(int l_max) {
  if (l_max < 1) throw DomainError("basis: l_max must be >= 1, got " + std::to_string(l_max));
  WaveBasis b;
  b.l_max_ = l_max;
  b.full_ = true;
  b.indices_.reserve(static_cast<std::size_t>(2 * l_max * (l_max + 2)));
  for (int l = 1; l <= l_max; ++l)
    for (int m = -l; m <= l; ++m) {
      b.indices_.push_back({l, m, Polarization::TE});
      b.indices_.push_back({l, m, Polarization::TM});
    }
  return b;
}

WaveBasis WaveBasis::subset(std::span<const int> positions) const {
  WaveBasis b;
  b.l_max_ = l_max_;
  b.full_ = false;
  b.indices_.reserve(positions.size());
  std::vector<bool> seen(indices_.size(), false);
  for (int p : positions) {
    if (p < 0 || p >= size()) throw MappingError("basis subset position out of range");
    if (seen[static_cast<std::size_t>(p)]) throw MappingError("basis subset position repeated");
    seen[static_cast<std::size_t>(p)] = true;
    b.indices_.push_back(indices_[static_cast<std::size_t>(p)]);
  }
  b.full_ = full_ && static_cast<int>(positions.size()) == size() &&
            std::is_sorted(positions.begin(), positions.end());
  return b;
}

std::optional<int> WaveBasis::find(const WaveIndex& idx) const {
  if (full_) {
    if (idx.l < 1 || idx.l > l_max_ || std::abs(idx.m) > idx.l) return std::nullopt;
    return canonical_position(idx);
  }
  for (int i = 0; i < size(); ++i)
    if (indices_[static_cast<std::size_t>(i)] == idx) return i;
  return std::nullopt;
}

int truncation_order(double ka) {
  if (!(ka > 0.0) || !std::isfinite(ka)) throw DomainError("truncation_order: ka must be finite and positive");
  const double l = std::ceil(ka + 7.0 * std::cbrt(ka) + 3.0);
  return std::max(1, static_cast<int>(l));
}

WaveBasis basis(int l_max) { return WaveBasis::full(l_max); }

int canonical_position(const WaveIndex& idx) {
  check_index(idx);
  return 2 * (idx.l * idx.l - 1) + 2 * (idx.m + idx.l) + static_cast<int>(idx.pol);
}

Vec3 regular_wave_field(const WaveIndex& idx, double k, const Vec3& point) {
  check_index(idx);
  check_wavenumber(k);
  const auto a = angular_set_at(idx.l, point);
  const auto r = regular_radial(idx.l, k * point.norm());
  return wave_from(a, r, idx);
}

CVec3 outgoing_wave_field(const WaveIndex& idx, double k, const Vec3& point) {
  check_index(idx);
  check_wavenumber(k);
  const auto a = angular_set_at(idx.l, point);
  const auto r = outgoing_radial(idx.l, k * point.norm());
  return wave_from(a, r, idx);
}

Eigen::Matrix3Xd regular_wave_fields(const WaveBasis& basis, double k, const Vec3& point) {
  check_wavenumber(k);
  const int L = basis.l_max();
  const auto a = angular_set_at(L, point);
  const auto r = regular_radial(L, k * point.norm());
  Eigen::Matrix3Xd out(3, basis.size());
  for (int n = 0; n < basis.size(); ++n) out.col(n) = wave_from(a, r, basis[n]);
  return out;
}

Eigen::Matrix3Xcd outgoing_wave_fields(const WaveBasis& basis, double k, const Vec3& point) {
  check_wavenumber(k);
  const int L = basis.l_max();
  const auto a = angular_set_at(L, point);
  const auto r = outgoing_radial(L, k * point.norm());
  Eigen::Matrix3Xcd out(3, basis.size());
  for (int n = 0; n < basis.size(); ++n) out.col(n) = wave_from(a, r, basis[n]);
  return out;
}

std::vector<int> ground_plane_filter(const WaveBasis& basis) {
  std::vector<int> keep;
  for (int i = 0; i < basis.size(); ++i) {
    const auto& w = basis[i];
    const bool even = ((w.l + w.m) % 2) == 0;
    if ((w.pol == Polarization::TE && even) || (w.pol == Polarization::TM && !even)) keep.push_back(i);
  }
  return keep;
}

SphereGrid make_sphere_grid(double radius, int n_theta, int n_phi) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("sphere grid radius must be positive");
  if (n_theta < 1 || n_phi < 1) throw DomainError("sphere grid needs at least one node per direction");
  const auto gl = special::gauss_legendre(n_theta);
  SphereGrid g;
  g.radius = radius;
  g.n_theta = n_theta;
  g.n_phi = n_phi;
  g.points.reserve(static_cast<std::size_t>(n_theta * n_phi));
  g.weights.reserve(static_cast<std::size_t>(n_theta * n_phi));
  const double dphi = 2.0 * kPi / n_phi;
  for (int it = 0; it < n_theta; ++it) {
    const double x = gl.nodes[static_cast<std::size_t>(it)];
    const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    for (int ip = 0; ip < n_phi; ++ip) {
      const double phi = ip * dphi;
      g.points.emplace_back(radius * s * std::cos(phi), radius * s * std::sin(phi), radius * x);
      g.weights.push_back(gl.weights[static_cast<std::size_t>(it)] * dphi);
    }
  }
  return g;
}

SphereGrid minimal_sphere_grid(double radius, int l_max) {
  return make_sphere_grid(radius, l_max + 1, 2 * l_max + 1);
}

Eigen::MatrixXcd project_onto_regular(const SphereGrid& grid, const Eigen::MatrixXcd& values, double k,
                                      const WaveBasis& basis, std::vector<double>* residuals) {
  check_wavenumber(k);
  const int L = basis.l_max();
  if (grid.n_theta < L + 1 || grid.n_phi < 2 * L + 1) {
    throw ResolutionError("quadrature grid " + std::to_string(grid.n_theta) + "x" + std::to_string(grid.n_phi) +
                          " too coarse for l_max " + std::to_string(L));
  }
  const int P = grid.size();
  if (values.rows() != 3 * P) throw ShapeError("projection: expected 3 rows per grid point");
  const int ncols = static_cast<int>(values.cols());
  const int dim = basis.size();

  // Tangential and radial overlaps  <A_i, E> over the sphere, per wave family.
  Eigen::MatrixXcd p1 = Eigen::MatrixXcd::Zero(dim, ncols);
  Eigen::MatrixXcd p2 = Eigen::MatrixXcd::Zero(dim, ncols);
  Eigen::MatrixXcd p3 = Eigen::MatrixXcd::Zero(dim, ncols);
  constexpr int kChunk = 128;
  Eigen::MatrixXd b1, b2, b3;
  for (int start = 0; start < P; start += kChunk) {
    const int cnt = std::min(kChunk, P - start);
    b1.setZero(dim, 3 * cnt);
    b2.setZero(dim, 3 * cnt);
    b3.setZero(dim, 3 * cnt);
    for (int q = 0; q < cnt; ++q) {
      const int i = start + q;
      const double w = grid.weights[static_cast<std::size_t>(i)];
      const auto a = angular_set_at(L, grid.points[static_cast<std::size_t>(i)]);
      for (int n = 0; n < dim; ++n) {
        const auto h = vector_harmonics(a, basis[n].l, basis[n].m);
        b1.block<1, 3>(n, 3 * q) = w * h.a1.transpose();
        b2.block<1, 3>(n, 3 * q) = w * h.a2.transpose();
        b3.block<1, 3>(n, 3 * q) = w * h.a3.transpose();
      }
    }
    const auto vblock = values.middleRows(3 * start, 3 * cnt);
    p1.noalias() += b1.cast<cplx>() * vblock;
    p2.noalias() += b2.cast<cplx>() * vblock;
    p3.noalias() += b3.cast<cplx>() * vblock;
  }

  const auto rad = regular_radial(L, k * grid.radius);
  Eigen::MatrixXcd c(dim, ncols);
  for (int n = 0; n < dim; ++n) {
    const auto il = static_cast<std::size_t>(basis[n].l);
    if (basis[n].pol == Polarization::TE) {
      const double f = rad.te[il];
      if (k * grid.radius >= 0.5 * basis[n].l && std::abs(f) < 1e-10) {
        throw ResolutionError("projection radius sits on a zero of j_" + std::to_string(basis[n].l));
      }
      c.row(n) = p1.row(n) / f;
    } else {
      const double al = rad.tm_t[il];
      const double be = rad.tm_r[il];
      const double den = al * al + be * be;
      if (!(den > 0.0)) throw ResolutionError("projection radius too small for TM degree " + std::to_string(basis[n].l));
      c.row(n) = (al * p2.row(n) + be * p3.row(n)) / den;
    }
  }

  if (residuals) {
    residuals->assign(static_cast<std::size_t>(ncols), 0.0);
    Eigen::VectorXd num = Eigen::VectorXd::Zero(ncols);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(ncols);
    Eigen::MatrixXd vb;
    for (int start = 0; start < P; start += kChunk) {
      const int cnt = std::min(kChunk, P - start);
      vb.resize(3 * cnt, dim);
      for (int q = 0; q < cnt; ++q) {
        const auto& pt = grid.points[static_cast<std::size_t>(start + q)];
        const auto a = angular_set_at(L, pt);
        for (int n = 0; n < dim; ++n) vb.block<3, 1>(3 * q, n) = wave_from(a, rad, basis[n]);
      }
      const Eigen::MatrixXcd diff = values.middleRows(3 * start, 3 * cnt) - vb.cast<cplx>() * c;
      for (int q = 0; q < cnt; ++q) {
        const double w = grid.weights[static_cast<std::size_t>(start + q)];
        num += w * diff.middleRows(3 * q, 3).colwise().squaredNorm().transpose();
        den += w * values.middleRows(3 * (start + q), 3).colwise().squaredNorm().transpose();
      }
    }
    for (int j = 0; j < ncols; ++j) {
      (*residuals)[static_cast<std::size_t>(j)] = den(j) > 0.0 ? std::sqrt(num(j) / den(j)) : 0.0;
    }
  }
  return c;
}

Projection project_onto_regular(const SphereGrid& grid, std::span<const CVec3> values, double k,
                                const WaveBasis& basis) {
  if (static_cast<int>(values.size()) != grid.size()) throw ShapeError("projection: one value per grid point");
  Eigen::MatrixXcd v(3 * grid.size(), 1);
  for (int i = 0; i < grid.size(); ++i) v.block<3, 1>(3 * i, 0) = values[static_cast<std::size_t>(i)];
  std::vector<double> res;
  Projection out;
  out.coefficients = project_onto_regular(grid, v, k, basis, &res).col(0);
  out.residual = res.front();
  return out;
}

Projection project_onto_regular(const SphereGrid& grid, std::span<const FieldSample> samples, double k,
                                const WaveBasis& basis) {
  if (static_cast<int>(samples.size()) != grid.size()) throw ShapeError("projection: one sample per grid point");
  std::vector<CVec3> values;
  values.reserve(samples.size());
  for (int i = 0; i < grid.size(); ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if ((s.point - grid.points[static_cast<std::size_t>(i)]).norm() > 1e-9 * grid.radius) {
      throw ResolutionError("field samples do not lie on the quadrature grid");
    }
    if (!s.value.allFinite()) throw DomainError("non-finite field sample");
    values.push_back(s.value);
  }
  return project_onto_regular(grid, std::span<const CVec3>(values), k, basis);
}

}  // namespace subcm
