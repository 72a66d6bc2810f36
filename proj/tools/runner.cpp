#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "subcm/errors.hpp"
#include "subcm/hybrid.hpp"
#include "subcm/iterative.hpp"
#include "subcm/matching.hpp"

namespace subcm::cli {

namespace {

double wavenumber(double frequency_hz) { return 2.0 * std::numbers::pi * frequency_hz / kSpeedOfLight; }

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Run fn(i) for i in [0, n) on `jobs` threads. The first failure in index order is rethrown.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, std::max(n, 1));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

HybridScene hybrid_scene(const Scenario& sc) { return HybridScene{sc.scene, *sc.sphere}; }

WaveBasis sweep_basis(const Scenario& sc) {
  const double k_max = wavenumber(sc.sweep.f_max);
  return sc.sphere ? hybrid_basis(hybrid_scene(sc), k_max) : scene_basis(sc.scene, k_max);
}

BlockImpedance build_blocks(const Scenario& sc, double k, const WaveBasis& basis) {
  return sc.sphere ? hybrid_blocks(hybrid_scene(sc), k, basis) : assemble_impedance(sc.scene, k, basis);
}

ModeOptions mode_options(const Scenario& sc) {
  ModeOptions o;
  o.unitary_tol = sc.tol.unitary;
  o.cancellation_tol = sc.tol.cancellation;
  return o;
}

/// T-form oracle whose callbacks solve the impedance systems instead of forming T.
ScatterOracle impedance_oracle(const BlockImpedance& blocks) {
  auto lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXcd>>(blocks.z);
  auto u = std::make_shared<Eigen::MatrixXcd>(blocks.u);
  ScatterOracle o;
  o.kind = OracleForm::TForm;
  o.dim = blocks.wave_dim();
  o.basis = blocks.basis;
  o.port_count = blocks.port_count;
  o.apply = [lu, u](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return -(*u) * lu->solve(u->transpose() * x);
  };
  if (blocks.nb > 0) {
    auto lub = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXcd>>(blocks.zbb());
    auto ub = std::make_shared<Eigen::MatrixXcd>(blocks.ub());
    o.apply_background = [lub, ub](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
      return -(*ub) * lub->solve(ub->transpose() * x);
    };
  } else {
    o.apply_background = [](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return Eigen::VectorXcd::Zero(x.size()); };
  }
  return o;
}

double circle_deviation(cplx t) { return std::abs(std::abs(t + 0.5) - 0.5); }

/// max_m |a_m^H a_n - delta_mn| over the nonzero columns, per column n.
std::vector<double> column_orthogonality(const Eigen::MatrixXcd& a) {
  const Eigen::MatrixXcd g = a.adjoint() * a;
  std::vector<double> out(static_cast<std::size_t>(a.cols()), 0.0);
  for (Eigen::Index n = 0; n < a.cols(); ++n) {
    if (a.col(n).norm() == 0.0) continue;
    double worst = 0.0;
    for (Eigen::Index m = 0; m < a.cols(); ++m) {
      if (a.col(m).norm() == 0.0) continue;
      worst = std::max(worst, std::abs(g(m, n) - (m == n ? 1.0 : 0.0)));
    }
    out[static_cast<std::size_t>(n)] = worst;
  }
  return out;
}

PointResult solve_point(const Scenario& sc, double frequency_hz, const WaveBasis& basis, const RunOptions& opts) {
  PointResult pr;
  pr.frequency_hz = frequency_hz;
  const double k = wavenumber(frequency_hz);
  const BlockImpedance blocks = build_blocks(sc, k, basis);
  const auto ts = transition(blocks);
  const ModeOptions mo = mode_options(sc);
  auto& d = pr.diagnostics;

  switch (sc.solver) {
    case Solver::DenseScattering:
    case Solver::HybridScattering:
      pr.modes = sc.scene.ground_plane ? cm_ground_plane(blocks, mo) : cm_scattering(ts.s, ts.s_b, mo);
      break;
    case Solver::DenseImpedance:
    case Solver::HybridImpedance:
      pr.modes = cm_impedance_substructure(blocks, mo);
      break;
    case Solver::TForm:
      pr.modes = cm_t_form(ts.t, ts.t_b, Representation::Excitation, mo);
      break;
    case Solver::Iterative: {
      IterationOptions io;
      io.max_iter = sc.tol.max_iter;
      io.n_modes = sc.n_modes;
      io.tol_residual = sc.tol.iter_residual;
      io.tol_eig = sc.tol.iter_eig;
      io.seed = opts.seed;
      const auto res = iterate(impedance_oracle(blocks), io);
      pr.modes = res.modes;
      d["converged"] = res.converged;
      d["iterations"] = res.state.m;
      d["oracle_calls"] = res.oracle_calls;
      d["final_residual"] = res.log.empty() ? 0.0 : res.log.back().residual;
      break;
    }
  }
  pr.modes.frequency = frequency_hz;

  d["frequency_hz"] = frequency_hz;
  d["k"] = k;
  d["dim"] = blocks.wave_dim();
  d["unknowns"] = blocks.n();
  d["unitarity_s"] = check_unitary(ts.s).deviation;
  d["unitarity_s_b"] = check_unitary(ts.s_b).deviation;
  d["t_power"] = check_t_power(ts.t).deviation;
  if (pr.modes.a.rows() == ts.t.dim() && pr.modes.size() > 0) {
    double worst = 0.0;
    for (const auto& p : substructure_power_check(ts.t, ts.t_b, pr.modes)) worst = std::max(worst, p.residual);
    d["power_residual"] = worst;
  }
  if (blocks.nc > 0) d["identity_residual"] = tilde_tmatrix(blocks).identity_residual;
  if (sc.sphere) d["factorization_residual"] = factorization_residual(blocks);
  double circle = 0.0;
  for (const auto& e : pr.modes.eigen) circle = std::max(circle, circle_deviation(e.t));
  d["circle_deviation"] = circle;
  d["orthonormality"] = pr.modes.size() > 0 ? orthonormality_deviation(pr.modes.a) : 0.0;
  for (const auto& [name, value] : pr.modes.diagnostics) d[name] = value;
  d["general_solver_fallback"] = pr.modes.general_solver_fallback;
  d["indefinite_radiation"] = pr.modes.indefinite_radiation;
  return pr;
}

int emitted(const ModeSet& m, int n_modes) { return std::min(m.size(), n_modes); }

struct CsvRow {
  std::string frequency;
  double frequency_hz = 0.0;
  int rank = 0;
  cplx t;
};

std::filesystem::path resolve_csv(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) ? p / "modes.csv" : p;
}

/// Rows grouped by frequency, in file order.
std::vector<std::vector<CsvRow>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ShapeError(path.string() + ": cannot open result file");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ShapeError(path.string() + ": unexpected CSV header");
  std::vector<std::vector<CsvRow>> groups;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() != 10) throw ShapeError(path.string() + ":" + std::to_string(line_no) + ": expected 10 columns");
    CsvRow r;
    try {
      r.frequency = cols[0];
      r.frequency_hz = std::stod(cols[0]);
      r.rank = std::stoi(cols[2]);
      r.t = cplx(std::stod(cols[3]), std::stod(cols[4]));
    } catch (const std::exception&) {
      throw ShapeError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (groups.empty() || groups.back().front().frequency != r.frequency) groups.emplace_back();
    groups.back().push_back(r);
  }
  return groups;
}

class CheckTable {
 public:
  void add(const std::string& name, double value, double threshold) {
    auto it = std::find_if(lines_.begin(), lines_.end(), [&](const CheckLine& l) { return l.name == name; });
    if (it == lines_.end()) {
      lines_.push_back({name, 0.0, threshold, true});
      it = std::prev(lines_.end());
    }
    it->worst = std::max(it->worst, value);
    it->pass = it->pass && value <= threshold;
  }
  void merge(const CheckTable& other) {
    for (const auto& l : other.lines_) add(l.name, l.worst, l.threshold);
  }
  std::vector<CheckLine> lines() const { return lines_; }

 private:
  std::vector<CheckLine> lines_;
};

std::vector<cplx> eigenvalues_of(const std::vector<EigenTriple>& e) {
  std::vector<cplx> out;
  for (const auto& x : e) out.push_back(x.t);
  return out;
}

CheckTable check_point(const Scenario& sc, double frequency_hz, const WaveBasis& basis) {
  CheckTable tab;
  constexpr double tol = 1e-8;
  const double equiv_tol = sc.sphere ? 1e-5 : 1e-6;
  const double k = wavenumber(frequency_hz);
  const BlockImpedance blocks = build_blocks(sc, k, basis);
  const auto ts = transition(blocks);
  tab.add("unitarity S", check_unitary(ts.s).deviation, tol);
  tab.add("unitarity S_b", check_unitary(ts.s_b).deviation, tol);
  tab.add("T power", check_t_power(ts.t).deviation, tol);
  tab.add("T_b power", check_t_power(ts.t_b).deviation, tol);
  if (sc.sphere) tab.add("hybrid factorization", factorization_residual(blocks), tol);

  const ModeSet ms = sc.scene.ground_plane ? cm_ground_plane(blocks) : cm_scattering(ts.s, ts.s_b);
  double circle = 0.0;
  for (const auto& e : ms.eigen) circle = std::max(circle, circle_deviation(e.t));
  tab.add("eigenvalue circle", circle, tol);
  if (ms.size() > 0) {
    tab.add("orthonormal excitations", orthonormality_deviation(ms.a), tol);
    tab.add("orthonormal fields", orthonormality_deviation(ms.f), tol);
  }
  if (auto leak = ms.diagnostic("parity_leakage")) tab.add("forbidden parity content", *leak, 1e-10);
  const bool full_dim = ms.a.rows() == ts.t.dim();
  if (full_dim && ms.size() > 0) {
    double worst = 0.0;
    for (const auto& p : substructure_power_check(ts.t, ts.t_b, ms)) worst = std::max(worst, p.residual);
    tab.add("power identity", worst, tol);
  }
  if (blocks.nc == 0) return tab;

  const auto tilde = tilde_tmatrix(blocks);
  tab.add("identity residual", tilde.identity_residual, tol);
  // Nonzero spectrum of -U~ Z~^-1 U~^H from the controllable-size product -Z~^-1 U~^H U~.
  const SchurSystem sys = schur_system(blocks);
  const Eigen::MatrixXcd small =
      -solve_checked(sys.z_tilde, sys.u_tilde.adjoint() * sys.u_tilde, "Schur complement Z~");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(small, false);
  std::vector<cplx> tilde_t(es.eigenvalues().begin(), es.eigenvalues().end());
  const auto scat = eigenvalues_of(ms.eigen);
  const auto tform = eigenvalues_of(cm_t_form(ts.t, ts.t_b, Representation::Excitation).eigen);
  const auto imp = eigenvalues_of(cm_impedance_substructure(blocks).eigen);
  double scale = 1e-300;
  for (const auto& t : scat) scale = std::max(scale, std::abs(t));
  const std::vector<std::pair<const char*, const std::vector<cplx>*>> paths{
      {"t-form", &tform}, {"tilde T", &tilde_t}, {"impedance", &imp}};
  for (const auto& [name, vals] : paths) {
    tab.add(std::string("scattering vs ") + name, match_spectra(scat, *vals).max_deviation / scale, equiv_tol);
  }
  if (full_dim) {
    double worst = 0.0;
    for (int n = 0; n < ms.size(); ++n) {
      const cplx t = ms.eigen[static_cast<std::size_t>(n)].t;
      if (std::abs(t) <= 1e-3) continue;
      worst = std::max(worst, recover_currents(ms.a.col(n), t, blocks).agreement);
    }
    tab.add("current recovery", worst, 1e-6);
  }
  return tab;
}

}  // namespace

RunResult run_sweep(const Scenario& sc, const RunOptions& opts) {
  sc.check_compatibility();
  if (sc.sphere) {
    hybrid_scene(sc).validate();
  } else {
    sc.scene.validate();
  }
  const auto freqs = sc.sweep.frequencies();
  const WaveBasis basis = sweep_basis(sc);
  RunResult r;
  r.points.resize(freqs.size());
  parallel_for(static_cast<int>(freqs.size()), opts.jobs, [&](int i) {
    r.points[static_cast<std::size_t>(i)] = solve_point(sc, freqs[static_cast<std::size_t>(i)], basis, opts);
  });
  std::vector<ModeSet> sweep;
  sweep.reserve(r.points.size());
  for (const auto& p : r.points) sweep.push_back(p.modes);
  r.tracks = track_modes(sweep);
  return r;
}

std::string format_csv(const RunResult& r, int n_modes) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (std::size_t f = 0; f < r.points.size(); ++f) {
    const auto& p = r.points[f];
    const auto orth = column_orthogonality(p.modes.a);
    for (int n = 0; n < emitted(p.modes, n_modes); ++n) {
      const auto un = static_cast<std::size_t>(n);
      const auto& e = p.modes.eigen[un];
      const double lambda = e.lambda_infinite ? std::numeric_limits<double>::infinity() : e.lambda.real();
      const bool cancel = un < p.modes.cancellation_sensitive.size() && p.modes.cancellation_sensitive[un];
      out += fmt(p.frequency_hz) + "," + std::to_string(r.tracks.trace_of[f][un]) + "," + std::to_string(n) + "," +
             fmt(e.t.real()) + "," + fmt(e.t.imag()) + "," + fmt(e.modal_significance()) + "," + fmt(lambda) + "," +
             fmt(circle_deviation(e.t)) + "," + fmt(orth[un]) + "," + (cancel ? "1" : "0") + "\n";
    }
  }
  return out;
}

nlohmann::ordered_json diagnostics_json(const Scenario& sc, const RunResult& r, const RunOptions& opts) {
  nlohmann::ordered_json j;
  j["version"] = kScenarioVersion;
  j["solver"] = to_string(sc.solver);
  j["seed"] = opts.seed;
  j["n_points"] = r.points.size();
  j["n_traces"] = r.tracks.n_traces;
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : r.points) pts.push_back(p.diagnostics);
  return j;
}

nlohmann::ordered_json vectors_json(const RunResult& r, int n_modes) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < r.points.size(); ++f) {
    const auto& p = r.points[f];
    nlohmann::ordered_json point;
    point["frequency_hz"] = p.frequency_hz;
    auto& modes = point["modes"] = nlohmann::ordered_json::array();
    for (int n = 0; n < emitted(p.modes, n_modes); ++n) {
      nlohmann::ordered_json m;
      m["mode_rank"] = n;
      m["trace_id"] = r.tracks.trace_of[f][static_cast<std::size_t>(n)];
      const cplx t = p.modes.eigen[static_cast<std::size_t>(n)].t;
      m["t"] = {t.real(), t.imag()};
      auto& a = m["a"] = nlohmann::ordered_json::array();
      for (Eigen::Index i = 0; i < p.modes.a.rows(); ++i) a.push_back({p.modes.a(i, n).real(), p.modes.a(i, n).imag()});
      modes.push_back(std::move(m));
    }
    j.push_back(std::move(point));
  }
  return j;
}

void write_outputs(const Scenario& sc, const RunResult& r, const RunOptions& opts, const std::filesystem::path& dir,
                   bool dump_vectors) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error((dir / name).string() + ": cannot write");
    out << text;
  };
  write("modes.csv", format_csv(r, sc.n_modes));
  write("diagnostics.json", diagnostics_json(sc, r, opts).dump(2) + "\n");
  if (dump_vectors) write("vectors.json", vectors_json(r, sc.n_modes).dump() + "\n");
}

CompareReport compare_results(const std::filesystem::path& a, const std::filesystem::path& b, double tol) {
  const auto ga = read_csv(resolve_csv(a));
  const auto gb = read_csv(resolve_csv(b));
  if (ga.size() != gb.size()) {
    throw ShapeError("frequency grids differ: " + std::to_string(ga.size()) + " vs " + std::to_string(gb.size()) +
                     " points");
  }
  CompareReport rep;
  double sum = 0.0;
  for (std::size_t f = 0; f < ga.size(); ++f) {
    const double fa = ga[f].front().frequency_hz, fb = gb[f].front().frequency_hz;
    if (std::abs(fa - fb) > 1e-12 * std::max(std::abs(fa), std::abs(fb))) {
      throw ShapeError("frequency grids differ at point " + std::to_string(f) + ": " + ga[f].front().frequency +
                       " vs " + gb[f].front().frequency);
    }
    const std::size_t n = std::min(ga[f].size(), gb[f].size());
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::abs(ga[f][i].t - gb[f][j].t);
    const auto pairing = optimal_assignment(cost);
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = cost(static_cast<Eigen::Index>(i), pairing[i]);
      sum += dev;
      ++rep.matched;
      if (rep.worst_mode_rank < 0 || dev > rep.max_deviation) {
        rep.max_deviation = dev;
        rep.worst_frequency_hz = fa;
        rep.worst_mode_rank = ga[f][i].rank;
      }
    }
  }
  rep.mean_deviation = rep.matched > 0 ? sum / rep.matched : 0.0;
  rep.pass = rep.max_deviation <= tol;
  return rep;
}

std::vector<CheckLine> run_checks(const Scenario& sc, const RunOptions& opts) {
  sc.check_compatibility();
  if (sc.sphere) {
    hybrid_scene(sc).validate();
  } else {
    sc.scene.validate();
  }
  const auto freqs = sc.sweep.frequencies();
  const WaveBasis basis = sweep_basis(sc);
  std::vector<CheckTable> tables(freqs.size());
  parallel_for(static_cast<int>(freqs.size()), opts.jobs, [&](int i) {
    tables[static_cast<std::size_t>(i)] = check_point(sc, freqs[static_cast<std::size_t>(i)], basis);
  });
  CheckTable all;
  for (const auto& t : tables) all.merge(t);
  return all.lines();
}

}  // namespace subcm::cli
