// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "subcm/dipole.hpp"
#include "subcm/hybrid.hpp"
#include "subcm/iterative.hpp"
#include "subcm/matching.hpp"
#include "subcm/mie.hpp"
#include "subcm/modes.hpp"
#include "support/hybrid_scenes.hpp"
#include "support/mie_oracle.hpp"
#include "support/reflection.hpp"
#include "support/scenes.hpp"

using namespace subcm;
using namespace subcm::testing;
namespace fs = std::filesystem;

namespace {

struct MieRef {
  int material;
  double eps_r;
  double ka;
  int l;
  int pol;
  double re;
  double im;
};

const MieRef kReference[] = {
#include "oracles/mie_reference.inc"
};

/// Tracks the worst value of a named quantity against its limit.
class Gauge {
 public:
  void add(const std::string& name, double value, double limit) {
    for (auto& e : entries_)
      if (e.name == name) {
        e.worst = std::max(e.worst, value);
        return;
      }
    entries_.push_back({name, value, limit});
  }
  void require(const std::string& what, bool ok) {
    if (!ok) failures_.push_back(what);
  }
  bool pass() const {
    if (!failures_.empty()) return false;
    for (const auto& e : entries_)
      if (!(e.worst <= e.limit)) return false;
    return true;
  }
  std::string summary() const {
    std::ostringstream s;
    s.precision(2);
    bool first = true;
    for (const auto& e : entries_) {
      s << (first ? "" : ", ") << e.name << " " << std::scientific << e.worst << "/" << e.limit;
      first = false;
    }
    for (const auto& f : failures_) s << (first ? "" : ", ") << "violated: " << f, first = false;
    return s.str();
  }

 private:
  struct Entry {
    std::string name;
    double worst;
    double limit;
  };
  std::vector<Entry> entries_;
  std::vector<std::string> failures_;
};

double max_t(const std::vector<cplx>& t) {
  double m = 1e-300;
  for (const auto& x : t) m = std::max(m, std::abs(x));
  return m;
}

/// Eigenvalues of M restricted to its column space: all nonzero eigenvalues of M.
std::vector<cplx> range_eigenvalues(const Eigen::MatrixXcd& m) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(m);
  qr.setThreshold(1e-13);
  const Eigen::Index r = qr.rank();
  if (r == 0) return {};
  const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.rows(), r);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(q.adjoint() * m * q, false);
  return {es.eigenvalues().begin(), es.eigenvalues().end()};
}

DipoleScene lossless_scene(int i) {
  std::mt19937_64 rng(1000 + static_cast<unsigned>(i));
  std::uniform_int_distribution<int> total(2, 30);
  const int n = total(rng);
  const int nb = std::uniform_int_distribution<int>(0, n - 1)(rng);
  SceneOptions o;
  o.n_background = nb;
  o.n_controllable = n - nb;
  o.radius = 1.0;
  o.min_spacing = 0.08;
  o.anisotropic = i % 2 == 1;
  return random_scene(rng, o);
}

struct SuiteScene {
  DipoleScene scene;
  double k = 1.0;
};

std::vector<SuiteScene> equivalence_suite() {
  std::vector<SuiteScene> out;
  for (int i = 0; i < 20; ++i) {
    std::mt19937_64 rng(2000 + static_cast<unsigned>(i));
    SceneOptions o;
    o.n_background = std::uniform_int_distribution<int>(2, 8)(rng);
    o.n_controllable = std::uniform_int_distribution<int>(2, 8)(rng);
    o.anisotropic = i % 2 == 0;
    SuiteScene s;
    s.scene = random_scene(rng, o);
    s.k = std::uniform_real_distribution<double>(0.4, 1.6)(rng);
    out.push_back(std::move(s));
  }
  return out;
}

// Criterion 1: Mie diagonals against the frozen high-precision table and a std-library
// implementation; exact (2l+1)-fold multiplicity of each (l, pol) entry.
void mie_oracle(Gauge& g) {
  struct Case {
    int material;
    double eps_r;
    double ka;
  };
  for (const Case c : {Case{0, 1.0, 0.5}, Case{0, 1.0, 1.0}, Case{0, 1.0, 2.0}, Case{1, 4.0, 0.5}, Case{1, 4.0, 1.0}}) {
    const SphereSpec spec = c.material == 0 ? SphereSpec{1.0, SphereMaterial::PEC}
                                            : SphereSpec{1.0, SphereMaterial::Dielectric, c.eps_r, 1.0};
    const auto b = basis(truncation_order(c.ka));
    const auto t = mie_tmatrix(spec, c.ka, b);
    int table_rows = 0;
    for (const auto& r : kReference) {
      if (r.material != c.material || r.ka != c.ka || r.eps_r != c.eps_r) continue;
      const auto pol = r.pol == 0 ? Polarization::TE : Polarization::TM;
      const cplx want(r.re, r.im);
      const int pos = *b.find(WaveIndex{r.l, 0, pol});
      g.add("table rel err", std::abs(t.data(pos, pos) - want) / std::abs(want), 1e-10);
      ++table_rows;
    }
    g.require("table covers every degree", table_rows == 2 * b.l_max());
    for (int l = 1; l <= b.l_max(); ++l)
      for (auto pol : {Polarization::TE, Polarization::TM}) {
        const cplx ref = std_mie(spec, c.ka, l, pol);
        const cplx got = t.data(*b.find(WaveIndex{l, 0, pol}), *b.find(WaveIndex{l, 0, pol}));
        // The std-library Bessel functions lose relative accuracy in the deep evanescent tail.
        if (std::abs(ref) > 1e-30) g.add("std rel err", std::abs(got - ref) / std::abs(ref), 1e-10);
        // Counted within the (l, pol) block: at ka = 2 the PEC TM entries of l = 1 and 2 coincide exactly.
        int mult = 0, block = 0;
        for (int n = 0; n < b.size(); ++n) {
          if (b[n].l != l || b[n].pol != pol) continue;
          ++block;
          if (t.data(n, n) == got) ++mult;
        }
        g.require("multiplicity 2l+1", block == 2 * l + 1 && mult == block);
      }
    const auto ms = mie_modeset(spec, c.ka, b);
    g.require("mode set size", ms.size() == b.size());
  }
}

// Criterion 2: lossless invariants on 50 random scenes.
void lossless(Gauge& g) {
  for (int i = 0; i < 50; ++i) {
    const auto scene = lossless_scene(i);
    std::mt19937_64 krng(3000 + static_cast<unsigned>(i));
    const double k = std::uniform_real_distribution<double>(0.15, 1.0)(krng) * 2.0 / scene.radius();
    const auto ts = transition(scene, k);
    g.add("|S^H S - I|", check_unitary(ts.s).deviation, 1e-8);
    g.add("|T^H T + Re T|", check_t_power(ts.t).deviation, 1e-8);
    const auto m = cm_scattering(ts.s, ts.s_b);
    double circle = 0.0;
    for (const auto& e : m.eigen) circle = std::max(circle, std::abs(e.t + 0.5) - 0.5);
    g.add("circle excess", circle, 1e-8);
    g.add("a orthonormality", orthonormality_deviation(m.a), 1e-8);
    g.add("f orthonormality", orthonormality_deviation(m.f), 1e-8);
  }
}

// Criteria 3-5 share the equivalence suite.
void equivalence(Gauge& g) {
  for (const auto& s : equivalence_suite()) {
    const auto blocks = assemble_impedance(s.scene, s.k);
    const auto ts = transition(blocks);
    const auto sca = cm_scattering(ts.s, ts.s_b).t_values();
    const auto tfm = cm_t_form(ts.t, ts.t_b, Representation::Excitation).t_values();
    const auto tilde = tilde_tmatrix(blocks);
    const auto til = range_eigenvalues(tilde.t_tilde.data);
    const auto imp = cm_impedance_substructure(blocks).t_values();
    const std::vector<std::pair<const char*, const std::vector<cplx>*>> paths{
        {"scattering", &sca}, {"t-form", &tfm}, {"tilde", &til}, {"impedance", &imp}};
    const double scale = max_t(sca);
    for (std::size_t i = 0; i < paths.size(); ++i)
      for (std::size_t j = i + 1; j < paths.size(); ++j)
        g.add("pairwise rel dev", match_spectra(*paths[i].second, *paths[j].second).max_deviation / scale, 1e-6);
    g.add("identity residual", tilde.identity_residual, 1e-8);
  }
}

void current_recovery(Gauge& g) {
  int counted = 0;
  for (const auto& s : equivalence_suite()) {
    const auto blocks = assemble_impedance(s.scene, s.k);
    const auto ts = transition(blocks);
    const auto m = cm_scattering(ts.s, ts.s_b);
    for (int n = 0; n < m.size(); ++n) {
      const cplx t = m.eigen[static_cast<std::size_t>(n)].t;
      if (std::abs(t) <= 1e-3) continue;
      g.add("controllable current rel diff", recover_currents(m.a.col(n), t, blocks).agreement, 1e-6);
      ++counted;
    }
  }
  g.require("modes with |t| > 1e-3 exist", counted > 0);
}

void power_identity(Gauge& g) {
  for (const auto& s : equivalence_suite()) {
    const auto ts = transition(s.scene, s.k);
    const auto m = cm_scattering(ts.s, ts.s_b);
    for (const auto& p : substructure_power_check(ts.t, ts.t_b, m)) g.add("power residual", p.residual, 1e-8);
  }
}

// Criterion 6: iterative top-5 against dense, and composed products against assembled operators.
void iterative(Gauge& g) {
  int used = 0;
  std::mt19937_64 rng(6000);
  std::normal_distribution<double> nd;
  for (const auto& s : equivalence_suite()) {
    const auto ts = transition(s.scene, s.k);
    if (ts.t.dim() > 300) continue;
    ++used;
    const auto dense = cm_scattering(ts.s, ts.s_b);
    const Eigen::MatrixXcd tbh = ts.t_b.data.adjoint();
    const Eigen::MatrixXcd t_op = 2.0 * tbh * ts.t.data + tbh + ts.t.data;
    const Eigen::MatrixXcd s_op = ts.s_b.data.adjoint() * ts.s.data;
    for (const auto& [oracle, op] : {std::pair{dense_oracle(ts.t, ts.t_b), &t_op}, std::pair{dense_oracle(ts.s, ts.s_b), &s_op}}) {
      for (int p = 0; p < 3; ++p) {
        Eigen::VectorXcd x(oracle.dim);
        for (auto& v : x) v = cplx(nd(rng), nd(rng));
        const Eigen::VectorXcd want = *op * x;
        g.add("composed_matvec rel err", (composed_matvec(oracle, x) - want).norm() / want.norm(), 1e-12);
      }
      IterationOptions io;
      io.n_modes = 5;
      const auto res = iterate(oracle, io);
      g.require("converged", res.converged);
      g.add("iterations", res.state.m, 60);
      for (int n = 0; n < std::min(5, res.modes.size()); ++n) {
        const auto un = static_cast<std::size_t>(n);
        g.add("top-5 |t| dev", std::abs(res.modes.eigen[un].modal_significance() - dense.eigen[un].modal_significance()),
              1e-6);
      }
    }
  }
  g.require("at least 5 scenes with dim <= 300", used >= 5);
}

// Criterion 7: parity-filtered ground plane against the explicit mirrored scene.
void ground_plane(Gauge& g) {
  for (int i = 0; i < 10; ++i) {
    std::mt19937_64 rng(7000 + static_cast<unsigned>(i));
    SceneOptions o{3 + i % 3, 3, 1.0, 0.1, i % 2 == 1, 0.1};
    auto scene = random_scene(rng, o);
    scene.ground_plane = true;
    const double k = 0.8 + 0.08 * i;
    const auto folded = assemble_impedance(scene, k);
    const auto gp = cm_ground_plane(folded);
    const auto mirrored = mirror_scene(scene);
    const auto full = transition(assemble_impedance(mirrored.scene, k, folded.basis));
    const auto refl = reflection_operator(folded.basis, k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (refl + refl.adjoint()));
    std::vector<int> odd;
    for (int j = 0; j < es.eigenvalues().size(); ++j)
      if (es.eigenvalues()(j) < 0.0) odd.push_back(j);
    g.require("odd subspace matches the parity filter", static_cast<int>(odd.size()) == gp.size());
    if (static_cast<int>(odd.size()) != gp.size()) continue;
    const Eigen::MatrixXcd q = es.eigenvectors()(Eigen::all, odd);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ce(q.adjoint() * full.s_b.data.adjoint() * full.s.data * q, false);
    std::vector<cplx> brute;
    for (int j = 0; j < ce.eigenvalues().size(); ++j) brute.push_back((ce.eigenvalues()(j) - 1.0) / 2.0);
    g.add("mirrored |dt|", match_spectra(gp.t_values(), brute).max_deviation, 1e-8);
    const auto keep = ground_plane_filter(folded.basis);
    Eigen::MatrixXcd emb = Eigen::MatrixXcd::Zero(folded.basis.size(), gp.size());
    emb(keep, Eigen::all) = gp.a;
    g.add("forbidden content", (0.5 * (emb + refl * emb)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

// Criterion 8: hybrid dipole cloud and sphere.
void hybrid(Gauge& g) {
  const SphereSpec eps4{0.3, SphereMaterial::Dielectric, 4.0, 1.0};
  std::mt19937_64 rng(8000);
  for (double k : {0.9, 1.8}) {
    const auto hs = shell_scene(rng, eps4, 4, 5, 0.6, 1.0, 0.02);
    const auto imp = hybrid_impedance_modes(hs, k);
    const auto sca = hybrid_scattering_modes(hs, k);
    double worst = match_spectra(imp.t_values(), sca.t_values()).max_deviation;
    for (int n = 0; n < std::min(imp.size(), sca.size()); ++n) {
      const auto un = static_cast<std::size_t>(n);
      worst = std::max(worst, std::abs(imp.eigen[un].modal_significance() - sca.eigen[un].modal_significance()));
    }
    g.add("impedance vs scattering", worst, 1e-5);
  }
  {
    const auto hs = shell_scene(rng, SphereSpec{0.3, SphereMaterial::Dielectric, 1.0, 1.0}, 4, 5, 0.6, 1.0, 0.02);
    const double k = 1.4;
    const auto blocks = assemble_impedance(hs.mom_scene, k);
    const auto ts = transition(blocks);
    g.add("vacuum sphere vs MoM",
          std::max(match_spectra(hybrid_scattering_modes(hs, k).t_values(), cm_scattering(ts.s, ts.s_b).t_values()).max_deviation,
                   match_spectra(hybrid_impedance_modes(hs, k).t_values(), cm_impedance_substructure(blocks).t_values())
                       .max_deviation),
          1e-10);
  }
  {
    HybridScene hs;
    hs.sphere = eps4;
    const double k = 3.0;
    const auto ts = transition(hybrid_blocks(hs, k));
    const auto mie = mie_tmatrix(hs.sphere, k, ts.t.basis);
    g.add("sphere only vs Mie", (ts.t.data - mie.data).cwiseAbs().maxCoeff(), 1e-8);
  }
}

// Criterion 9: ports on mirror-symmetric scenes.
void ports(Gauge& g) {
  int unchanged = 0;
  for (int i = 0; i < 5; ++i) {
    std::mt19937_64 rng(9000 + static_cast<unsigned>(i));
    auto scene = symmetric_scene(rng, 2 + i % 2, 2, 1.0);
    const double k = 1.0 + 0.2 * i;
    const auto plain = assemble_impedance(scene, k);
    const auto tp = transition(plain);
    auto m0 = cm_scattering(tp.s, tp.s_b);
    attach_currents(m0, plain);
    scene.ports.push_back({0, 2, 50.0 + 25.0 * i, 0.1});
    g.add("generalized S unitarity", check_unitary(generalized_scattering(scene, k)).deviation, 1e-8);
    const auto tq = transition(assemble_impedance(scene, k));
    const auto m1 = cm_scattering(tq.s, tq.s_b);
    int port_unknown = -1;
    for (int u = 0; u < plain.n(); ++u)
      if (plain.dipole_of_unknown[static_cast<std::size_t>(u)] == 0 && plain.axis_of_unknown[static_cast<std::size_t>(u)] == 2)
        port_unknown = u;
    for (int n = 0; n < m0.size(); ++n) {
      const cplx t = m0.eigen[static_cast<std::size_t>(n)].t;
      const Eigen::VectorXcd cur = m0.currents->col(n);
      if (std::abs(t) < 1e-6 || std::abs(cur(port_unknown)) >= 1e-10 * cur.norm()) continue;
      double best = 1e300;
      for (const auto& e : m1.eigen) best = std::min(best, std::abs(e.t - t));
      g.add("unchanged |dt|", best, 1e-8);
      ++unchanged;
    }
  }
  g.require("modes without port current exist", unchanged > 0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Criterion 10: two CLI runs of every sample scenario, one serial and one threaded.
void determinism(Gauge& g) {
  const fs::path root = fs::temp_directory_path() / "subcm_acceptance_determinism";
  fs::remove_all(root);
  int scenarios = 0;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(SUBCM_SCENARIO_DIR))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const fs::path a = root / f.stem() / "a", b = root / f.stem() / "b";
    for (const auto& [dir, jobs] : {std::pair{a, 1}, std::pair{b, 4}}) {
      const std::string cmd = std::string("\"") + SUBCM_CLI + "\" run --scenario \"" + f.string() + "\" --out \"" +
                              dir.string() + "\" --jobs " + std::to_string(jobs) + " --seed 42 --dump-vectors > /dev/null";
      g.require("run " + f.filename().string(), std::system(cmd.c_str()) == 0);
    }
    for (const char* out : {"modes.csv", "diagnostics.json", "vectors.json"}) {
      const std::string x = slurp(a / out), y = slurp(b / out);
      g.require(f.stem().string() + "/" + out + " identical", !x.empty() && x == y);
      g.add("differing output files", x == y ? 0.0 : 1.0, 0.0);
    }
    ++scenarios;
  }
  g.require("sample scenarios found", scenarios > 0);
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime limit
  std::function<void(Gauge&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Mie oracle", 1.0, mie_oracle},
      {2, "lossless invariants", 30.0, lossless},
      {3, "equivalence suite", 0.0, equivalence},
      {4, "current recovery", 0.0, current_recovery},
      {5, "power identity", 0.0, power_identity},
      {6, "iterative solver", 60.0, iterative},
      {7, "ground plane", 0.0, ground_plane},
      {8, "hybrid sphere", 120.0, hybrid},
      {9, "ports", 0.0, ports},
      {10, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Gauge g;
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run(g);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
    const bool ok = error.empty() && g.pass() && in_time;
    failed += ok ? 0 : 1;
    char head[96];
    std::snprintf(head, sizeof head, "%s criterion %2d  %-20s %7.2f s", ok ? "PASS" : "FAIL", c.id, c.name, secs);
    std::cout << head;
    if (c.budget_s > 0.0) std::cout << " (limit " << c.budget_s << " s)";
    std::cout << "  " << (error.empty() ? g.summary() : "error: " + error) << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
