#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace subcm::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw ScenarioError(origin + ": " + msg);
}

struct Reader {
  std::string origin;

  const json& require(const json& obj, const std::string& path, const char* key) const {
    const std::string name = path.empty() ? key : path + "." + key;
    if (!obj.is_object()) fail(origin, "field '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(origin, "missing field '" + name + "'");
    return *it;
  }

  const json* optional(const json& obj, const char* key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  double number(const json& v, const std::string& name) const {
    if (!v.is_number()) fail(origin, "field '" + name + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(origin, "field '" + name + "' must be finite");
    return x;
  }

  int integer(const json& v, const std::string& name) const {
    if (!v.is_number_integer()) fail(origin, "field '" + name + "' must be an integer");
    return v.get<int>();
  }

  bool boolean(const json& v, const std::string& name) const {
    if (!v.is_boolean()) fail(origin, "field '" + name + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const json& v, const std::string& name) const {
    if (!v.is_string()) fail(origin, "field '" + name + "' must be a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const json& v, const std::string& name) const {
    if (!v.is_array() || v.size() != 3) fail(origin, "field '" + name + "' must be an array of 3 numbers");
    return Vec3(number(v[0], name + "[0]"), number(v[1], name + "[1]"), number(v[2], name + "[2]"));
  }

  /// Scalar (isotropic), 3 numbers (diagonal) or 3 rows of 3 numbers.
  Eigen::Matrix3d polarizability(const json& v, const std::string& name) const {
    if (v.is_number()) return number(v, name) * Eigen::Matrix3d::Identity();
    if (v.is_array() && v.size() == 3 && v[0].is_number()) return vec3(v, name).asDiagonal();
    if (v.is_array() && v.size() == 3) {
      Eigen::Matrix3d a;
      for (int i = 0; i < 3; ++i) a.row(i) = vec3(v[static_cast<std::size_t>(i)], name + "[" + std::to_string(i) + "]");
      return a;
    }
    fail(origin, "field '" + name + "' must be a number, 3 numbers or a 3x3 array");
  }
};

Solver parse_solver(const std::string& s, const std::string& origin) {
  if (s == "dense-scattering") return Solver::DenseScattering;
  if (s == "dense-impedance") return Solver::DenseImpedance;
  if (s == "t-form") return Solver::TForm;
  if (s == "iterative") return Solver::Iterative;
  if (s == "hybrid-impedance") return Solver::HybridImpedance;
  if (s == "hybrid-scattering") return Solver::HybridScattering;
  fail(origin, "field 'solver' has unknown value '" + s +
                   "' (expected dense-scattering, dense-impedance, t-form, iterative, hybrid-impedance or "
                   "hybrid-scattering)");
}

}  // namespace

std::string to_string(Solver s) {
  switch (s) {
    case Solver::DenseScattering: return "dense-scattering";
    case Solver::DenseImpedance: return "dense-impedance";
    case Solver::TForm: return "t-form";
    case Solver::Iterative: return "iterative";
    case Solver::HybridImpedance: return "hybrid-impedance";
    case Solver::HybridScattering: return "hybrid-scattering";
  }
  return "unknown";
}

std::vector<double> Sweep::frequencies() const {
  std::vector<double> f(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    f[static_cast<std::size_t>(i)] = n_points == 1 ? f_min : f_min + (f_max - f_min) * i / (n_points - 1);
  }
  return f;
}

void Scenario::check_compatibility() const {
  std::vector<std::string> problems;
  const bool hybrid = solver == Solver::HybridImpedance || solver == Solver::HybridScattering;
  if (hybrid && !sphere) problems.push_back(to_string(solver) + " requires a sphere");
  if (!hybrid && sphere) problems.push_back("a sphere requires hybrid-impedance or hybrid-scattering");
  if (!scene.ports.empty() && solver != Solver::DenseScattering) {
    problems.push_back("ports require dense-scattering");
  }
  if (scene.ground_plane && solver != Solver::DenseScattering && solver != Solver::DenseImpedance) {
    problems.push_back("a ground plane requires dense-scattering or dense-impedance");
  }
  if (problems.empty()) return;
  std::string msg = "solver '" + to_string(solver) + "' is incompatible with the scene:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ScenarioError(msg);
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // The library message already carries line and column.
    fail(origin, e.what());
  }
  const Reader r{origin};
  if (!root.is_object()) fail(origin, "top level must be an object");

  Scenario sc;
  sc.version = r.integer(r.require(root, "", "version"), "version");
  if (sc.version != kScenarioVersion) {
    fail(origin, "unsupported version " + std::to_string(sc.version) + " (expected " + std::to_string(kScenarioVersion) + ")");
  }

  const json& scene = r.require(root, "", "scene");
  const json& dipoles = r.require(scene, "scene", "dipoles");
  if (!dipoles.is_array()) fail(origin, "field 'scene.dipoles' must be an array");
  for (std::size_t i = 0; i < dipoles.size(); ++i) {
    const std::string path = "scene.dipoles[" + std::to_string(i) + "]";
    const json& d = dipoles[i];
    const Vec3 pos = r.vec3(r.require(d, path, "position"), path + ".position");
    const Eigen::Matrix3d alpha = r.polarizability(r.require(d, path, "polarizability"), path + ".polarizability");
    Region region = Region::Controllable;
    if (const json* v = r.optional(d, "region")) {
      const std::string s = r.string(*v, path + ".region");
      if (s == "background") {
        region = Region::Background;
      } else if (s != "controllable") {
        fail(origin, "field '" + path + ".region' must be 'controllable' or 'background'");
      }
    }
    sc.scene.add(pos, alpha, region);
  }
  if (const json* v = r.optional(scene, "ground_plane")) sc.scene.ground_plane = r.boolean(*v, "scene.ground_plane");
  if (const json* ports = r.optional(scene, "ports")) {
    if (!ports->is_array()) fail(origin, "field 'scene.ports' must be an array");
    for (std::size_t i = 0; i < ports->size(); ++i) {
      const std::string path = "scene.ports[" + std::to_string(i) + "]";
      const json& p = (*ports)[i];
      Port port;
      port.dipole = r.integer(r.require(p, path, "dipole"), path + ".dipole");
      if (const json* v = r.optional(p, "axis")) port.axis = r.integer(*v, path + ".axis");
      if (const json* v = r.optional(p, "z0")) port.z0 = r.number(*v, path + ".z0");
      if (const json* v = r.optional(p, "length")) port.length = r.number(*v, path + ".length");
      sc.scene.ports.push_back(port);
    }
  }
  if (const json* s = r.optional(scene, "sphere")) {
    SphereSpec sp;
    sp.radius = r.number(r.require(*s, "scene.sphere", "radius"), "scene.sphere.radius");
    const std::string mat = r.string(r.require(*s, "scene.sphere", "material"), "scene.sphere.material");
    if (mat == "pec") {
      sp.material = SphereMaterial::PEC;
    } else if (mat == "dielectric") {
      sp.material = SphereMaterial::Dielectric;
      sp.eps_r = r.number(r.require(*s, "scene.sphere", "eps_r"), "scene.sphere.eps_r");
      if (const json* v = r.optional(*s, "mu_r")) sp.mu_r = r.number(*v, "scene.sphere.mu_r");
    } else {
      fail(origin, "field 'scene.sphere.material' must be 'pec' or 'dielectric'");
    }
    sc.sphere = sp;
  }

  const json& sweep = r.require(root, "", "sweep");
  sc.sweep.f_min = r.number(r.require(sweep, "sweep", "f_min"), "sweep.f_min");
  sc.sweep.f_max = r.number(r.require(sweep, "sweep", "f_max"), "sweep.f_max");
  sc.sweep.n_points = r.integer(r.require(sweep, "sweep", "n_points"), "sweep.n_points");
  if (!(sc.sweep.f_min > 0.0)) fail(origin, "field 'sweep.f_min' must be positive");
  if (sc.sweep.f_min > sc.sweep.f_max) fail(origin, "field 'sweep.f_min' exceeds 'sweep.f_max'");
  if (sc.sweep.n_points < 1) fail(origin, "field 'sweep.n_points' must be at least 1");

  sc.solver = parse_solver(r.string(r.require(root, "", "solver"), "solver"), origin);
  if (const json* v = r.optional(root, "n_modes")) sc.n_modes = r.integer(*v, "n_modes");
  if (sc.n_modes < 1) fail(origin, "field 'n_modes' must be at least 1");
  if (const json* t = r.optional(root, "tolerances")) {
    if (!t->is_object()) fail(origin, "field 'tolerances' must be an object");
    if (const json* v = r.optional(*t, "unitary")) sc.tol.unitary = r.number(*v, "tolerances.unitary");
    if (const json* v = r.optional(*t, "cancellation")) sc.tol.cancellation = r.number(*v, "tolerances.cancellation");
    if (const json* v = r.optional(*t, "iter_residual")) sc.tol.iter_residual = r.number(*v, "tolerances.iter_residual");
    if (const json* v = r.optional(*t, "iter_eig")) sc.tol.iter_eig = r.number(*v, "tolerances.iter_eig");
    if (const json* v = r.optional(*t, "max_iter")) sc.tol.max_iter = r.integer(*v, "tolerances.max_iter");
  }
  if (const json* v = r.optional(root, "output")) sc.output = r.string(*v, "output");
  sc.check_compatibility();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ScenarioError(file.string() + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), file.string());
}

}  // namespace subcm::cli
