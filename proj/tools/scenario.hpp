#pragma once

// JSON scenario files for the command-line front end.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "subcm/dipole.hpp"
#include "subcm/mie.hpp"

namespace subcm::cli {

inline constexpr int kScenarioVersion = 1;

/// Invalid scenario content. Reported with exit code 2.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Solver { DenseScattering, DenseImpedance, TForm, Iterative, HybridImpedance, HybridScattering };

std::string to_string(Solver s);

struct Sweep {
  double f_min = 0.0;  // Hz
  double f_max = 0.0;  // Hz
  int n_points = 1;

  /// Linear grid; a single point sits at f_min.
  std::vector<double> frequencies() const;
};

struct Tolerances {
  double unitary = 1e-6;
  double cancellation = 1e-6;
  double iter_residual = 1e-8;
  double iter_eig = 1e-6;
  int max_iter = 100;
};

struct Scenario {
  int version = kScenarioVersion;
  DipoleScene scene;
  std::optional<SphereSpec> sphere;
  Sweep sweep;
  Solver solver = Solver::DenseScattering;
  int n_modes = 10;
  Tolerances tol;
  std::optional<std::string> output;

  /// Throws ScenarioError for solver/scene combinations that are not supported.
  void check_compatibility() const;
};

/// Parse scenario text. `origin` names the source in error messages.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>");
Scenario load_scenario(const std::filesystem::path& file);

}  // namespace subcm::cli
