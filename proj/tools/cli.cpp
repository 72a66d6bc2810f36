#include "cli.hpp"

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "runner.hpp"
#include "scenario.hpp"
#include "subcm/errors.hpp"

namespace subcm::cli {

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Characteristic and substructure characteristic modes of dipole and sphere scenes"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  int jobs = 0;
  std::uint64_t seed = 42;
  bool dump_vectors = false;
  auto* run = app.add_subcommand("run", "Solve a frequency sweep and write modes.csv and diagnostics.json");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory (default: scenario 'output' or ./subcm_out)");
  run->add_option("--jobs", jobs, "Worker threads (default: available parallelism)")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", seed, "Start-vector seed of the iterative solver");
  run->add_flag("--dump-vectors", dump_vectors, "Also write the excitation vectors to vectors.json");

  std::string file_a, file_b;
  double tol = 1e-6;
  auto* compare = app.add_subcommand("compare", "Match the modes of two result files per frequency");
  compare->add_option("a", file_a, "First modes.csv or output directory")->required();
  compare->add_option("b", file_b, "Second modes.csv or output directory")->required();
  compare->add_option("--tol", tol, "Largest accepted |t| deviation")->required();

  std::string checks_path;
  int check_jobs = 0;
  auto* checks = app.add_subcommand("checks", "Run the invariant and equivalence suite on a scenario");
  checks->add_option("--scenario", checks_path, "Scenario JSON file")->required();
  checks->add_option("--jobs", check_jobs, "Worker threads")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      const Scenario sc = load_scenario(scenario_path);
      const RunOptions opts{jobs, seed};
      const auto result = run_sweep(sc, opts);
      const std::filesystem::path dir = !out_dir.empty() ? out_dir : sc.output.value_or("subcm_out");
      write_outputs(sc, result, opts, dir, dump_vectors);
      std::cout << "wrote " << result.points.size() << " frequency points to " << dir.string() << "\n";
      return 0;
    }
    if (*compare) {
      const auto rep = compare_results(file_a, file_b, tol);
      char line[256];
      std::snprintf(line, sizeof line, "matched %d modes: max |dt| %.3e, mean |dt| %.3e", rep.matched,
                    rep.max_deviation, rep.mean_deviation);
      std::cout << line << "\n";
      if (!rep.pass) {
        std::snprintf(line, sizeof line, "FAIL: deviation %.3e > %.3e at frequency_hz=%.17g mode_rank=%d",
                      rep.max_deviation, tol, rep.worst_frequency_hz, rep.worst_mode_rank);
        std::cout << line << "\n";
        return 1;
      }
      std::cout << "PASS\n";
      return 0;
    }
    if (*checks) {
      const Scenario sc = load_scenario(checks_path);
      bool ok = true;
      for (const auto& c : run_checks(sc, RunOptions{check_jobs, 42})) {
        char line[256];
        std::snprintf(line, sizeof line, "%s  %-28s worst %.3e (limit %.1e)", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                      c.worst, c.threshold);
        std::cout << line << "\n";
        ok = ok && c.pass;
      }
      return ok ? 0 : 1;
    }
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace subcm::cli
