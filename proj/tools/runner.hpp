#pragma once

// Frequency sweeps, result files, result comparison and the invariant suite.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenario.hpp"
#include "subcm/modes.hpp"

namespace subcm::cli {

inline constexpr const char* kCsvHeader =
    "frequency_hz,trace_id,mode_rank,re_t,im_t,modal_significance,lambda,circle_dev,orth_dev,cancel_flag";

struct PointResult {
  double frequency_hz = 0.0;
  ModeSet modes;
  nlohmann::ordered_json diagnostics;
};

struct RunResult {
  std::vector<PointResult> points;  // ascending frequency
  SweepResult tracks;
};

struct RunOptions {
  int jobs = 0;  // 0: available parallelism
  std::uint64_t seed = 42;
};

/// Solve every frequency of the sweep on a worker pool; results keep frequency order.
RunResult run_sweep(const Scenario& sc, const RunOptions& opts = {});

/// One row per emitted mode (the n_modes most significant per frequency).
std::string format_csv(const RunResult& r, int n_modes);
nlohmann::ordered_json diagnostics_json(const Scenario& sc, const RunResult& r, const RunOptions& opts);
nlohmann::ordered_json vectors_json(const RunResult& r, int n_modes);

/// modes.csv, diagnostics.json and, on request, vectors.json.
void write_outputs(const Scenario& sc, const RunResult& r, const RunOptions& opts, const std::filesystem::path& dir,
                   bool dump_vectors);

struct CompareReport {
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  double worst_frequency_hz = 0.0;
  int worst_mode_rank = -1;  // rank in the first file
  int matched = 0;
  bool pass = true;
};

/// Per frequency, match the modes of two result files by |t_a - t_b| (the top min(n_a, n_b) of each).
/// Accepts a modes.csv file or a directory containing one. Throws ShapeError on a grid mismatch.
CompareReport compare_results(const std::filesystem::path& a, const std::filesystem::path& b, double tol);

struct CheckLine {
  std::string name;
  double worst = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

/// Invariant and cross-formulation suite over the sweep of a scenario.
std::vector<CheckLine> run_checks(const Scenario& sc, const RunOptions& opts = {});

}  // namespace subcm::cli
