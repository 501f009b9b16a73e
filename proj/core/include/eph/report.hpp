#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eph/analysis.hpp"
#include "eph/run_dir.hpp"

namespace eph {

struct ReportOptions {
  int test_episodes = 1000;
  int ablation_episodes = 1000;
  std::vector<double> thetas = theta_grid();
  int histogram_bins = 10;
  int quantiles = 4;
  bool ablations = true;
};

/// Everything derived from one run.
struct RunAnalysis {
  std::string name;
  std::uint64_t seed = 0;
  int trials = 6;
  Vector r_star;
  Histogram histogram;
  double open_fraction = 0.0;    // r* >= 0.9
  double closed_fraction = 0.0;  // r* < 0.1
  GateConvergence convergence;
  double first_window_std = 0.0;
  double last_window_std = 0.0;
  QuantileCurve training_curve;
  std::map<int, TrialAccuracy> exposure;
  EvalMetrics test;
  CosineConsistency cosine{{}};
  std::vector<AblationResult> episodic;
  std::vector<AblationResult> abstract;
  StorageReport sparse_storage;
  std::size_t sparse_units = 0;
  EvalMetrics sparse_test;
};

/// r* from the run's gate history, test evaluation (with cell traces for the
/// similarity analysis), masking sweeps and the sparse-store comparison.
RunAnalysis analyze_run(const RunData& run, const ReportOptions& options);

/// Fails with ConfigError when runs differ in anything but their seed.
void check_compatible(const std::vector<RunData>& runs);

/// Writes fig1d.csv ... fig3b.csv and summary.json into `out`. Pooled rows
/// average the per-seed values.
void write_report(const std::filesystem::path& out, const std::vector<RunAnalysis>& runs,
                  const FilterResult* filter);

}  // namespace eph
