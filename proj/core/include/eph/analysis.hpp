#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "eph/a2c.hpp"
#include "eph/config.hpp"
#include "eph/episodic_memory.hpp"
#include "eph/model.hpp"

namespace eph {

/// Mean of the last `window` rows of an episodes x hidden gate history.
Vector compute_r_star(const Matrix& gate_history, int window);

struct Histogram {
  std::vector<double> edges;  // bins [e_k, e_k+1), last bin right-closed
  std::vector<std::size_t> counts;
  std::vector<double> fractions;
};

std::vector<double> uniform_edges(int bins);

/// Throws ContractViolation unless the edges increase and cover [0, 1].
Histogram openness_histogram(const Vector& r_star, std::span<const double> edges);

double fraction_at_least(const Vector& values, double threshold);
double fraction_below(const Vector& values, double threshold);

struct GateConvergence {
  int window = 0;
  std::vector<int> window_start;  // first episode of each window
  Matrix std;                     // windows x hidden, population std
  std::vector<double> mean_std;   // per window, averaged over neurons
};

/// Sliding per-neuron standard deviation of the gate history, one window
/// every `stride` episodes (the final window is always included).
GateConvergence gate_convergence(const Matrix& gate_history, int window, int stride);

/// Mean over neurons of the population std within rows [start, start + window).
double window_mean_std(const Matrix& gate_history, int start, int window);

/// Cosine similarity; 0 when either vector is zero.
double cosine_similarity(const Vector& a, const Vector& b);

/// Neuron index sets for r* deciles [0, 0.1), ..., [0.9, 1.0].
std::vector<std::vector<int>> decile_regions(const Vector& r_star);

/// Similarity of c_t to c_fix within each region, accumulated over episodes
/// and indexed by the offset t - fix_step.
class CosineConsistency {
 public:
  explicit CosineConsistency(std::vector<std::vector<int>> regions);

  /// `cells` holds c_t for every step of one episode.
  void add(std::span<const Vector> cells, int fix_step);

  const std::vector<std::vector<int>>& regions() const { return regions_; }
  int min_offset() const { return min_offset_; }
  int max_offset() const { return max_offset_; }
  /// Mean similarity for `region` at `offset`; NaN when nothing was recorded
  /// or the region is empty.
  double mean(std::size_t region, int offset) const;
  std::size_t count(int offset) const;
  std::size_t episodes() const { return episodes_; }

 private:
  struct Cell {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::vector<std::vector<int>> regions_;
  std::map<int, std::vector<Cell>> by_offset_;
  int min_offset_ = 0;
  int max_offset_ = 0;
  std::size_t episodes_ = 0;
};

/// Per-region similarity sequence for a single episode (steps x regions).
Matrix cosine_trace(std::span<const Vector> cells, int fix_step,
                    const std::vector<std::vector<int>>& regions);

enum class Region : std::uint8_t { Episodic, Abstract };

std::string to_string(Region region);
/// "episodic" or "abstract"; ConfigError otherwise.
Region parse_region(std::string_view text);

/// Episodic drops {j : r*[j] >= theta}, Abstract drops the complement.
CellMask region_mask(const Vector& r_star, double theta, Region region);

/// "episodic:0.9" style mask specification.
struct MaskSpec {
  Region region = Region::Episodic;
  double theta = 0.0;
};
MaskSpec parse_mask_spec(std::string_view text);

struct EvalMetrics {
  std::size_t episodes = 0;
  /// First-trial fixation steps; an episode that never fixates contributes
  /// every step it took.
  double mean_steps_to_fixation = 0.0;
  std::size_t exposed_completed = 0;  // exposure >= 1 with a completed first trial
  double first_trial_accuracy = 0.0;  // over exposed_completed
  double later_trial_accuracy = 0.0;  // trials 2..N, over completed trials
  double mean_reward = 0.0;
};

EvalMetrics summarize(std::span<const EpisodeRecord> log);

struct AblationResult {
  double theta = 0.0;
  Region region = Region::Episodic;
  int dropped_count = 0;
  EvalMetrics metrics;
};

std::vector<double> theta_grid();

/// One evaluation per theta with the region mask applied at every step.
std::vector<AblationResult> masking_ablation(const ExperimentConfig& cfg, const ModelParams& params,
                                             const EpisodicStore& memory, const Vector& r_star,
                                             std::span<const double> thetas, Region region,
                                             int episodes, std::uint64_t eval_seed);

struct TrialAccuracy {
  std::vector<double> accuracy;  // per trial, NaN when no trial completed
  std::vector<std::size_t> completed;
};

/// Accuracy per trial, keyed by exposure count.
std::map<int, TrialAccuracy> exposure_curve(std::span<const EpisodeRecord> log, int trials);

struct QuantileCurve {
  std::vector<int> first_episode;  // per quantile, index into the log
  std::vector<int> last_episode;   // inclusive
  std::vector<TrialAccuracy> trials;
};

/// Splits the log into `quantiles` contiguous blocks of near-equal size.
QuantileCurve training_quantile_curve(std::span<const EpisodeRecord> log, int quantiles, int trials);

TrialAccuracy trial_accuracy(std::span<const EpisodeRecord> log, int trials);

}  // namespace eph
