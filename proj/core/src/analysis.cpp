#include "eph/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "eph/error.hpp"
#include "eph/trainer.hpp"

namespace eph {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(double num, std::size_t den) {
  return den == 0 ? kNaN : num / static_cast<double>(den);
}

Vector restrict_to(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

}  // namespace

Vector compute_r_star(const Matrix& gate_history, int window) {
  if (window <= 0) throw ContractViolation("r* window must be positive");
  if (gate_history.rows() < window) {
    throw ContractViolation("gate history has " + std::to_string(gate_history.rows()) +
                            " episodes, fewer than the r* window of " + std::to_string(window));
  }
  return gate_history.bottomRows(window).colwise().mean().transpose();
}

std::vector<double> uniform_edges(int bins) {
  if (bins <= 0) throw ContractViolation("histogram needs at least one bin");
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) edges[static_cast<std::size_t>(k)] = static_cast<double>(k) / bins;
  return edges;
}

Histogram openness_histogram(const Vector& r_star, std::span<const double> edges) {
  if (edges.size() < 2 || edges.front() > 0.0 || edges.back() < 1.0) {
    throw ContractViolation("histogram edges must cover [0, 1]");
  }
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) throw ContractViolation("histogram edges must increase");
  }
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  const std::size_t bins = edges.size() - 1;
  h.counts.assign(bins, 0);
  for (Eigen::Index j = 0; j < r_star.size(); ++j) {
    const double v = r_star[j];
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(std::distance(edges.begin(), it));
    bin = bin == 0 ? 0 : std::min(bin - 1, bins - 1);
    ++h.counts[bin];
  }
  h.fractions.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    h.fractions[b] = r_star.size() == 0 ? 0.0 : static_cast<double>(h.counts[b]) / static_cast<double>(r_star.size());
  }
  return h;
}

double fraction_at_least(const Vector& values, double threshold) {
  if (values.size() == 0) return 0.0;
  return static_cast<double>((values.array() >= threshold).count()) / static_cast<double>(values.size());
}

double fraction_below(const Vector& values, double threshold) {
  if (values.size() == 0) return 0.0;
  return static_cast<double>((values.array() < threshold).count()) / static_cast<double>(values.size());
}

namespace {

Vector window_std(const Matrix& history, int start, int window) {
  // Shifting by the first row keeps constant columns exactly zero.
  const Matrix block = history.middleRows(start, window).rowwise() - history.row(start);
  const Eigen::RowVectorXd mean = block.colwise().mean();
  const Eigen::RowVectorXd var = (block.rowwise() - mean).array().square().colwise().mean();
  return var.array().sqrt().transpose();
}

}  // namespace

GateConvergence gate_convergence(const Matrix& gate_history, int window, int stride) {
  if (window <= 0 || stride <= 0) throw ContractViolation("window and stride must be positive");
  const int episodes = static_cast<int>(gate_history.rows());
  GateConvergence out;
  out.window = window;
  if (episodes < window) {
    out.std = Matrix(0, gate_history.cols());
    return out;
  }
  for (int s = 0; s + window <= episodes; s += stride) out.window_start.push_back(s);
  if (out.window_start.back() != episodes - window) out.window_start.push_back(episodes - window);

  out.std = Matrix(static_cast<Eigen::Index>(out.window_start.size()), gate_history.cols());
  for (std::size_t k = 0; k < out.window_start.size(); ++k) {
    const Vector sd = window_std(gate_history, out.window_start[k], window);
    out.std.row(static_cast<Eigen::Index>(k)) = sd.transpose();
    out.mean_std.push_back(sd.size() == 0 ? 0.0 : sd.mean());
  }
  return out;
}

double window_mean_std(const Matrix& gate_history, int start, int window) {
  if (start < 0 || window <= 0 || start + window > gate_history.rows()) {
    throw ContractViolation("window outside the gate history");
  }
  const Vector sd = window_std(gate_history, start, window);
  return sd.size() == 0 ? 0.0 : sd.mean();
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ContractViolation("cosine_similarity: size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<std::vector<int>> decile_regions(const Vector& r_star) {
  std::vector<std::vector<int>> regions(10);
  for (Eigen::Index j = 0; j < r_star.size(); ++j) {
    const int bin = std::clamp(static_cast<int>(std::floor(r_star[j] * 10.0)), 0, 9);
    regions[static_cast<std::size_t>(bin)].push_back(static_cast<int>(j));
  }
  return regions;
}

Matrix cosine_trace(std::span<const Vector> cells, int fix_step,
                    const std::vector<std::vector<int>>& regions) {
  if (fix_step < 0 || fix_step >= static_cast<int>(cells.size())) {
    throw ContractViolation("fixation step outside the episode");
  }
  Matrix out(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(regions.size()));
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    if (regions[r].empty()) {
      out.col(col).setConstant(kNaN);
      continue;
    }
    const Vector ref = restrict_to(cells[static_cast<std::size_t>(fix_step)], regions[r]);
    for (std::size_t t = 0; t < cells.size(); ++t) {
      out(static_cast<Eigen::Index>(t), col) = cosine_similarity(ref, restrict_to(cells[t], regions[r]));
    }
  }
  return out;
}

CosineConsistency::CosineConsistency(std::vector<std::vector<int>> regions)
    : regions_(std::move(regions)) {}

void CosineConsistency::add(std::span<const Vector> cells, int fix_step) {
  const Matrix trace = cosine_trace(cells, fix_step, regions_);
  for (Eigen::Index t = 0; t < trace.rows(); ++t) {
    const int offset = static_cast<int>(t) - fix_step;
    auto& slots = by_offset_[offset];
    if (slots.empty()) slots.resize(regions_.size());
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      if (regions_[r].empty()) continue;
      slots[r].sum += trace(t, static_cast<Eigen::Index>(r));
      ++slots[r].n;
    }
  }
  if (!by_offset_.empty()) {
    min_offset_ = by_offset_.begin()->first;
    max_offset_ = by_offset_.rbegin()->first;
  }
  ++episodes_;
}

double CosineConsistency::mean(std::size_t region, int offset) const {
  auto it = by_offset_.find(offset);
  if (it == by_offset_.end() || region >= regions_.size()) return kNaN;
  const Cell& c = it->second[region];
  return ratio(c.sum, c.n);
}

std::size_t CosineConsistency::count(int offset) const {
  auto it = by_offset_.find(offset);
  if (it == by_offset_.end()) return 0;
  std::size_t n = 0;
  for (const Cell& c : it->second) n = std::max(n, c.n);
  return n;
}

std::string to_string(Region region) {
  return region == Region::Episodic ? "episodic" : "abstract";
}

Region parse_region(std::string_view text) {
  if (text == "episodic") return Region::Episodic;
  if (text == "abstract") return Region::Abstract;
  throw ConfigError("unknown mask region '" + std::string(text) + "' (expected episodic or abstract)");
}

CellMask region_mask(const Vector& r_star, double theta, Region region) {
  std::vector<int> idx;
  for (Eigen::Index j = 0; j < r_star.size(); ++j) {
    const bool open = r_star[j] >= theta;
    if (open == (region == Region::Episodic)) idx.push_back(static_cast<int>(j));
  }
  return CellMask(static_cast<int>(r_star.size()), std::move(idx));
}

MaskSpec parse_mask_spec(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("mask must look like REGION:THETA, got '" + std::string(text) + "'");
  }
  MaskSpec spec;
  spec.region = parse_region(text.substr(0, colon));
  const std::string num(text.substr(colon + 1));
  char* end = nullptr;
  spec.theta = std::strtod(num.c_str(), &end);
  if (num.empty() || end != num.c_str() + num.size() || !(spec.theta >= 0.0 && spec.theta <= 1.0)) {
    throw ConfigError("mask threshold must be a number in [0, 1], got '" + num + "'");
  }
  return spec;
}

EvalMetrics summarize(std::span<const EpisodeRecord> log) {
  EvalMetrics m;
  m.episodes = log.size();
  double steps = 0.0;
  double first_correct = 0.0;
  double later_correct = 0.0;
  std::size_t later_completed = 0;
  for (const auto& rec : log) {
    const TrialRecord& first = rec.trials.at(0);
    steps += first.fixated ? first.steps_to_fixation : rec.steps;
    if (rec.exposure_count >= 1 && first.completed) {
      ++m.exposed_completed;
      first_correct += first.correct ? 1.0 : 0.0;
    }
    for (std::size_t t = 1; t < rec.trials.size(); ++t) {
      if (!rec.trials[t].completed) continue;
      ++later_completed;
      later_correct += rec.trials[t].correct ? 1.0 : 0.0;
    }
    m.mean_reward += rec.total_reward;
  }
  m.mean_steps_to_fixation = ratio(steps, log.size());
  m.first_trial_accuracy = ratio(first_correct, m.exposed_completed);
  m.later_trial_accuracy = ratio(later_correct, later_completed);
  m.mean_reward = ratio(m.mean_reward, log.size());
  return m;
}

std::vector<double> theta_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(k / 10.0);
  return grid;
}

std::vector<AblationResult> masking_ablation(const ExperimentConfig& cfg, const ModelParams& params,
                                             const EpisodicStore& memory, const Vector& r_star,
                                             std::span<const double> thetas, Region region,
                                             int episodes, std::uint64_t eval_seed) {
  std::vector<AblationResult> out;
  for (double theta : thetas) {
    const CellMask mask = region_mask(r_star, theta, region);
    EvalOptions opts;
    opts.split = Split::Test;
    opts.episodes = episodes;
    opts.seed = eval_seed;
    opts.mask = &mask;
    const auto log = evaluate(cfg, params, memory, opts);
    AblationResult r;
    r.theta = theta;
    r.region = region;
    r.dropped_count = static_cast<int>(mask.zeroed_indices().size());
    r.metrics = summarize(log);
    out.push_back(r);
  }
  return out;
}

TrialAccuracy trial_accuracy(std::span<const EpisodeRecord> log, int trials) {
  TrialAccuracy acc;
  std::vector<double> correct(static_cast<std::size_t>(trials), 0.0);
  acc.completed.assign(static_cast<std::size_t>(trials), 0);
  for (const auto& rec : log) {
    for (std::size_t t = 0; t < correct.size() && t < rec.trials.size(); ++t) {
      if (!rec.trials[t].completed) continue;
      ++acc.completed[t];
      correct[t] += rec.trials[t].correct ? 1.0 : 0.0;
    }
  }
  for (std::size_t t = 0; t < correct.size(); ++t) acc.accuracy.push_back(ratio(correct[t], acc.completed[t]));
  return acc;
}

std::map<int, TrialAccuracy> exposure_curve(std::span<const EpisodeRecord> log, int trials) {
  std::map<int, std::vector<EpisodeRecord>> groups;
  for (const auto& rec : log) groups[rec.exposure_count].push_back(rec);
  std::map<int, TrialAccuracy> out;
  for (const auto& [exposure, recs] : groups) out[exposure] = trial_accuracy(recs, trials);
  return out;
}

QuantileCurve training_quantile_curve(std::span<const EpisodeRecord> log, int quantiles, int trials) {
  if (quantiles <= 0) throw ContractViolation("quantile count must be positive");
  QuantileCurve out;
  const std::size_t n = log.size();
  for (int q = 0; q < quantiles; ++q) {
    const std::size_t lo = n * static_cast<std::size_t>(q) / static_cast<std::size_t>(quantiles);
    const std::size_t hi = n * static_cast<std::size_t>(q + 1) / static_cast<std::size_t>(quantiles);
    out.first_episode.push_back(static_cast<int>(lo));
    out.last_episode.push_back(static_cast<int>(hi) - 1);
    out.trials.push_back(trial_accuracy(log.subspan(lo, hi - lo), trials));
  }
  return out;
}

}  // namespace eph
