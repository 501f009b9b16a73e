#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eph/a2c.hpp"
#include "eph/config.hpp"

namespace eph {

struct TrainResult {
  ExperimentConfig config;
  ModelParams params;
  EpisodicStore memory{1};
  std::vector<EpisodeRecord> log;
  Matrix gate_history;  // one r_fix row per training episode
  std::size_t skipped_updates = 0;
};

using EpisodeCallback = std::function<void(const EpisodeRecord&)>;

/// Linear anneal from entropy_coef_start (first episode) to
/// entropy_coef_end (last episode).
double entropy_coef_at(const TrainConfig& cfg, int episode);

/// Single-threaded A2C: one rollout and one RMSProp update per episode.
TrainResult train_run(const ExperimentConfig& cfg, const EpisodeCallback& on_episode = {});

struct EvalOptions {
  Split split = Split::Test;
  int episodes = 1000;
  std::uint64_t seed = 0;
  const CellMask* mask = nullptr;
  bool retrieval_enabled = true;
  bool commit = true;
  bool keep_tape = false;
  std::function<void(const RolloutTrace&)> on_episode;
};

/// Frozen-weight rollouts on a private copy of `memory`.
std::vector<EpisodeRecord> evaluate(const ExperimentConfig& cfg, const ModelParams& params,
                                    EpisodicStore memory, const EvalOptions& options);

double mean_episode_reward(std::span<const EpisodeRecord> log);

struct SeedCandidate {
  std::string name;
  std::uint64_t seed = 0;
  ExperimentConfig config;
  ModelParams params;
  EpisodicStore memory{1};
};

struct SeedScore {
  std::size_t index = 0;  // position in the candidate list
  std::uint64_t seed = 0;
  double mean_reward = 0.0;
};

struct FilterResult {
  std::vector<SeedScore> accepted;  // best first
  std::vector<SeedScore> all;       // every candidate, best first
  std::vector<std::string> warnings;
};

/// Scores each run on `episodes` fresh training-split episodes and keeps the
/// best `keep`; ties break toward the lower candidate index.
FilterResult filter_seeds(std::span<const SeedCandidate> runs, int episodes, int keep);

}  // namespace eph
