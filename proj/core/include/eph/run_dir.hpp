#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "eph/episodic_memory.hpp"
#include "eph/model.hpp"
#include "eph/trainer.hpp"

namespace eph {

/// File layout of one training run.
struct RunLayout {
  std::filesystem::path dir;

  std::filesystem::path config() const { return dir / "config.txt"; }
  std::filesystem::path checkpoint() const { return dir / "checkpoint.json"; }
  std::filesystem::path memory() const { return dir / "memory.json"; }
  std::filesystem::path gate_history() const { return dir / "gate_history.json"; }
  std::filesystem::path train_log() const { return dir / "train_log.csv"; }
};

/// Builds a directory next to `dir`, lets `fill` populate it and then moves
/// it into place, replacing any previous contents. Nothing is left behind
/// if `fill` throws.
void write_atomically(const std::filesystem::path& dir,
                      const std::function<void(const std::filesystem::path&)>& fill);

void write_run(const std::filesystem::path& dir, const TrainResult& result);

void save_gate_history(const std::filesystem::path& manifest, const Matrix& history);
Matrix load_gate_history(const std::filesystem::path& manifest);

struct RunData {
  std::filesystem::path dir;
  ExperimentConfig config;
  std::uint64_t seed = 0;
  int episodes = 0;
  ModelParams params;
  EpisodicStore memory{1};
  Matrix gate_history;
  std::vector<EpisodeRecord> train_log;  // empty unless requested
};

/// Throws IoError naming the missing file when the run is incomplete.
RunData load_run(const std::filesystem::path& dir, bool with_log = true);

}  // namespace eph
