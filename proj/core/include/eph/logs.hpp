#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eph/a2c.hpp"
#include "eph/config.hpp"

namespace eph {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// RFC 4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view text);
void write_csv_row(std::ostream& out, std::span<const std::string> fields);

/// Parses RFC 4180 text (quoted fields may contain commas, quotes and line
/// breaks). Throws IoError on malformed quoting.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

inline constexpr std::string_view kEpisodeLogHeader =
    "episode,trial,reward,steps_to_fixation,task_id,exposure_count";

/// One row per trial; `reward` is the choice reward (0 when the trial never
/// reached a choice) and `steps_to_fixation` is -1 when the cross was never
/// reached.
void write_episode_log(std::ostream& out, std::span<const EpisodeRecord> log);

/// Inverse of write_episode_log. `cfg` tells correct from wrong choices;
/// total_reward and steps are not recoverable and are left at zero.
std::vector<EpisodeRecord> read_episode_log(std::istream& in, const EnvConfig& cfg);

/// One environment transition as written to a trace log.
struct TraceStep {
  int episode = 0;
  int step = 0;
  int trial = 0;
  Phase phase = Phase::Fixation;
  Action action = Action::Left;
  double reward = 0.0;
  bool done = false;
  int heading = 0;
  std::uint64_t env_seed = 0;
  TaskId task_id = -1;

  bool operator==(const TraceStep&) const = default;
};

std::vector<TraceStep> trace_steps(int episode, const RolloutTrace& trace);

/// One JSON object per line.
void write_trace(std::ostream& out, std::span<const TraceStep> steps);
std::vector<TraceStep> read_trace(std::istream& in);

struct ReplayReport {
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::size_t mismatches = 0;  // steps whose reward, done flag or heading differ
};

/// Re-runs every logged episode from its task and environment seed with
/// the logged actions and compares each transition.
ReplayReport replay(std::span<const TraceStep> steps, const EnvConfig& cfg);

/// Task with the given canonical id; the context vector is left empty.
Task task_from_id(TaskId id, const EnvConfig& cfg);

}  // namespace eph
