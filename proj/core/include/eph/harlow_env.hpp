#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "eph/config.hpp"
#include "eph/rng.hpp"

namespace eph {

using ObjectId = int;
using TaskId = std::int64_t;

enum class Action : std::uint8_t { Left = 0, Right = 1 };
enum class Phase : std::uint8_t { Fixation = 0, Choice = 1 };
enum class Split : std::uint8_t { Train = 0, Test = 1 };

const char* to_string(Action a);
const char* to_string(Phase p);

/// Objects of a split: train ids come first, test ids follow.
struct ObjectRange {
  ObjectId first = 0;
  ObjectId count = 0;
};
ObjectRange objects_in(Split split, const EnvConfig& cfg);

/// A random unit vector minted the first time a task is seen, plus the
/// canonical task id used for exact lookups.
struct ContextKey {
  TaskId task_id = -1;
  std::vector<double> vector;
};

/// Ordered object pair; the first object is the rewarding one.
struct Task {
  ObjectId rewarding_object = 0;
  ObjectId other_object = 1;
  ContextKey context;

  TaskId id() const { return context.task_id; }
};

TaskId canonical_task_id(ObjectId rewarding, ObjectId other, const EnvConfig& cfg);

/// Run-scoped memory of generated contexts and how often each task was seen.
class ContextRegistry {
 public:
  ContextRegistry(int context_dim, std::uint64_t seed);

  /// Returns the context for `id`, minting it on first request.
  const ContextKey& context_for(TaskId id);
  bool contains(TaskId id) const { return contexts_.count(id) != 0; }
  std::size_t size() const { return contexts_.size(); }

  /// Number of earlier episodes on this task; increments the counter.
  int record_exposure(TaskId id);
  int exposures(TaskId id) const;

  const std::unordered_map<TaskId, ContextKey>& contexts() const { return contexts_; }
  void insert(ContextKey key);

 private:
  int dim_;
  Rng rng_;
  std::unordered_map<TaskId, ContextKey> contexts_;
  std::unordered_map<TaskId, int> exposures_;
};

/// Uniform ordered pair from the split, with its (possibly reused) context.
Task sample_task(Rng& rng, Split split, ContextRegistry& registry, const EnvConfig& cfg);

/// Every ordered pair of the split, n(n-1) of them.
std::vector<TaskId> task_universe(Split split, const EnvConfig& cfg);

struct Cell {
  enum class Kind : std::uint8_t { Empty, Fixation, Object };
  Kind kind = Kind::Empty;
  ObjectId object = -1;

  static Cell empty() { return {}; }
  static Cell fixation() { return {Kind::Fixation, -1}; }
  static Cell object_cell(ObjectId id) { return {Kind::Object, id}; }

  /// 0 = empty, 1 = fixation cross, 2 + id = object.
  int symbol() const;
  bool operator==(const Cell&) const = default;
};

struct WorldState {
  std::vector<Cell> world_cells;
  int heading = 0;  // world index of the leftmost visible cell
  Phase phase = Phase::Fixation;
  int trial_index = 0;
  int step_count = 0;
  Task task;
  bool done = false;
};

/// The receptive field, left to right, as symbol indices.
struct Observation {
  std::vector<int> symbols;

  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  int trial_index = 0;  // trial in which the event happened
  Phase phase = Phase::Fixation;  // phase the action was taken in
  bool fixated = false;
  std::optional<bool> chose_correct;
  bool retrieval_step = false;  // first presentation of the object pair
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

Observation observe(const WorldState& state, const EnvConfig& cfg);

/// Maps an observation to the network input: field_size blocks of
/// cell_width() entries, [empty, fixation, object features...].
///
/// Object features are a fixed random unit vector per object, drawn from
/// object_code_seed, so held-out objects come from the same input
/// distribution as training objects. With one_hot_objects every block is
/// a plain indicator over all symbols.
class ObservationEncoder {
 public:
  explicit ObservationEncoder(const EnvConfig& cfg);

  int cell_width() const { return cell_width_; }
  int dim() const { return field_size_ * cell_width_; }
  /// Writes dim() values to `out`.
  void encode_into(const Observation& obs, double* out) const;
  std::vector<double> encode(const Observation& obs) const;
  /// Feature block of one object (cell_width() - 2 values).
  const double* object_code(ObjectId id) const;

 private:
  int field_size_;
  int cell_width_;
  int object_count_;
  std::vector<double> codes_;  // object_count x (cell_width - 2)
};

/// Minimal number of moves until the next reward event (fixation or
/// choice), by breadth-first search over headings.
int oracle_optimal_steps(const WorldState& state, const EnvConfig& cfg);

/// World index whose content sits at receptive-field index `field_index`.
int world_index(const WorldState& state, int field_index, const EnvConfig& cfg);

/// Receptive-field index of world cell `world`, or -1 when not visible.
int field_index_of(const WorldState& state, int world, const EnvConfig& cfg);

/// One-dimensional symbolic Harlow task on a circular world.
class HarlowEnv {
 public:
  explicit HarlowEnv(EnvConfig cfg);

  /// Starts an episode; `seed` drives cross placement and side shuffling.
  Observation reset(const Task& task, std::uint64_t seed);
  StepOutcome step(Action action);

  const WorldState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const ObservationEncoder& encoder() const { return encoder_; }
  Observation observation() const { return observe(state_, cfg_); }

  /// Installs an arbitrary state; used by tests and the oracle harness.
  void restore(WorldState state, std::uint64_t seed);

 private:
  void place_cross();
  void place_objects();

  EnvConfig cfg_;
  ObservationEncoder encoder_;
  WorldState state_;
  Rng rng_;
  bool episode_rewarding_left_ = true;  // used when sides are not shuffled
};

}  // namespace eph
