#include "eph/harlow_env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "eph/error.hpp"

namespace eph {

const char* to_string(Action a) { return a == Action::Left ? "left" : "right"; }
const char* to_string(Phase p) { return p == Phase::Fixation ? "fixation" : "choice"; }

ObjectRange objects_in(Split split, const EnvConfig& cfg) {
  if (split == Split::Train) return {0, cfg.train_objects};
  return {cfg.train_objects, cfg.object_count - cfg.train_objects};
}

TaskId canonical_task_id(ObjectId rewarding, ObjectId other, const EnvConfig& cfg) {
  return static_cast<TaskId>(rewarding) * cfg.object_count + other;
}

ContextRegistry::ContextRegistry(int context_dim, std::uint64_t seed)
    : dim_(context_dim), rng_(make_rng(seed, Stream::Contexts)) {}

const ContextKey& ContextRegistry::context_for(TaskId id) {
  auto it = contexts_.find(id);
  if (it != contexts_.end()) return it->second;
  ContextKey key{id, std::vector<double>(static_cast<std::size_t>(dim_))};
  double norm2 = 0.0;
  for (auto& v : key.vector) {
    v = standard_normal(rng_);
    norm2 += v * v;
  }
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  for (auto& v : key.vector) v *= inv;
  return contexts_.emplace(id, std::move(key)).first->second;
}

int ContextRegistry::record_exposure(TaskId id) { return exposures_[id]++; }

int ContextRegistry::exposures(TaskId id) const {
  auto it = exposures_.find(id);
  return it == exposures_.end() ? 0 : it->second;
}

void ContextRegistry::insert(ContextKey key) {
  const TaskId id = key.task_id;
  contexts_[id] = std::move(key);
}

Task sample_task(Rng& rng, Split split, ContextRegistry& registry, const EnvConfig& cfg) {
  const ObjectRange range = objects_in(split, cfg);
  const auto n = static_cast<std::uint64_t>(range.count);
  const auto a = static_cast<ObjectId>(uniform_index(rng, n));
  auto b = static_cast<ObjectId>(uniform_index(rng, n - 1));
  if (b >= a) ++b;
  Task task;
  task.rewarding_object = range.first + a;
  task.other_object = range.first + b;
  task.context =
      registry.context_for(canonical_task_id(task.rewarding_object, task.other_object, cfg));
  return task;
}

std::vector<TaskId> task_universe(Split split, const EnvConfig& cfg) {
  const ObjectRange range = objects_in(split, cfg);
  std::vector<TaskId> out;
  for (ObjectId a = range.first; a < range.first + range.count; ++a) {
    for (ObjectId b = range.first; b < range.first + range.count; ++b) {
      if (a != b) out.push_back(canonical_task_id(a, b, cfg));
    }
  }
  return out;
}

int Cell::symbol() const {
  switch (kind) {
    case Kind::Empty: return 0;
    case Kind::Fixation: return 1;
    case Kind::Object: return 2 + object;
  }
  return 0;
}

int world_index(const WorldState& state, int field_index, const EnvConfig& cfg) {
  return (state.heading + field_index) % cfg.world_size;
}

int field_index_of(const WorldState& state, int world, const EnvConfig& cfg) {
  const int offset = ((world - state.heading) % cfg.world_size + cfg.world_size) % cfg.world_size;
  return offset < cfg.field_size ? offset : -1;
}

Observation observe(const WorldState& state, const EnvConfig& cfg) {
  Observation obs;
  obs.symbols.resize(static_cast<std::size_t>(cfg.field_size));
  for (int i = 0; i < cfg.field_size; ++i) {
    obs.symbols[static_cast<std::size_t>(i)] =
        state.world_cells[static_cast<std::size_t>(world_index(state, i, cfg))].symbol();
  }
  return obs;
}

ObservationEncoder::ObservationEncoder(const EnvConfig& cfg)
    : field_size_(cfg.field_size), cell_width_(cfg.cell_width()), object_count_(cfg.object_count) {
  if (cfg.one_hot_objects) return;
  const auto width = static_cast<std::size_t>(cfg.object_code_dim);
  codes_.resize(static_cast<std::size_t>(cfg.object_count) * width);
  Rng rng(cfg.object_code_seed);
  for (int id = 0; id < cfg.object_count; ++id) {
    double* code = codes_.data() + static_cast<std::size_t>(id) * width;
    double norm2 = 0.0;
    for (std::size_t k = 0; k < width; ++k) {
      code[k] = standard_normal(rng);
      norm2 += code[k] * code[k];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t k = 0; k < width; ++k) code[k] *= inv;
  }
}

const double* ObservationEncoder::object_code(ObjectId id) const {
  if (codes_.empty()) return nullptr;
  return codes_.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(cell_width_ - 2);
}

void ObservationEncoder::encode_into(const Observation& obs, double* out) const {
  if (static_cast<int>(obs.symbols.size()) != field_size_) {
    throw ContractViolation("observation width does not match the encoder");
  }
  std::fill(out, out + dim(), 0.0);
  for (int cell = 0; cell < field_size_; ++cell) {
    double* block = out + static_cast<std::ptrdiff_t>(cell) * cell_width_;
    const int s = obs.symbols[static_cast<std::size_t>(cell)];
    if (s < 0 || s >= object_count_ + 2) throw ContractViolation("observation symbol out of range");
    if (s < 2 || codes_.empty()) {
      block[s] = 1.0;
    } else {
      std::copy_n(object_code(s - 2), cell_width_ - 2, block + 2);
    }
  }
}

std::vector<double> ObservationEncoder::encode(const Observation& obs) const {
  std::vector<double> out(static_cast<std::size_t>(dim()));
  encode_into(obs, out.data());
  return out;
}

int oracle_optimal_steps(const WorldState& state, const EnvConfig& cfg) {
  const Cell::Kind wanted = state.phase == Phase::Fixation ? Cell::Kind::Fixation : Cell::Kind::Object;
  auto is_target = [&](int heading) {
    const int center = (heading + cfg.center_index()) % cfg.world_size;
    return state.world_cells[static_cast<std::size_t>(center)].kind == wanted;
  };
  std::vector<int> dist(static_cast<std::size_t>(cfg.world_size), -1);
  std::deque<int> frontier{state.heading};
  dist[static_cast<std::size_t>(state.heading)] = 0;
  while (!frontier.empty()) {
    const int h = frontier.front();
    frontier.pop_front();
    if (is_target(h)) return dist[static_cast<std::size_t>(h)];
    for (int delta : {-1, 1}) {
      const int next = (h + delta + cfg.world_size) % cfg.world_size;
      if (dist[static_cast<std::size_t>(next)] < 0) {
        dist[static_cast<std::size_t>(next)] = dist[static_cast<std::size_t>(h)] + 1;
        frontier.push_back(next);
      }
    }
  }
  return -1;  // no target in the world
}

HarlowEnv::HarlowEnv(EnvConfig cfg) : cfg_(cfg), encoder_(cfg_) {}

Observation HarlowEnv::reset(const Task& task, std::uint64_t seed) {
  rng_ = Rng(seed);
  state_ = WorldState{};
  state_.world_cells.assign(static_cast<std::size_t>(cfg_.world_size), Cell::empty());
  state_.task = task;
  state_.heading = 0;
  episode_rewarding_left_ = uniform_index(rng_, 2) == 0;
  place_cross();
  return observation();
}

void HarlowEnv::restore(WorldState state, std::uint64_t seed) {
  state_ = std::move(state);
  rng_ = Rng(seed);
  episode_rewarding_left_ = uniform_index(rng_, 2) == 0;
}

void HarlowEnv::place_cross() {
  // Any visible cell except the leftmost and the center.
  const int center = cfg_.center_index();
  const auto choices = static_cast<std::uint64_t>(cfg_.field_size - 2);
  int offset = 1 + static_cast<int>(uniform_index(rng_, choices));
  if (offset >= center) ++offset;
  state_.world_cells[static_cast<std::size_t>(world_index(state_, offset, cfg_))] = Cell::fixation();
}

void HarlowEnv::place_objects() {
  const bool rewarding_left =
      cfg_.shuffle_sides ? uniform_index(rng_, 2) == 0 : episode_rewarding_left_;
  const ObjectId left = rewarding_left ? state_.task.rewarding_object : state_.task.other_object;
  const ObjectId right = rewarding_left ? state_.task.other_object : state_.task.rewarding_object;
  state_.world_cells[static_cast<std::size_t>(world_index(state_, cfg_.left_slot(), cfg_))] =
      Cell::object_cell(left);
  state_.world_cells[static_cast<std::size_t>(world_index(state_, cfg_.right_slot(), cfg_))] =
      Cell::object_cell(right);
}

StepOutcome HarlowEnv::step(Action action) {
  if (state_.done) throw ContractViolation("step() called on a finished episode");

  StepOutcome out;
  out.info.trial_index = state_.trial_index;
  out.info.phase = state_.phase;

  // Turning left brings cells from the left into view, so visible content
  // drifts one field index to the right.
  const int delta = action == Action::Left ? -1 : 1;
  state_.heading = (state_.heading + delta + cfg_.world_size) % cfg_.world_size;
  ++state_.step_count;

  auto& center = state_.world_cells[static_cast<std::size_t>(
      world_index(state_, cfg_.center_index(), cfg_))];
  if (state_.phase == Phase::Fixation) {
    if (center.kind == Cell::Kind::Fixation) {
      center = Cell::empty();
      out.reward = cfg_.reward_fixation;
      out.info.fixated = true;
      out.info.retrieval_step = state_.trial_index == 0;
      place_objects();
      state_.phase = Phase::Choice;
    }
  } else if (center.kind == Cell::Kind::Object) {
    const bool correct = center.object == state_.task.rewarding_object;
    out.reward = correct ? cfg_.reward_correct : cfg_.reward_wrong;
    out.info.chose_correct = correct;
    for (auto& c : state_.world_cells) {
      if (c.kind == Cell::Kind::Object) c = Cell::empty();
    }
    ++state_.trial_index;
    state_.phase = Phase::Fixation;
    if (state_.trial_index < cfg_.trials) place_cross();
  }

  state_.done = state_.trial_index == cfg_.trials || state_.step_count == cfg_.step_cap;
  out.done = state_.done;
  out.observation = observation();
  return out;
}

}  // namespace eph
