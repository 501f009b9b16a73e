#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "eph/error.hpp"
#include "eph/harlow_env.hpp"
#include "eph/logs.hpp"
#include "eph_test_support.hpp"

using namespace eph;

namespace {

EnvConfig default_env() { return EnvConfig{}; }

Task make_task(ObjectId rewarding, ObjectId other, const EnvConfig& cfg) {
  Task t;
  t.rewarding_object = rewarding;
  t.other_object = other;
  t.context.task_id = canonical_task_id(rewarding, other, cfg);
  return t;
}

int count_symbol(const Observation& obs, int symbol) {
  return static_cast<int>(std::count(obs.symbols.begin(), obs.symbols.end(), symbol));
}

int count_objects(const Observation& obs) {
  return static_cast<int>(std::count_if(obs.symbols.begin(), obs.symbols.end(), [](int s) { return s >= 2; }));
}

int cross_field_index(const Observation& obs) {
  for (std::size_t i = 0; i < obs.symbols.size(); ++i) {
    if (obs.symbols[i] == 1) return static_cast<int>(i);
  }
  return -1;
}

// Moves that bring field index `from` to the center: Left shifts content right.
Action toward_center(int from, const EnvConfig& cfg) {
  return from < cfg.center_index() ? Action::Left : Action::Right;
}

// Drives the cross to the center; returns the step outcome that fixated.
StepOutcome fixate(HarlowEnv& env) {
  const EnvConfig& cfg = env.config();
  for (;;) {
    const int idx = cross_field_index(env.observation());
    const StepOutcome out = env.step(idx < 0 ? Action::Left : toward_center(idx, cfg));
    if (out.info.fixated || out.done) return out;
  }
}

StepOutcome choose(HarlowEnv& env, bool pick_rewarding) {
  const EnvConfig& cfg = env.config();
  const Observation obs = env.observation();
  const int reward_symbol = 2 + env.state().task.rewarding_object;
  const bool rewarding_left = obs.symbols[static_cast<std::size_t>(cfg.left_slot())] == reward_symbol;
  const bool go_left_slot = pick_rewarding == rewarding_left;
  const Action a = go_left_slot ? Action::Left : Action::Right;
  for (;;) {
    const StepOutcome out = env.step(a);
    if (out.info.chose_correct || out.done) return out;
  }
}

}  // namespace

TEST(TaskSampling, UniverseSizesMatchOrderedPairs) {
  EnvConfig cfg = default_env();
  // Independent count: every ordered pair of distinct ids.
  auto pairs = [](int n) {
    int count = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) count += a != b;
    return count;
  };
  EXPECT_EQ(task_universe(Split::Train, cfg).size(), static_cast<std::size_t>(pairs(80)));
  EXPECT_EQ(task_universe(Split::Test, cfg).size(), static_cast<std::size_t>(pairs(20)));
  EXPECT_EQ(task_universe(Split::Train, cfg).size(), 6320u);
  EXPECT_EQ(task_universe(Split::Test, cfg).size(), 380u);

  cfg.train_objects = cfg.object_count;
  EXPECT_EQ(task_universe(Split::Train, cfg).size(), 9900u);
}

TEST(TaskSampling, SplitsUseDisjointIdRanges) {
  const EnvConfig cfg = default_env();
  ContextRegistry reg(32, 1);
  Rng rng = make_rng(1, Stream::Tasks);
  for (int k = 0; k < 2000; ++k) {
    const Task train = sample_task(rng, Split::Train, reg, cfg);
    EXPECT_LT(train.rewarding_object, 80);
    EXPECT_LT(train.other_object, 80);
    EXPECT_NE(train.rewarding_object, train.other_object);
    const Task test = sample_task(rng, Split::Test, reg, cfg);
    EXPECT_GE(test.rewarding_object, 80);
    EXPECT_GE(test.other_object, 80);
    EXPECT_LT(test.rewarding_object, 100);
    EXPECT_NE(test.rewarding_object, test.other_object);
  }
}

TEST(TaskSampling, ContextIsMintedOnceAndReused) {
  EnvConfig cfg = default_env();
  cfg.object_count = 4;
  cfg.train_objects = 3;
  ContextRegistry reg(32, 9);
  Rng rng = make_rng(9, Stream::Tasks);
  std::map<TaskId, std::vector<double>> seen;
  for (int k = 0; k < 500; ++k) {
    const Task t = sample_task(rng, Split::Train, reg, cfg);
    EXPECT_EQ(t.id(), canonical_task_id(t.rewarding_object, t.other_object, cfg));
    auto [it, fresh] = seen.emplace(t.id(), t.context.vector);
    if (!fresh) EXPECT_EQ(it->second, t.context.vector);
  }
  EXPECT_EQ(seen.size(), 6u);
  for (const auto& [id, v] : seen) {
    ASSERT_EQ(v.size(), 32u);
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    EXPECT_NEAR(n2, 1.0, 1e-12);
  }
}

TEST(TaskSampling, ExposureCounterReturnsPriorCount) {
  ContextRegistry reg(4, 1);
  EXPECT_EQ(reg.record_exposure(5), 0);
  EXPECT_EQ(reg.record_exposure(5), 1);
  EXPECT_EQ(reg.record_exposure(7), 0);
  EXPECT_EQ(reg.exposures(5), 2);
}

TEST(HarlowEnv, ResetShowsOneCrossAndNoObjects) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Observation obs = env.reset(make_task(3, 4, cfg), seed);
    EXPECT_EQ(count_symbol(obs, 1), 1);
    EXPECT_EQ(count_objects(obs), 0);
    EXPECT_EQ(env.state().phase, Phase::Fixation);
    EXPECT_EQ(env.state().trial_index, 0);
    EXPECT_EQ(env.state().step_count, 0);
    const int idx = cross_field_index(obs);
    EXPECT_NE(idx, 0);
    EXPECT_NE(idx, cfg.center_index());
  }
}

TEST(HarlowEnv, ResetIsDeterministicPerSeed) {
  const EnvConfig cfg = default_env();
  HarlowEnv a(cfg);
  HarlowEnv b(cfg);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EXPECT_EQ(a.reset(make_task(1, 2, cfg), seed), b.reset(make_task(1, 2, cfg), seed));
  }
}

TEST(HarlowEnv, CrossOffsetIsUniformOverAllowedIndices) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  std::map<int, int> counts;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    ++counts[cross_field_index(env.reset(make_task(0, 1, cfg), static_cast<std::uint64_t>(k) * 2654435761u))];
  }
  const std::set<int> allowed{1, 2, 3, 5, 6, 7};
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / 6.0;
  for (const auto& [idx, c] : counts) {
    EXPECT_TRUE(allowed.count(idx)) << "cross placed at " << idx;
    chi2 += (c - expected) * (c - expected) / expected;
  }
  EXPECT_EQ(counts.size(), 6u);
  // 5 degrees of freedom; 20.52 is the 0.999 quantile.
  EXPECT_LT(chi2, 20.52);
}

TEST(HarlowEnv, CrossAtIndexOneFixatesInThreeSteps) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  std::uint64_t seed = 0;
  while (cross_field_index(env.reset(make_task(0, 1, cfg), seed)) != 1) ++seed;
  double total = 0.0;
  StepOutcome out;
  for (int k = 0; k < 3; ++k) {
    out = env.step(Action::Left);
    total += out.reward;
  }
  EXPECT_TRUE(out.info.fixated);
  EXPECT_TRUE(out.info.retrieval_step);
  EXPECT_DOUBLE_EQ(total, 0.2);
  const Observation obs = env.observation();
  EXPECT_EQ(count_symbol(obs, 1), 0);
  EXPECT_EQ(count_objects(obs), 2);
  EXPECT_GE(obs.symbols[2], 2);
  EXPECT_GE(obs.symbols[6], 2);
}

TEST(HarlowEnv, ChoiceRewardsFollowTheRewardingObject) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  env.reset(make_task(10, 20, cfg), 5);
  fixate(env);
  StepOutcome good = choose(env, true);
  EXPECT_DOUBLE_EQ(good.reward, 1.0);
  EXPECT_TRUE(*good.info.chose_correct);
  EXPECT_EQ(env.state().trial_index, 1);
  EXPECT_EQ(env.state().phase, Phase::Fixation);
  EXPECT_EQ(count_symbol(env.observation(), 1), 1);

  const StepOutcome fix2 = fixate(env);
  EXPECT_FALSE(fix2.info.retrieval_step);
  EXPECT_DOUBLE_EQ(fix2.reward, 0.2);
  StepOutcome bad = choose(env, false);
  EXPECT_DOUBLE_EQ(bad.reward, -1.0);
  EXPECT_FALSE(*bad.info.chose_correct);
}

TEST(HarlowEnv, SixthChoiceEndsTheEpisode) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  env.reset(make_task(2, 3, cfg), 11);
  double fix_total = 0.0;
  double choice_total = 0.0;
  double total = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    EXPECT_FALSE(env.state().done);
    const StepOutcome f = fixate(env);
    fix_total += f.reward;
    const StepOutcome c = choose(env, trial % 2 == 0);
    choice_total += c.reward;
    total += f.reward + c.reward;
  }
  EXPECT_TRUE(env.state().done);
  EXPECT_EQ(env.state().trial_index, 6);
  EXPECT_NEAR(fix_total, 6 * 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(choice_total, 0.0);
  EXPECT_THROW(env.step(Action::Left), ContractViolation);
}

TEST(HarlowEnv, StepCapEndsMidTrial) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  env.reset(make_task(2, 3, cfg), 3);
  fixate(env);
  // Oscillating never reaches an object two cells away.
  int steps = env.state().step_count;
  StepOutcome out;
  while (!env.state().done) {
    out = env.step(steps % 2 == 0 ? Action::Left : Action::Right);
    ++steps;
  }
  EXPECT_EQ(env.state().step_count, 120);
  EXPECT_TRUE(out.done);
  EXPECT_EQ(env.state().trial_index, 0);
}

TEST(HarlowEnv, SixteenLeftTurnsReturnToStart) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  WorldState s;
  s.world_cells.assign(16, Cell::empty());
  s.heading = 5;
  env.restore(s, 1);
  for (int k = 0; k < 16; ++k) env.step(Action::Left);
  EXPECT_EQ(env.state().heading, 5);
}

TEST(HarlowEnv, LeftShiftsVisibleContentRight) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  WorldState s;
  s.world_cells.assign(16, Cell::empty());
  s.heading = 0;
  s.world_cells[2] = Cell::fixation();
  env.restore(s, 1);
  env.step(Action::Left);
  EXPECT_EQ(cross_field_index(env.observation()), 3);
  env.step(Action::Right);
  env.step(Action::Right);
  EXPECT_EQ(cross_field_index(env.observation()), 1);
}

TEST(HarlowEnv, SidesAreShuffledAcrossTrials) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  int left = 0;
  int total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    env.reset(make_task(7, 8, cfg), seed);
    for (int trial = 0; trial < 6; ++trial) {
      fixate(env);
      left += env.observation().symbols[2] == 2 + 7;
      ++total;
      choose(env, true);
    }
  }
  EXPECT_GT(left, total / 2 - 60);
  EXPECT_LT(left, total / 2 + 60);
}

TEST(HarlowEnv, FixedSidesKeepOneSidePerEpisode) {
  EnvConfig cfg = default_env();
  cfg.shuffle_sides = false;
  HarlowEnv env(cfg);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    env.reset(make_task(7, 8, cfg), seed);
    std::set<bool> sides;
    for (int trial = 0; trial < 6; ++trial) {
      fixate(env);
      sides.insert(env.observation().symbols[2] == 2 + 7);
      choose(env, true);
    }
    EXPECT_EQ(sides.size(), 1u);
  }
}

TEST(Oracle, TrivialCases) {
  const EnvConfig cfg = default_env();
  WorldState s;
  s.world_cells.assign(16, Cell::empty());
  s.heading = 3;
  s.world_cells[static_cast<std::size_t>(world_index(s, 4, cfg))] = Cell::fixation();
  EXPECT_EQ(oracle_optimal_steps(s, cfg), 0);

  for (int k = 1; k <= 8; ++k) {
    WorldState t = s;
    std::fill(t.world_cells.begin(), t.world_cells.end(), Cell::empty());
    t.world_cells[static_cast<std::size_t>((s.heading + 4 + k) % 16)] = Cell::fixation();
    EXPECT_EQ(oracle_optimal_steps(t, cfg), k);
    std::fill(t.world_cells.begin(), t.world_cells.end(), Cell::empty());
    t.world_cells[static_cast<std::size_t>((s.heading + 4 - k + 16) % 16)] = Cell::fixation();
    EXPECT_EQ(oracle_optimal_steps(t, cfg), k);
  }

  WorldState c = s;
  std::fill(c.world_cells.begin(), c.world_cells.end(), Cell::empty());
  c.phase = Phase::Choice;
  c.world_cells[static_cast<std::size_t>(world_index(c, 2, cfg))] = Cell::object_cell(0);
  c.world_cells[static_cast<std::size_t>(world_index(c, 6, cfg))] = Cell::object_cell(1);
  EXPECT_EQ(oracle_optimal_steps(c, cfg), 2);
}

TEST(Oracle, ScriptedAgentMatchesBfsOnRandomStates) {
  const auto r = eph::testing::oracle_agreement(default_env(), 1000, 2024);
  EXPECT_EQ(r.states, 1000);
  EXPECT_EQ(r.mismatches, 0);
}

TEST(HarlowEnv, RewardAccountingOverRandomEpisodes) {
  const EnvConfig cfg = default_env();
  HarlowEnv env(cfg);
  Rng rng(77);
  for (int e = 0; e < 200; ++e) {
    env.reset(make_task(4, 9, cfg), static_cast<std::uint64_t>(e));
    double total = 0.0;
    int fixations = 0;
    double choices = 0.0;
    while (!env.state().done) {
      const StepOutcome out = env.step(uniform_index(rng, 2) == 0 ? Action::Left : Action::Right);
      total += out.reward;
      fixations += out.info.fixated;
      if (out.info.chose_correct) choices += *out.info.chose_correct ? 1.0 : -1.0;
      const Observation obs = out.observation;
      if (env.state().phase == Phase::Fixation && !env.state().done) {
        EXPECT_EQ(count_symbol(obs, 1) + count_objects(obs) <= 1, true);
      }
      EXPECT_LE(env.state().step_count, 120);
      EXPECT_LE(env.state().trial_index, 6);
    }
    EXPECT_NEAR(total, 0.2 * fixations + choices, 1e-12);
  }
}

TEST(ObservationEncoder, OneHotBlocksHaveOneActiveEntry) {
  EnvConfig cfg = default_env();
  cfg.one_hot_objects = true;
  const ObservationEncoder enc(cfg);
  EXPECT_EQ(enc.cell_width(), 102);
  EXPECT_EQ(enc.dim(), 816);
  Observation obs;
  obs.symbols = {0, 1, 2, 101, 0, 50, 0, 0};
  const auto v = enc.encode(obs);
  for (int cell = 0; cell < 8; ++cell) {
    double sum = 0.0;
    int active = -1;
    for (int k = 0; k < 102; ++k) {
      sum += v[static_cast<std::size_t>(cell * 102 + k)];
      if (v[static_cast<std::size_t>(cell * 102 + k)] == 1.0) active = k;
    }
    EXPECT_EQ(sum, 1.0);
    EXPECT_EQ(active, obs.symbols[static_cast<std::size_t>(cell)]);
  }
}

TEST(ObservationEncoder, ObjectCodesAreFixedUnitVectors) {
  const EnvConfig cfg = default_env();
  const ObservationEncoder a(cfg);
  const ObservationEncoder b(cfg);
  EXPECT_EQ(a.dim(), 8 * 102);
  Observation obs;
  obs.symbols = {0, 1, 2 + 3, 0, 0, 0, 2 + 90, 0};
  const auto va = a.encode(obs);
  EXPECT_EQ(va, b.encode(obs));
  EXPECT_EQ(va[0], 1.0);
  EXPECT_EQ(va[102 + 1], 1.0);
  for (int cell : {2, 6}) {
    const double* block = va.data() + cell * 102;
    EXPECT_EQ(block[0], 0.0);
    EXPECT_EQ(block[1], 0.0);
    double n2 = 0.0;
    for (int k = 2; k < 102; ++k) n2 += block[k] * block[k];
    EXPECT_NEAR(n2, 1.0, 1e-12);
  }
  // Distinct objects get distinct codes.
  const double* c3 = a.object_code(3);
  const double* c90 = a.object_code(90);
  double dot = 0.0;
  for (int k = 0; k < 100; ++k) dot += c3[k] * c90[k];
  EXPECT_LT(std::abs(dot), 0.9);
}

TEST(ObservationEncoder, RejectsBadSymbols) {
  const ObservationEncoder enc(default_env());
  Observation obs;
  obs.symbols = {0, 0, 0};
  EXPECT_THROW(enc.encode(obs), ContractViolation);
  obs.symbols = {0, 0, 0, 0, 0, 0, 0, 102};
  EXPECT_THROW(enc.encode(obs), ContractViolation);
}
