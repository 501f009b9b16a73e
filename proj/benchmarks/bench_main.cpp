#include <benchmark/benchmark.h>

#include "eph/a2c.hpp"
#include "eph/config.hpp"

namespace {

using namespace eph;

Vector random_vector(int n, Rng& rng) {
  Vector v(n);
  for (int k = 0; k < n; ++k) v[k] = standard_normal(rng);
  return v;
}

void BM_EpLstmStep(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.model.hidden = static_cast<int>(state.range(0));
  const ModelDims d = ModelDims::from(cfg);
  const ModelParams p = ModelParams::initialized(d, 1);
  Rng rng(1);
  const Vector x = random_vector(d.input_dim(), rng);
  const Vector m = random_vector(d.hidden, rng);
  EpLstmState s = EpLstmState::zeros(d.hidden);
  for (auto _ : state) {
    CellStep out = eplstm_step(p, x, s, m);
    benchmark::DoNotOptimize(out.state.c.data());
  }
}
BENCHMARK(BM_EpLstmStep)->Arg(64)->Arg(256);

void BM_ForwardStep(benchmark::State& state) {
  const ExperimentConfig cfg;
  const ModelParams p = ModelParams::initialized(ModelDims::from(cfg), 1);
  HarlowEnv env(cfg.env);
  Task task;
  task.context.task_id = canonical_task_id(0, 1, cfg.env);
  const Vector obs = encode_observation(env.encoder(), env.reset(task, 1));
  const EpLstmState s = EpLstmState::zeros(cfg.model.hidden);
  const Vector m = Vector::Zero(cfg.model.hidden);
  for (auto _ : state) {
    StepTape st = forward_step(p, obs, 0.0, std::nullopt, s, m, nullptr);
    benchmark::DoNotOptimize(st.value);
  }
}
BENCHMARK(BM_ForwardStep);

struct Episode {
  ExperimentConfig cfg;
  ModelParams params;
  HarlowEnv env{cfg.env};
  EpisodicStore memory{cfg.model.hidden};
  ContextRegistry contexts{cfg.model.context_dim, 1};
  Task task;

  Episode() : params(ModelParams::initialized(ModelDims::from(cfg), 1)) {
    Rng rng(1);
    task = sample_task(rng, Split::Train, contexts, cfg.env);
  }
};

void BM_RunEpisode(benchmark::State& state) {
  Episode e;
  Rng policy(2);
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  for (auto _ : state) {
    RolloutTrace tr = run_episode(e.env, e.params, e.memory, e.task, seed++, policy, {});
    steps += tr.length();
  }
  state.counters["steps/episode"] = static_cast<double>(steps) / static_cast<double>(state.iterations());
}
BENCHMARK(BM_RunEpisode)->Unit(benchmark::kMillisecond);

void BM_BackwardEpisode(benchmark::State& state) {
  Episode e;
  Rng policy(2);
  const RolloutTrace tr = run_episode(e.env, e.params, e.memory, e.task, 7, policy, {});
  const auto returns = compute_returns(tr.rewards, e.cfg.train.gamma);
  const LossTerms loss = a2c_loss(tr, returns, {});
  for (auto _ : state) {
    Gradients g = backward_episode(e.params, tr.tape, loss.seeds, nullptr);
    benchmark::DoNotOptimize(g.lstm_b.data());
  }
  state.counters["steps"] = static_cast<double>(tr.length());
}
BENCHMARK(BM_BackwardEpisode)->Unit(benchmark::kMillisecond);

void BM_EnvStep(benchmark::State& state) {
  const EnvConfig cfg;
  HarlowEnv env(cfg);
  Task task;
  task.context.task_id = canonical_task_id(0, 1, cfg);
  Rng rng(3);
  std::uint64_t seed = 0;
  env.reset(task, seed);
  for (auto _ : state) {
    StepOutcome o = env.step(uniform01(rng) < 0.5 ? Action::Left : Action::Right);
    if (o.done) env.reset(task, ++seed);
    benchmark::DoNotOptimize(o.reward);
  }
}
BENCHMARK(BM_EnvStep);

}  // namespace

BENCHMARK_MAIN();
