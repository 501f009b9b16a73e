#include "eph/trainer.hpp"

#include <algorithm>
#include <numeric>

namespace eph {

double entropy_coef_at(const TrainConfig& cfg, int episode) {
  if (cfg.episodes_train <= 1) return cfg.entropy_coef_start;
  const double frac = static_cast<double>(episode) / static_cast<double>(cfg.episodes_train - 1);
  return cfg.entropy_coef_start + (cfg.entropy_coef_end - cfg.entropy_coef_start) * frac;
}

TrainResult train_run(const ExperimentConfig& cfg, const EpisodeCallback& on_episode) {
  cfg.validate();
  const std::uint64_t seed = cfg.train.seed;
  const ModelDims dims = ModelDims::from(cfg);

  TrainResult result;
  result.config = cfg;
  result.params = ModelParams::initialized(dims, seed);
  result.memory = EpisodicStore(dims.hidden);
  result.gate_history = Matrix::Zero(cfg.train.episodes_train, dims.hidden);
  result.log.reserve(static_cast<std::size_t>(cfg.train.episodes_train));

  RmsProp optimizer(dims, RmsPropConfig{cfg.train.lr, cfg.train.rmsprop_alpha,
                                        cfg.train.rmsprop_eps, cfg.train.grad_clip_norm});
  ContextRegistry contexts(cfg.model.context_dim, seed);
  Rng task_rng = make_rng(seed, Stream::Tasks);
  Rng env_rng = make_rng(seed, Stream::Environment);
  Rng policy_rng = make_rng(seed, Stream::Policy);
  HarlowEnv env(cfg.env);

  EpisodeOptions options;
  options.mode = Mode::Train;

  for (int e = 0; e < cfg.train.episodes_train; ++e) {
    const Task task = sample_task(task_rng, Split::Train, contexts, cfg.env);
    const int exposure = contexts.record_exposure(task.id());
    RolloutTrace trace =
        run_episode(env, result.params, result.memory, task, env_rng(), policy_rng, options);

    const auto returns = compute_returns(trace.rewards, cfg.train.gamma, 0.0);
    const LossTerms loss = a2c_loss(
        trace, returns, LossCoefficients{cfg.train.value_coef, entropy_coef_at(cfg.train, e)});
    optimizer.step(result.params, backward_episode(result.params, trace.tape, loss.seeds, nullptr));

    trace.record.episode = e;
    trace.record.exposure_count = exposure;
    result.gate_history.row(e) = trace.r_fix().transpose();
    if (on_episode) on_episode(trace.record);
    result.log.push_back(std::move(trace.record));
  }
  result.skipped_updates = optimizer.skipped();
  return result;
}

std::vector<EpisodeRecord> evaluate(const ExperimentConfig& cfg, const ModelParams& params,
                                    EpisodicStore memory, const EvalOptions& options) {
  ContextRegistry contexts(cfg.model.context_dim, options.seed);
  Rng task_rng = make_rng(options.seed, Stream::Tasks);
  Rng env_rng = make_rng(options.seed, Stream::Environment);
  Rng policy_rng = make_rng(options.seed, Stream::Evaluation);
  HarlowEnv env(cfg.env);

  EpisodeOptions ep;
  ep.mode = Mode::Eval;
  ep.mask = options.mask;
  ep.retrieval_enabled = options.retrieval_enabled;
  ep.commit_in_eval = options.commit;
  ep.keep_tape = options.keep_tape;

  std::vector<EpisodeRecord> log;
  log.reserve(static_cast<std::size_t>(options.episodes));
  for (int e = 0; e < options.episodes; ++e) {
    const Task task = sample_task(task_rng, options.split, contexts, cfg.env);
    const int exposure = contexts.record_exposure(task.id());
    RolloutTrace trace = run_episode(env, params, memory, task, env_rng(), policy_rng, ep);
    trace.record.episode = e;
    trace.record.exposure_count = exposure;
    if (options.on_episode) options.on_episode(trace);
    log.push_back(std::move(trace.record));
  }
  return log;
}

double mean_episode_reward(std::span<const EpisodeRecord> log) {
  if (log.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : log) s += r.total_reward;
  return s / static_cast<double>(log.size());
}

FilterResult filter_seeds(std::span<const SeedCandidate> runs, int episodes, int keep) {
  FilterResult out;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& run = runs[k];
    EvalOptions opts;
    opts.split = Split::Train;
    opts.episodes = episodes;
    opts.seed = run.config.analysis.eval_seed;
    const auto log = evaluate(run.config, run.params, run.memory, opts);
    out.all.push_back({k, run.seed, mean_episode_reward(log)});
  }
  std::stable_sort(out.all.begin(), out.all.end(),
                   [](const SeedScore& a, const SeedScore& b) { return a.mean_reward > b.mean_reward; });
  if (static_cast<int>(runs.size()) < keep) {
    out.warnings.push_back("only " + std::to_string(runs.size()) + " runs supplied; keeping all of them (requested " +
                           std::to_string(keep) + ")");
  }
  const auto n = std::min<std::size_t>(out.all.size(), static_cast<std::size_t>(keep));
  out.accepted.assign(out.all.begin(), out.all.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace eph
