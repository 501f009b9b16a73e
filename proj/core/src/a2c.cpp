#include "eph/a2c.hpp"

#include <cmath>

#include "eph/error.hpp"

namespace eph {
namespace {

struct TensorView {
  double* data;
  Eigen::Index size;
};

std::vector<TensorView> views(ModelParams& p) {
  std::vector<TensorView> out;
  p.for_each([&](std::string_view, auto& t) { out.push_back({t.data(), t.size()}); });
  return out;
}

}  // namespace

Vector RolloutTrace::r_fix() const {
  if (reinstatement.empty()) return {};
  if (retrieval_step >= 0) return reinstatement[static_cast<std::size_t>(retrieval_step)];
  return reinstatement.back();
}

RolloutTrace run_episode(HarlowEnv& env, const ModelParams& params, EpisodicStore& memory,
                         const Task& task, std::uint64_t env_seed, Rng& policy_rng,
                         const EpisodeOptions& options) {
  const EnvConfig& cfg = env.config();
  const int hidden = params.dims.hidden;
  RolloutTrace trace;
  trace.task = task;
  trace.env_seed = env_seed;
  trace.record.task_id = task.id();
  trace.record.trials.resize(static_cast<std::size_t>(cfg.trials));

  Observation obs = env.reset(task, env_seed);
  EpLstmState state = EpLstmState::zeros(hidden);
  const Vector zero = Vector::Zero(hidden);
  double prev_reward = 0.0;
  std::optional<Action> prev_action;
  bool memory_due = false;
  int fixation_steps = 0;

  for (int t = 0;; ++t) {
    const Vector* m = &zero;
    if (memory_due) {
      trace.retrieval_step = t;
      trace.retrieved = options.retrieval_enabled ? memory.retrieve(task.context) : zero;
      m = &trace.retrieved;
      memory_due = false;
    }
    StepTape st = forward_step(params, encode_observation(env.encoder(), obs), prev_reward,
                               prev_action, state, *m, options.mask);

    const Vector logp = log_softmax(st.logits);
    const Action action = uniform01(policy_rng) < std::exp(logp[0]) ? Action::Left : Action::Right;

    trace.observations.push_back(obs);
    trace.actions.push_back(action);
    trace.log_probs.push_back(logp[static_cast<int>(action)]);
    trace.values.push_back(st.value);
    trace.logits.push_back(st.logits);
    trace.reinstatement.push_back(st.gates.r);

    StepOutcome out = env.step(action);
    trace.rewards.push_back(out.reward);
    trace.infos.push_back(out.info);
    trace.headings.push_back(env.state().heading);

    auto& trial = trace.record.trials[static_cast<std::size_t>(out.info.trial_index)];
    if (out.info.phase == Phase::Fixation) {
      ++fixation_steps;
      if (out.info.fixated) {
        trial.fixated = true;
        trial.steps_to_fixation = fixation_steps;
        fixation_steps = 0;
      }
    }
    if (out.info.chose_correct) {
      trial.completed = true;
      trial.correct = *out.info.chose_correct;
      trial.reward = out.reward;
    }
    if (out.info.retrieval_step) memory_due = true;

    state.h = st.h;
    state.c = st.c;
    prev_reward = out.reward;
    prev_action = action;
    obs = std::move(out.observation);
    trace.record.total_reward += out.reward;
    if (options.keep_tape) trace.tape.push_back(std::move(st));
    if (out.done) break;
  }

  trace.record.steps = static_cast<int>(trace.actions.size());
  trace.final_cell = state.c;
  if (options.mode == Mode::Train || options.commit_in_eval) {
    memory.store(task.context, state.c);
  }
  return trace;
}

RolloutTrace replay_forward(const ModelParams& params, const ObservationEncoder& encoder,
                            const RolloutTrace& trace, const CellMask* mask) {
  RolloutTrace out = trace;
  out.tape.clear();
  out.log_probs.clear();
  out.values.clear();
  out.logits.clear();
  out.reinstatement.clear();

  const int hidden = params.dims.hidden;
  const Vector zero = Vector::Zero(hidden);
  EpLstmState state = EpLstmState::zeros(hidden);
  for (std::size_t t = 0; t < trace.length(); ++t) {
    const bool at_retrieval = static_cast<int>(t) == trace.retrieval_step;
    const Vector& m = at_retrieval ? trace.retrieved : zero;
    const double prev_reward = t == 0 ? 0.0 : trace.rewards[t - 1];
    const std::optional<Action> prev_action =
        t == 0 ? std::nullopt : std::optional<Action>(trace.actions[t - 1]);
    StepTape st = forward_step(params, encode_observation(encoder, trace.observations[t]),
                               prev_reward, prev_action, state, m, mask);
    const Vector logp = log_softmax(st.logits);
    out.log_probs.push_back(logp[static_cast<int>(trace.actions[t])]);
    out.values.push_back(st.value);
    out.logits.push_back(st.logits);
    out.reinstatement.push_back(st.gates.r);
    state.h = st.h;
    state.c = st.c;
    out.tape.push_back(std::move(st));
  }
  out.final_cell = state.c;
  return out;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap) {
  std::vector<double> out(rewards.size());
  double running = bootstrap;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    running = rewards[k] + gamma * running;
    out[k] = running;
  }
  return out;
}

LossTerms a2c_loss(std::span<const Vector> logits, std::span<const double> values,
                   std::span<const Action> actions, std::span<const double> returns,
                   std::span<const double> advantages, const LossCoefficients& coefs) {
  const std::size_t steps = actions.size();
  if (logits.size() != steps || values.size() != steps || returns.size() != steps ||
      advantages.size() != steps) {
    throw ContractViolation("a2c_loss: sequence lengths differ");
  }
  LossTerms out;
  const auto n_actions = steps == 0 ? 2 : logits[0].size();
  out.seeds.d_logits = Matrix::Zero(n_actions, static_cast<Eigen::Index>(steps));
  out.seeds.d_value = Vector::Zero(static_cast<Eigen::Index>(steps));

  for (std::size_t t = 0; t < steps; ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    const Vector logp = log_softmax(logits[t]);
    const Eigen::ArrayXd p = logp.array().exp();
    const double entropy = -(p * logp.array()).sum();
    const int a = static_cast<int>(actions[t]);
    const double adv = advantages[t];
    const double err = returns[t] - values[t];

    out.policy += -logp[a] * adv;
    out.value += err * err;
    out.entropy += entropy;

    Eigen::ArrayXd d = adv * p;
    d[a] -= adv;
    d += coefs.entropy_coef * p * (logp.array() + entropy);
    out.seeds.d_logits.col(col) = d.matrix();
    out.seeds.d_value[col] = -2.0 * coefs.value_coef * err;
  }
  out.total = out.policy + coefs.value_coef * out.value - coefs.entropy_coef * out.entropy;
  return out;
}

LossTerms a2c_loss(const RolloutTrace& trace, std::span<const double> returns,
                   const LossCoefficients& coefs) {
  std::vector<double> adv(returns.size());
  for (std::size_t t = 0; t < adv.size(); ++t) adv[t] = returns[t] - trace.values.at(t);
  return a2c_loss(trace.logits, trace.values, trace.actions, returns, adv, coefs);
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

RmsProp::RmsProp(const ModelDims& dims, RmsPropConfig cfg)
    : cfg_(cfg), square_avg_(ModelParams::zeros(dims)) {}

bool RmsProp::step(ModelParams& params, Gradients grads) {
  if (!grads.all_finite()) {
    ++skipped_;
    return false;
  }
  clip_global_norm(grads, cfg_.clip_norm);
  auto p = views(params);
  auto g = views(grads);
  auto s = views(square_avg_);
  for (std::size_t k = 0; k < p.size(); ++k) {
    Eigen::Map<Eigen::ArrayXd> pk(p[k].data, p[k].size);
    Eigen::Map<Eigen::ArrayXd> gk(g[k].data, g[k].size);
    Eigen::Map<Eigen::ArrayXd> sk(s[k].data, s[k].size);
    sk = cfg_.alpha * sk + (1.0 - cfg_.alpha) * gk.square();
    pk -= cfg_.lr * gk / (sk.sqrt() + cfg_.eps);
  }
  return true;
}

}  // namespace eph
