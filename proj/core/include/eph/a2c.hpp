#pragma once

#include <optional>
#include <span>
#include <vector>

#include "eph/episodic_memory.hpp"
#include "eph/harlow_env.hpp"
#include "eph/model.hpp"

namespace eph {

enum class Mode : std::uint8_t { Train, Eval };

struct TrialRecord {
  bool fixated = false;
  int steps_to_fixation = -1;
  bool completed = false;
  bool correct = false;
  double reward = 0.0;  // choice reward only; the fixation bonus is excluded
};

/// Per-episode summary used by logs and analyses.
struct EpisodeRecord {
  int episode = 0;
  TaskId task_id = -1;
  int exposure_count = 0;
  std::vector<TrialRecord> trials;
  double total_reward = 0.0;
  int steps = 0;
};

struct EpisodeOptions {
  Mode mode = Mode::Train;
  const CellMask* mask = nullptr;
  bool retrieval_enabled = true;
  /// Evaluation also commits c_T so later repeats of a test task can be
  /// recognised; training always commits.
  bool commit_in_eval = true;
  /// Keep the per-step activations needed for backward_episode and
  /// cell-state analyses.
  bool keep_tape = true;
};

struct RolloutTrace {
  Task task;
  std::uint64_t env_seed = 0;
  std::vector<Observation> observations;  // model input at each step
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<Vector> logits;
  std::vector<Vector> reinstatement;  // r_t at every step
  std::vector<StepInfo> infos;        // environment info after each action
  std::vector<int> headings;          // agent heading after each action
  std::vector<StepTape> tape;         // empty unless keep_tape
  int retrieval_step = -1;            // model step that received memory, -1 if none
  Vector retrieved;                   // m at that step
  Vector final_cell;                  // c_T
  EpisodeRecord record;

  std::size_t length() const { return actions.size(); }
  /// Reinstatement gate at the retrieval step, or at the last step when the
  /// first fixation never happened.
  Vector r_fix() const;
};

/// Rolls out one episode of `task` with actions sampled from the policy.
/// Memory is supplied only at the step that first observes the object pair.
RolloutTrace run_episode(HarlowEnv& env, const ModelParams& params, EpisodicStore& memory,
                         const Task& task, std::uint64_t env_seed, Rng& policy_rng,
                         const EpisodeOptions& options);

/// Recomputes every activation of `trace` under `params`, keeping its
/// observations, actions, rewards and memory input fixed.
RolloutTrace replay_forward(const ModelParams& params, const ObservationEncoder& encoder,
                            const RolloutTrace& trace, const CellMask* mask = nullptr);

/// R_t = r_t + gamma * R_{t+1}, seeded by `bootstrap` past the last step.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap = 0.0);

struct LossCoefficients {
  double value_coef = 0.5;
  double entropy_coef = 0.05;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;  // summed entropy, before the coefficient
  OutputGradients seeds;
};

/// policy + value_coef * sum (R - V)^2 - entropy_coef * sum H, with the
/// advantages held constant.
LossTerms a2c_loss(std::span<const Vector> logits, std::span<const double> values,
                   std::span<const Action> actions, std::span<const double> returns,
                   std::span<const double> advantages, const LossCoefficients& coefs);

/// Advantages taken as returns minus the trace's own value estimates.
LossTerms a2c_loss(const RolloutTrace& trace, std::span<const double> returns,
                   const LossCoefficients& coefs);

/// Scales `grads` in place so their global norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

struct RmsPropConfig {
  double lr = 7e-4;
  double alpha = 0.99;
  double eps = 1e-5;
  double clip_norm = 40.0;
};

class RmsProp {
 public:
  RmsProp(const ModelDims& dims, RmsPropConfig cfg);

  /// Clips and applies one update. Non-finite gradients leave the
  /// parameters untouched and return false.
  bool step(ModelParams& params, Gradients grads);

  const ModelParams& square_average() const { return square_avg_; }
  std::size_t skipped() const { return skipped_; }

 private:
  RmsPropConfig cfg_;
  ModelParams square_avg_;
  std::size_t skipped_ = 0;
};

}  // namespace eph
