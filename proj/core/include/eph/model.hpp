#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eph/config.hpp"
#include "eph/harlow_env.hpp"

namespace eph {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ModelDims {
  int field_cells = 8;
  int cell_width = 102;
  int encoder_hidden = 64;
  int encoder_out = 128;
  int hidden = 256;
  int actions = 2;

  int observation_dim() const { return field_cells * cell_width; }
  /// Encoder features, previous reward, one-hot previous action.
  int input_dim() const { return encoder_out + 1 + actions; }

  static ModelDims from(const ExperimentConfig& cfg);
  bool operator==(const ModelDims&) const = default;
};

/// All trainable tensors. LSTM gate blocks are stacked row-wise in the
/// order input, forget, output, candidate.
struct ModelParams {
  ModelDims dims;
  Matrix enc_w1;  // encoder_hidden x observation_dim
  Vector enc_b1;
  Matrix enc_w2;  // encoder_out x encoder_hidden
  Vector enc_b2;
  Matrix lstm_wx;  // 4H x input_dim
  Matrix lstm_wh;  // 4H x H
  Vector lstm_b;
  Matrix rein_wx;  // H x input_dim
  Matrix rein_wh;  // H x H
  Vector rein_b;
  Matrix policy_w;  // actions x H
  Vector policy_b;
  Matrix value_w;  // 1 x H
  Vector value_b;

  static ModelParams zeros(const ModelDims& dims);
  /// Uniform(+-1/sqrt(fan_in)) weights, forget bias 1, other biases 0.
  static ModelParams initialized(const ModelDims& dims, std::uint64_t seed);

  /// Calls f(name, tensor) for every tensor in a fixed order.
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;
  double squared_norm() const;
  void scale(double factor);
  /// this += factor * other
  void add_scaled(const ModelParams& other, double factor);

  bool operator==(const ModelParams& other) const;

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    f("encoder.w1", self.enc_w1);
    f("encoder.b1", self.enc_b1);
    f("encoder.w2", self.enc_w2);
    f("encoder.b2", self.enc_b2);
    f("lstm.w_x", self.lstm_wx);
    f("lstm.w_h", self.lstm_wh);
    f("lstm.b", self.lstm_b);
    f("reinstate.w_x", self.rein_wx);
    f("reinstate.w_h", self.rein_wh);
    f("reinstate.b", self.rein_b);
    f("policy.w", self.policy_w);
    f("policy.b", self.policy_b);
    f("value.w", self.value_w);
    f("value.b", self.value_b);
  }
};

using Gradients = ModelParams;

struct EpLstmState {
  Vector h;
  Vector c;

  static EpLstmState zeros(int hidden);
};

struct GateTrace {
  Vector i, f, o, c_tilde, r, m;
};

/// Cell-state units forced to zero at every step.
class CellMask {
 public:
  CellMask() = default;
  /// Throws ContractViolation on duplicates or out-of-range indices.
  CellMask(int hidden, std::vector<int> zeroed_indices);

  static CellMask all(int hidden);

  const std::vector<int>& zeroed_indices() const { return zeroed_; }
  bool dropped(int j) const { return flags_[static_cast<std::size_t>(j)] != 0; }
  bool empty() const { return zeroed_.empty(); }
  int hidden() const { return static_cast<int>(flags_.size()); }

 private:
  std::vector<int> zeroed_;
  std::vector<std::uint8_t> flags_;
};

struct EncoderActivations {
  Vector pre_hidden;
  Vector hidden;
  Vector features;
};

/// Observation as the network input vector.
Vector encode_observation(const ObservationEncoder& encoder, const Observation& obs);

/// affine -> ReLU -> affine, no nonlinearity on the output.
EncoderActivations encode_detailed(const ModelParams& params, const Vector& observation);
Vector encode(const ModelParams& params, const Vector& observation);

/// [features, prev_reward, one-hot prev_action]; no previous action
/// (episode start) encodes as all zeros.
Vector build_input(const Vector& features, double prev_reward, std::optional<Action> prev_action,
                   int actions = 2);

struct CellStep {
  EpLstmState state;
  GateTrace gates;
  Vector tanh_c;
};

/// One epLSTM step. `m` is the retrieved memory (zero when nothing is
/// reinstated at this step). The mask zeroes units of c before output gating.
CellStep eplstm_step(const ModelParams& params, const Vector& x, const EpLstmState& state,
                     const Vector& m, const CellMask* mask = nullptr);

struct PolicyValue {
  Vector logits;
  double value = 0.0;
};

PolicyValue policy_value(const ModelParams& params, const Vector& h);
Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);

/// Everything from one forward step that the backward pass needs.
struct StepTape {
  Vector observation;
  Vector enc_pre;
  Vector enc_hidden;
  Vector x;
  Vector h_prev;
  Vector c_prev;
  GateTrace gates;
  Vector tanh_m;
  Vector c;
  Vector tanh_c;
  Vector h;
  Vector logits;
  double value = 0.0;
};

/// Encoder, input assembly, cell and heads in one call.
StepTape forward_step(const ModelParams& params, const Vector& observation, double prev_reward,
                      std::optional<Action> prev_action, const EpLstmState& state,
                      const Vector& m, const CellMask* mask);

/// dLoss/dlogits (actions x T) and dLoss/dvalue (T) for an episode.
struct OutputGradients {
  Matrix d_logits;
  Vector d_value;
};

/// Exact reverse-mode gradients through the whole episode.
Gradients backward_episode(const ModelParams& params, std::span<const StepTape> tape,
                           const OutputGradients& seeds, const CellMask* mask);

}  // namespace eph
