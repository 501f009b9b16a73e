#include <string>

#include "eph/error.hpp"
#include "eph/model.hpp"

namespace eph {

Gradients backward_episode(const ModelParams& p, std::span<const StepTape> tape,
                           const OutputGradients& seeds, const CellMask* mask) {
  const ModelDims& d = p.dims;
  const int steps = static_cast<int>(tape.size());
  const int h = d.hidden;
  Gradients g = ModelParams::zeros(d);
  if (steps == 0) return g;
  if (seeds.d_logits.cols() != steps || seeds.d_value.size() != steps) {
    throw ContractViolation("backward_episode: output gradients do not match the tape length");
  }

  Matrix d_gates(4 * h, steps);
  Matrix d_rein(h, steps);
  Matrix inputs(d.input_dim(), steps);
  Matrix h_prev(h, steps);
  Matrix h_out(h, steps);

  Vector dh_next = Vector::Zero(h);
  Eigen::ArrayXd dc_next = Eigen::ArrayXd::Zero(h);
  Vector dh(h);

  for (int t = steps - 1; t >= 0; --t) {
    const StepTape& s = tape[static_cast<std::size_t>(t)];
    const auto& gt = s.gates;

    dh = dh_next;
    dh.noalias() += p.policy_w.transpose() * seeds.d_logits.col(t);
    dh += p.value_w.row(0).transpose() * seeds.d_value[t];

    const Eigen::ArrayXd tanh_c = s.tanh_c.array();
    Eigen::ArrayXd dc = dh.array() * gt.o.array() * (1.0 - tanh_c.square()) + dc_next;
    if (mask) {
      for (int j : mask->zeroed_indices()) dc[j] = 0.0;
    }

    const Eigen::ArrayXd i = gt.i.array();
    const Eigen::ArrayXd f = gt.f.array();
    const Eigen::ArrayXd o = gt.o.array();
    const Eigen::ArrayXd ct = gt.c_tilde.array();
    const Eigen::ArrayXd r = gt.r.array();

    d_gates.col(t).segment(0, h) = (dc * ct * i * (1.0 - i)).matrix();
    d_gates.col(t).segment(h, h) = (dc * s.c_prev.array() * f * (1.0 - f)).matrix();
    d_gates.col(t).segment(2 * h, h) = (dh.array() * tanh_c * o * (1.0 - o)).matrix();
    d_gates.col(t).segment(3 * h, h) = (dc * i * (1.0 - ct.square())).matrix();
    d_rein.col(t) = (dc * s.tanh_m.array() * r * (1.0 - r)).matrix();

    dh_next.noalias() = p.lstm_wh.transpose() * d_gates.col(t);
    dh_next.noalias() += p.rein_wh.transpose() * d_rein.col(t);
    dc_next = dc * f;

    inputs.col(t) = s.x;
    h_prev.col(t) = s.h_prev;
    h_out.col(t) = s.h;
  }

  g.lstm_wx.noalias() = d_gates * inputs.transpose();
  g.lstm_wh.noalias() = d_gates * h_prev.transpose();
  g.lstm_b = d_gates.rowwise().sum();
  g.rein_wx.noalias() = d_rein * inputs.transpose();
  g.rein_wh.noalias() = d_rein * h_prev.transpose();
  g.rein_b = d_rein.rowwise().sum();

  g.policy_w.noalias() = seeds.d_logits * h_out.transpose();
  g.policy_b = seeds.d_logits.rowwise().sum();
  g.value_w.noalias() = seeds.d_value.transpose() * h_out.transpose();
  g.value_b[0] = seeds.d_value.sum();

  // Encoder: only the feature slice of the cell input carries parameters.
  Matrix d_inputs = p.lstm_wx.transpose() * d_gates;
  d_inputs.noalias() += p.rein_wx.transpose() * d_rein;
  const auto d_features = d_inputs.topRows(d.encoder_out);

  Matrix enc_hidden(d.encoder_hidden, steps);
  for (int t = 0; t < steps; ++t) enc_hidden.col(t) = tape[static_cast<std::size_t>(t)].enc_hidden;
  g.enc_w2.noalias() = d_features * enc_hidden.transpose();
  g.enc_b2 = d_features.rowwise().sum();

  Matrix d_pre = p.enc_w2.transpose() * d_features;
  Matrix observations(d.observation_dim(), steps);
  for (int t = 0; t < steps; ++t) {
    const StepTape& s = tape[static_cast<std::size_t>(t)];
    auto col = d_pre.col(t);
    col = (s.enc_pre.array() > 0.0).select(col, 0.0);
    observations.col(t) = s.observation;
  }
  g.enc_w1.noalias() = d_pre * observations.transpose();
  g.enc_b1 = d_pre.rowwise().sum();
  return g;
}

}  // namespace eph
