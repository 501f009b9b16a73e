#include "eph/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eph/error.hpp"
#include "eph/rng.hpp"

namespace eph {
namespace {

Vector sigmoid(const Vector& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw ContractViolation(std::string("non-finite ") + what);
}

template <class T>
void fill_uniform(T& t, double bound, Rng& rng) {
  for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = (2.0 * uniform01(rng) - 1.0) * bound;
}

}  // namespace

ModelDims ModelDims::from(const ExperimentConfig& cfg) {
  ModelDims d;
  d.field_cells = cfg.env.field_size;
  d.cell_width = cfg.env.cell_width();
  d.encoder_hidden = cfg.model.encoder_hidden;
  d.encoder_out = cfg.model.encoder_out;
  d.hidden = cfg.model.hidden;
  d.actions = 2;
  return d;
}

ModelParams ModelParams::zeros(const ModelDims& d) {
  ModelParams p;
  p.dims = d;
  const int in = d.input_dim();
  const int h = d.hidden;
  p.enc_w1 = Matrix::Zero(d.encoder_hidden, d.observation_dim());
  p.enc_b1 = Vector::Zero(d.encoder_hidden);
  p.enc_w2 = Matrix::Zero(d.encoder_out, d.encoder_hidden);
  p.enc_b2 = Vector::Zero(d.encoder_out);
  p.lstm_wx = Matrix::Zero(4 * h, in);
  p.lstm_wh = Matrix::Zero(4 * h, h);
  p.lstm_b = Vector::Zero(4 * h);
  p.rein_wx = Matrix::Zero(h, in);
  p.rein_wh = Matrix::Zero(h, h);
  p.rein_b = Vector::Zero(h);
  p.policy_w = Matrix::Zero(d.actions, h);
  p.policy_b = Vector::Zero(d.actions);
  p.value_w = Matrix::Zero(1, h);
  p.value_b = Vector::Zero(1);
  return p;
}

ModelParams ModelParams::initialized(const ModelDims& d, std::uint64_t seed) {
  ModelParams p = zeros(d);
  Rng rng = make_rng(seed, Stream::Init);
  p.for_each([&](std::string_view, auto& t) {
    if (t.cols() > 1) fill_uniform(t, 1.0 / std::sqrt(static_cast<double>(t.cols())), rng);
  });
  p.lstm_b.segment(d.hidden, d.hidden).setOnes();
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](std::string_view, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for_each([&](std::string_view, const auto& t) { s += t.squaredNorm(); });
  return s;
}

void ModelParams::scale(double factor) {
  for_each([&](std::string_view, auto& t) { t *= factor; });
}

void ModelParams::add_scaled(const ModelParams& other, double factor) {
  auto dst = std::vector<double*>{};
  for_each([&](std::string_view, auto& t) { dst.push_back(t.data()); });
  std::size_t k = 0;
  other.for_each([&](std::string_view, const auto& t) {
    Eigen::Map<Eigen::ArrayXd>(dst[k++], t.size()) += factor * t.array().reshaped();
  });
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(dims == other.dims)) return false;
  std::vector<const double*> mine;
  std::vector<Eigen::Index> sizes;
  for_each([&](std::string_view, const auto& t) {
    mine.push_back(t.data());
    sizes.push_back(t.size());
  });
  bool same = true;
  std::size_t k = 0;
  other.for_each([&](std::string_view, const auto& t) {
    same = same && t.size() == sizes[k] && std::equal(t.data(), t.data() + t.size(), mine[k]);
    ++k;
  });
  return same;
}

EpLstmState EpLstmState::zeros(int hidden) {
  return {Vector::Zero(hidden), Vector::Zero(hidden)};
}

CellMask::CellMask(int hidden, std::vector<int> zeroed_indices)
    : zeroed_(std::move(zeroed_indices)), flags_(static_cast<std::size_t>(hidden), 0) {
  for (int j : zeroed_) {
    if (j < 0 || j >= hidden) {
      throw ContractViolation("mask index " + std::to_string(j) + " out of range");
    }
    if (flags_[static_cast<std::size_t>(j)]) {
      throw ContractViolation("duplicate mask index " + std::to_string(j));
    }
    flags_[static_cast<std::size_t>(j)] = 1;
  }
}

CellMask CellMask::all(int hidden) {
  std::vector<int> idx(static_cast<std::size_t>(hidden));
  for (int j = 0; j < hidden; ++j) idx[static_cast<std::size_t>(j)] = j;
  return CellMask(hidden, std::move(idx));
}

Vector encode_observation(const ObservationEncoder& encoder, const Observation& obs) {
  Vector v(encoder.dim());
  encoder.encode_into(obs, v.data());
  return v;
}

EncoderActivations encode_detailed(const ModelParams& p, const Vector& observation) {
  if (observation.size() != p.dims.observation_dim()) {
    throw ContractViolation("observation width does not match the model");
  }
  EncoderActivations a;
  a.pre_hidden = p.enc_b1;
  a.pre_hidden.noalias() += p.enc_w1 * observation;
  a.hidden = a.pre_hidden.cwiseMax(0.0);
  a.features = p.enc_b2;
  a.features.noalias() += p.enc_w2 * a.hidden;
  return a;
}

Vector encode(const ModelParams& params, const Vector& observation) {
  return encode_detailed(params, observation).features;
}

Vector build_input(const Vector& features, double prev_reward, std::optional<Action> prev_action,
                   int actions) {
  Vector x = Vector::Zero(features.size() + 1 + actions);
  x.head(features.size()) = features;
  x[features.size()] = prev_reward;
  if (prev_action) x[features.size() + 1 + static_cast<int>(*prev_action)] = 1.0;
  return x;
}

CellStep eplstm_step(const ModelParams& p, const Vector& x, const EpLstmState& state,
                     const Vector& m, const CellMask* mask) {
  const int h = p.dims.hidden;
  if (x.size() != p.dims.input_dim() || state.h.size() != h || state.c.size() != h ||
      m.size() != h) {
    throw ContractViolation("eplstm_step: dimension mismatch");
  }
  require_finite(x, "cell input");
  require_finite(state.h, "hidden state");
  require_finite(state.c, "cell state");
  require_finite(m, "retrieved memory");

  Vector pre = p.lstm_b;
  pre.noalias() += p.lstm_wx * x;
  pre.noalias() += p.lstm_wh * state.h;
  Vector pre_r = p.rein_b;
  pre_r.noalias() += p.rein_wx * x;
  pre_r.noalias() += p.rein_wh * state.h;

  CellStep out;
  GateTrace& g = out.gates;
  g.i = sigmoid(pre.segment(0, h));
  g.f = sigmoid(pre.segment(h, h));
  g.o = sigmoid(pre.segment(2 * h, h));
  g.c_tilde = pre.segment(3 * h, h).array().tanh().matrix();
  g.r = sigmoid(pre_r);
  g.m = m;

  Vector c = (g.i.array() * g.c_tilde.array() + g.f.array() * state.c.array() +
              g.r.array() * m.array().tanh())
                 .matrix();
  if (mask) {
    for (int j : mask->zeroed_indices()) c[j] = 0.0;
  }
  out.tanh_c = c.array().tanh().matrix();
  out.state.h = (g.o.array() * out.tanh_c.array()).matrix();
  out.state.c = std::move(c);
  return out;
}

PolicyValue policy_value(const ModelParams& p, const Vector& h) {
  PolicyValue out;
  out.logits = p.policy_b;
  out.logits.noalias() += p.policy_w * h;
  out.value = p.value_w.row(0).dot(h) + p.value_b[0];
  return out;
}

Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

Vector softmax(const Vector& logits) { return log_softmax(logits).array().exp().matrix(); }

StepTape forward_step(const ModelParams& params, const Vector& observation, double prev_reward,
                      std::optional<Action> prev_action, const EpLstmState& state,
                      const Vector& m, const CellMask* mask) {
  StepTape t;
  EncoderActivations enc = encode_detailed(params, observation);
  t.observation = observation;
  t.x = build_input(enc.features, prev_reward, prev_action, params.dims.actions);
  t.enc_pre = std::move(enc.pre_hidden);
  t.enc_hidden = std::move(enc.hidden);
  t.h_prev = state.h;
  t.c_prev = state.c;

  CellStep cell = eplstm_step(params, t.x, state, m, mask);
  t.tanh_m = m.array().tanh().matrix();
  t.gates = std::move(cell.gates);
  t.c = std::move(cell.state.c);
  t.tanh_c = std::move(cell.tanh_c);
  t.h = std::move(cell.state.h);

  PolicyValue pv = policy_value(params, t.h);
  t.logits = std::move(pv.logits);
  t.value = pv.value;
  return t;
}

}  // namespace eph
