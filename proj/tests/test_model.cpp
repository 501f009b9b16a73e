#include <gtest/gtest.h>

#include <cmath>

#include "eph/error.hpp"
#include "eph/model.hpp"
#include "eph_test_support.hpp"

using namespace eph;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.field_cells = 2;
  d.cell_width = 5;
  d.encoder_hidden = 4;
  d.encoder_out = 3;
  d.hidden = 6;
  return d;
}

Vector random_vector(int n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (int k = 0; k < n; ++k) v[k] = scale * standard_normal(rng);
  return v;
}

}  // namespace

TEST(ModelDims, DefaultShapes) {
  const ModelDims d = ModelDims::from(ExperimentConfig{});
  EXPECT_EQ(d.observation_dim(), 816);
  EXPECT_EQ(d.input_dim(), 131);
  const ModelParams p = ModelParams::initialized(d, 1);
  EXPECT_EQ(p.enc_w1.rows(), 64);
  EXPECT_EQ(p.enc_w1.cols(), 816);
  EXPECT_EQ(p.enc_w2.rows(), 128);
  EXPECT_EQ(p.lstm_wx.rows(), 4 * 256);
  EXPECT_EQ(p.lstm_wx.cols(), 131);
  EXPECT_EQ(p.rein_wh.rows(), 256);
  EXPECT_EQ(p.rein_wh.cols(), 256);
  EXPECT_EQ(p.policy_w.rows(), 2);
  EXPECT_EQ(p.value_w.cols(), 256);
  const std::size_t expected = 64 * 816 + 64 + 128 * 64 + 128 + 4 * 256 * (131 + 256 + 1) +
                               256 * (131 + 256 + 1) + 2 * 256 + 2 + 256 + 1;
  EXPECT_EQ(p.parameter_count(), expected);
}

TEST(ModelParams, InitializationIsSeededAndBiasesForgetGate) {
  const ModelDims d = small_dims();
  EXPECT_TRUE(ModelParams::initialized(d, 3) == ModelParams::initialized(d, 3));
  EXPECT_FALSE(ModelParams::initialized(d, 3) == ModelParams::initialized(d, 4));
  const ModelParams p = ModelParams::initialized(d, 3);
  EXPECT_TRUE((p.lstm_b.segment(d.hidden, d.hidden).array() == 1.0).all());
  EXPECT_TRUE((p.lstm_b.head(d.hidden).array() == 0.0).all());
  const double bound = 1.0 / std::sqrt(static_cast<double>(d.input_dim()));
  EXPECT_LE(p.lstm_wx.cwiseAbs().maxCoeff(), bound);
}

TEST(Encoder, ZeroWeightsGiveZeroFeatures) {
  const ModelParams p = ModelParams::zeros(small_dims());
  Rng rng(1);
  EXPECT_TRUE(encode(p, random_vector(10, rng)).isZero(0.0));
}

TEST(Encoder, NegativeFirstLayerLeavesSecondBias) {
  const ModelDims d = small_dims();
  ModelParams p = ModelParams::zeros(d);
  p.enc_b1.setConstant(-1.0);
  p.enc_w2.setConstant(3.0);
  p.enc_b2 << 0.5, -0.25, 2.0;
  Vector obs = Vector::Zero(10);
  obs[0] = 1.0;
  p.enc_w1.setConstant(-0.5);
  const EncoderActivations a = encode_detailed(p, obs);
  EXPECT_TRUE(a.hidden.isZero(0.0));
  EXPECT_EQ(a.features, p.enc_b2);
}

TEST(Encoder, MatchesHandComputation) {
  const ModelDims d = small_dims();
  Rng rng(5);
  ModelParams p = ModelParams::initialized(d, 5);
  const Vector obs = random_vector(10, rng);
  Vector expect = p.enc_b2;
  for (int o = 0; o < d.encoder_out; ++o) {
    for (int h = 0; h < d.encoder_hidden; ++h) {
      double pre = p.enc_b1[h];
      for (int k = 0; k < 10; ++k) pre += p.enc_w1(h, k) * obs[k];
      expect[o] += p.enc_w2(o, h) * std::max(pre, 0.0);
    }
  }
  EXPECT_LT((encode(p, obs) - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(encode(p, obs), encode(p, obs));
  EXPECT_THROW(encode(p, Vector::Zero(9)), ContractViolation);
}

TEST(BuildInput, LayoutAndEpisodeStart) {
  Vector f(128);
  for (int k = 0; k < 128; ++k) f[k] = 0.01 * k;
  const Vector x = build_input(f, 0.2, Action::Right);
  ASSERT_EQ(x.size(), 131);
  EXPECT_EQ(x.head(128), f);
  EXPECT_EQ(x[128], 0.2);
  EXPECT_EQ(x[129], 0.0);
  EXPECT_EQ(x[130], 1.0);

  const Vector start = build_input(f, 0.0, std::nullopt);
  EXPECT_EQ(start[128], 0.0);
  EXPECT_EQ(start[129], 0.0);
  EXPECT_EQ(start[130], 0.0);
  EXPECT_EQ(build_input(f, -1.0, Action::Left)[129], 1.0);
}

TEST(EpLstm, ZeroParamsWithMemory) {
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::zeros(d);
  Vector v(d.hidden);
  v << -2.0, -0.5, 0.0, 0.3, 1.0, 4.0;
  const CellStep out = eplstm_step(p, Vector::Zero(d.input_dim()), EpLstmState::zeros(d.hidden), v);
  for (int j = 0; j < d.hidden; ++j) {
    EXPECT_NEAR(out.state.c[j], 0.5 * std::tanh(v[j]), 1e-15);
    EXPECT_NEAR(out.state.h[j], 0.5 * std::tanh(0.5 * std::tanh(v[j])), 1e-15);
  }
}

TEST(EpLstm, NoMemoryMatchesReferenceLstm) {
  const ModelDims d = small_dims();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelParams p = ModelParams::initialized(d, seed);
    p.scale(3.0);
    Rng rng(seed);
    EpLstmState s = EpLstmState::zeros(d.hidden);
    eph::testing::ReferenceLstm ref{std::vector<double>(static_cast<std::size_t>(d.hidden)),
                               std::vector<double>(static_cast<std::size_t>(d.hidden))};
    const Vector m = Vector::Zero(d.hidden);
    for (int t = 0; t < 20; ++t) {
      const Vector x = random_vector(d.input_dim(), rng);
      const CellStep out = eplstm_step(p, x, s, m);
      ref.step(p, std::vector<double>(x.data(), x.data() + x.size()));
      for (int j = 0; j < d.hidden; ++j) {
        EXPECT_LE(std::abs(out.state.h[j] - ref.h[static_cast<std::size_t>(j)]), 1e-12);
        EXPECT_LE(std::abs(out.state.c[j] - ref.c[static_cast<std::size_t>(j)]), 1e-12);
      }
      s = out.state;
    }
  }
}

TEST(EpLstm, GatesStayInRange) {
  const ModelDims d = small_dims();
  ModelParams p = ModelParams::initialized(d, 2);
  p.scale(4.0);
  Rng rng(2);
  EpLstmState s = EpLstmState::zeros(d.hidden);
  for (int t = 0; t < 30; ++t) {
    const CellStep out = eplstm_step(p, random_vector(d.input_dim(), rng), s, random_vector(d.hidden, rng));
    for (const Vector* g : {&out.gates.i, &out.gates.f, &out.gates.o, &out.gates.r}) {
      EXPECT_GT(g->minCoeff(), 0.0);
      EXPECT_LT(g->maxCoeff(), 1.0);
    }
    EXPECT_LT(out.gates.c_tilde.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_LT(out.state.h.cwiseAbs().maxCoeff(), 1.0);
    s = out.state;
  }
}

TEST(EpLstm, FullMaskZeroesState) {
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::initialized(d, 1);
  Rng rng(1);
  const CellMask all = CellMask::all(d.hidden);
  const CellStep out = eplstm_step(p, random_vector(d.input_dim(), rng),
                                   {random_vector(d.hidden, rng), random_vector(d.hidden, rng)},
                                   random_vector(d.hidden, rng), &all);
  EXPECT_TRUE(out.state.c.isZero(0.0));
  EXPECT_TRUE(out.state.h.isZero(0.0));
}

TEST(EpLstm, PartialMaskOnlyTouchesListedUnits) {
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::initialized(d, 1);
  Rng rng(4);
  const Vector x = random_vector(d.input_dim(), rng);
  const EpLstmState s{random_vector(d.hidden, rng, 0.3), random_vector(d.hidden, rng)};
  const Vector m = random_vector(d.hidden, rng);
  const CellMask mask(d.hidden, {1, 4});
  const CellStep free = eplstm_step(p, x, s, m);
  const CellStep masked = eplstm_step(p, x, s, m, &mask);
  for (int j = 0; j < d.hidden; ++j) {
    if (j == 1 || j == 4) {
      EXPECT_EQ(masked.state.c[j], 0.0);
      EXPECT_EQ(masked.state.h[j], 0.0);
    } else {
      EXPECT_EQ(masked.state.c[j], free.state.c[j]);
      EXPECT_EQ(masked.state.h[j], free.state.h[j]);
    }
  }
  const CellMask none(d.hidden, {});
  EXPECT_EQ(eplstm_step(p, x, s, m, &none).state.c, free.state.c);
}

TEST(EpLstm, RejectsNonFiniteAndMismatchedInputs) {
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::zeros(d);
  Vector x = Vector::Zero(d.input_dim());
  x[0] = std::nan("");
  EXPECT_THROW(eplstm_step(p, x, EpLstmState::zeros(d.hidden), Vector::Zero(d.hidden)), ContractViolation);
  EXPECT_THROW(eplstm_step(p, Vector::Zero(3), EpLstmState::zeros(d.hidden), Vector::Zero(d.hidden)),
               ContractViolation);
  Vector m = Vector::Zero(d.hidden);
  m[2] = INFINITY;
  EXPECT_THROW(eplstm_step(p, Vector::Zero(d.input_dim()), EpLstmState::zeros(d.hidden), m), ContractViolation);
}

TEST(CellMask, ValidatesIndices) {
  EXPECT_THROW(CellMask(4, {0, 4}), ContractViolation);
  EXPECT_THROW(CellMask(4, {-1}), ContractViolation);
  EXPECT_THROW(CellMask(4, {1, 1}), ContractViolation);
  const CellMask m(4, {3, 0});
  EXPECT_TRUE(m.dropped(0));
  EXPECT_FALSE(m.dropped(1));
  EXPECT_EQ(CellMask::all(4).zeroed_indices().size(), 4u);
}

TEST(Heads, ZeroWeightsGiveUniformPolicy) {
  const ModelDims d = small_dims();
  const ModelParams p = ModelParams::zeros(d);
  Rng rng(1);
  const PolicyValue pv = policy_value(p, random_vector(d.hidden, rng));
  EXPECT_EQ(pv.value, 0.0);
  const Vector probs = softmax(pv.logits);
  EXPECT_DOUBLE_EQ(probs[0], 0.5);
  EXPECT_DOUBLE_EQ(probs[1], 0.5);
}

TEST(Heads, SoftmaxOfLogThree) {
  Vector logits(2);
  logits << std::log(3.0), 0.0;
  const Vector p = softmax(logits);
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(Heads, SoftmaxNormalizesAndIsStable) {
  Rng rng(8);
  for (int k = 0; k < 100; ++k) {
    const Vector logits = random_vector(2, rng, 50.0);
    EXPECT_NEAR(softmax(logits).sum(), 1.0, 1e-12);
  }
  Vector big(2);
  big << 1000.0, -1000.0;
  EXPECT_TRUE(log_softmax(big).allFinite());
  EXPECT_EQ(softmax(big)[0], 1.0);
}

TEST(ModelParams, ArithmeticHelpers) {
  const ModelDims d = small_dims();
  ModelParams a = ModelParams::initialized(d, 1);
  const ModelParams b = ModelParams::initialized(d, 2);
  const double na = a.squared_norm();
  ModelParams c = a;
  c.scale(2.0);
  EXPECT_NEAR(c.squared_norm(), 4.0 * na, 1e-12);
  c.add_scaled(a, -2.0);
  EXPECT_EQ(c.squared_norm(), 0.0);
  ModelParams e = a;
  e.add_scaled(b, 1.0);
  EXPECT_DOUBLE_EQ(e.policy_w(0, 0), a.policy_w(0, 0) + b.policy_w(0, 0));
  EXPECT_TRUE(a.all_finite());
  a.value_b[0] = std::nan("");
  EXPECT_FALSE(a.all_finite());
}
