#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hgfusion/encoders.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"
#include "oracles.hpp"

using hgf::BiLstmLayer;
using hgf::PersonalityGate;
using hgf::PersonalityPooling;
using hgf::Rng;
using hgf::Tape;
using hgf::Tensor;

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop single-direction LSTM, the ground truth for encode().
// Weights are row-major [in,4H]/[H,4H]/[4H] with gate order i,f,g,o.
std::vector<std::vector<double>> lstm_ref(const std::vector<std::vector<double>>& xs,
                                          const std::vector<double>& w,
                                          const std::vector<double>& u,
                                          const std::vector<double>& b, int in, int h,
                                          bool reverse) {
  const int t_len = static_cast<int>(xs.size());
  std::vector<std::vector<double>> out(t_len, std::vector<double>(h, 0.0));
  std::vector<double> hp(h, 0.0), cp(h, 0.0);
  for (int step = 0; step < t_len; ++step) {
    const int t = reverse ? t_len - 1 - step : step;
    std::vector<double> z(4 * h, 0.0);
    for (int j = 0; j < 4 * h; ++j) {
      double acc = b[j];
      for (int p = 0; p < in; ++p) acc += xs[t][p] * w[p * 4 * h + j];
      for (int p = 0; p < h; ++p) acc += hp[p] * u[p * 4 * h + j];
      z[j] = acc;
    }
    std::vector<double> hc(h), cc(h);
    for (int j = 0; j < h; ++j) {
      const double gi = sigm(z[j]);
      const double gf = sigm(z[h + j]);
      const double gg = std::tanh(z[2 * h + j]);
      const double go = sigm(z[3 * h + j]);
      cc[j] = gf * cp[j] + gi * gg;
      hc[j] = go * std::tanh(cc[j]);
    }
    out[t] = hc;
    hp = hc;
    cp = cc;
  }
  return out;
}

}  // namespace

TEST_CASE("bilstm encode matches the scalar-loop reference") {
  const int in = 3, h = 2, t_len = 5;
  Rng rng(11);
  BiLstmLayer layer(in, 2 * h, rng);

  Rng drng(12);
  std::vector<std::vector<double>> xs(t_len, std::vector<double>(in));
  std::vector<double> flat;
  for (auto& row : xs)
    for (double& v : row) {
      v = drng.uniform(-1.0, 1.0);
      flat.push_back(v);
    }
  Tensor seq = Tensor::from_data({t_len, in}, flat);

  Tape tape;
  Tensor enc = layer.encode(tape, seq);
  REQUIRE(enc.shape() == hgf::Shape{t_len, 2 * h});

  auto grab = [](const Tensor& t) { return std::vector<double>(t.data(), t.data() + t.size()); };
  auto fwd = lstm_ref(xs, grab(layer.w_fwd), grab(layer.u_fwd), grab(layer.b_fwd), in, h, false);
  auto bwd = lstm_ref(xs, grab(layer.w_bwd), grab(layer.u_bwd), grab(layer.b_bwd), in, h, true);
  for (int t = 0; t < t_len; ++t)
    for (int j = 0; j < h; ++j) {
      CHECK(std::fabs(enc.at(t, j) - fwd[t][j]) <= 1e-12);
      CHECK(std::fabs(enc.at(t, h + j) - bwd[t][j]) <= 1e-12);
    }
}

TEST_CASE("bilstm handles T=1 and validates input") {
  Rng rng(5);
  BiLstmLayer layer(4, 6, rng);
  Tape tape;
  Tensor one = oracle::random_tensor({1, 4}, rng);
  Tensor enc = layer.encode(tape, one);
  CHECK(enc.shape() == hgf::Shape{1, 6});
  CHECK_THROWS_AS(layer.encode(tape, oracle::random_tensor({3, 5}, rng)), std::invalid_argument);
  CHECK_THROWS_AS(BiLstmLayer(4, 5, rng), std::invalid_argument);
}

TEST_CASE("encoding one sample is unaffected by other samples on the tape") {
  Rng rng(21);
  BiLstmLayer layer(3, 4, rng);
  Tensor s1 = oracle::random_tensor({4, 3}, rng);
  Tensor s2 = oracle::random_tensor({6, 3}, rng);

  Tape t_a;
  Tensor a1 = layer.encode(t_a, s1);
  layer.encode(t_a, s2);

  Tape t_b;
  layer.encode(t_b, s2);
  Tensor b1 = layer.encode(t_b, s1);

  REQUIRE(a1.size() == b1.size());
  CHECK(oracle::bytes_equal(a1.data(), b1.data(), a1.size()));
}

TEST_CASE("personality pooling modes") {
  Tape tape;
  // [S=3, 2H=4]; forward half columns 0-1, backward half columns 2-3.
  Tensor enc = Tensor::from_data({3, 4}, {1, 2, 30, 40, 5, 6, 70, 80, 9, 10, 110, 120});
  Tensor fin = hgf::pool_personality(tape, enc, PersonalityPooling::FinalStates);
  REQUIRE(fin.shape() == hgf::Shape{4});
  CHECK(fin.data()[0] == 9.0);
  CHECK(fin.data()[1] == 10.0);
  CHECK(fin.data()[2] == 30.0);
  CHECK(fin.data()[3] == 40.0);

  Tensor mean = hgf::pool_personality(tape, enc, PersonalityPooling::MeanOverTime);
  CHECK(mean.data()[0] == 5.0);
  CHECK(mean.data()[3] == 80.0);

  Tensor single = Tensor::from_data({1, 4}, {1, 2, 3, 4});
  Tensor pooled = hgf::pool_personality(tape, single, PersonalityPooling::FinalStates);
  for (int i = 0; i < 4; ++i) CHECK(pooled.data()[i] == double(i + 1));

  CHECK_THROWS_AS(hgf::pool_personality(tape, Tensor::zeros({2, 3}), PersonalityPooling::FinalStates),
                  std::invalid_argument);
  CHECK_THROWS_AS(hgf::parse_pooling("median"), std::invalid_argument);
}

TEST_CASE("gate weights stay in (0,1) and gating is residual") {
  Rng rng(31);
  const int d = 6;
  PersonalityGate gate(d, rng);
  Tape tape;
  Tensor p = oracle::random_tensor({d}, rng, -3.0, 3.0);
  Tensor wg = gate.gate_weights(tape, p);
  REQUIRE(wg.shape() == hgf::Shape{d});
  for (int i = 0; i < d; ++i) {
    CHECK(wg.data()[i] > 0.0);
    CHECK(wg.data()[i] < 1.0);
  }

  Tensor feat = oracle::random_tensor({5, d}, rng, -2.0, 2.0);
  Tensor gated = hgf::apply_gating(tape, feat, wg);
  REQUIRE(gated.shape() == feat.shape());
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < d; ++i) {
      const double expect = feat.at(t, i) * (1.0 + wg.data()[i]);
      CHECK_THAT(gated.at(t, i), Catch::Matchers::WithinRel(expect, 1e-14));
      // Same-signed residual addition can only grow the magnitude.
      CHECK(std::fabs(gated.at(t, i)) >= std::fabs(feat.at(t, i)));
    }

  SECTION("worked example") {
    Tensor f = Tensor::from_data({1, 2}, {2.0, 4.0});
    Tensor w = Tensor::from_data({2}, {0.5, 0.25});
    Tensor out = hgf::apply_gating(tape, f, w);
    CHECK(out.at(0, 0) == 3.0);
    CHECK(out.at(0, 1) == 5.0);
  }

  CHECK_THROWS_AS(hgf::apply_gating(tape, Tensor::zeros({2, 3}), Tensor::zeros({4})),
                  std::invalid_argument);
  CHECK_THROWS_AS(gate.gate_weights(tape, Tensor::zeros({d + 1})), std::invalid_argument);
}

TEST_CASE("gradients flow through the composed encode-pool-gate path") {
  // Loss: sum of gated features, differentiated w.r.t. the raw input frames.
  Rng rng(41);
  const int in = 3, width = 4, s_tokens = 3;
  BiLstmLayer feat_enc(in, width, rng);
  BiLstmLayer pers_enc(2, width, rng);
  PersonalityGate gate(width, rng);
  Tensor pers = oracle::random_tensor({s_tokens, 2}, rng);

  auto f = [&](Tape& t, const Tensor& x) {
    Tensor enc = feat_enc.encode(t, x);
    Tensor pooled = hgf::pool_personality(t, pers_enc.encode(t, pers),
                                          PersonalityPooling::FinalStates);
    Tensor wg = gate.gate_weights(t, pooled);
    return t.sum_all(hgf::apply_gating(t, enc, wg));
  };
  Tensor x = oracle::random_tensor({4, in}, rng);
  CHECK(hgf::grad_check(f, x, 1e-5) < 1e-4);

  // And w.r.t. the gate parameters themselves.
  Tensor x_fixed = oracle::random_tensor({4, in}, rng);
  auto fw = [&](Tape& t, const Tensor& wparam) {
    PersonalityGate g2 = gate;
    g2.w = wparam;
    Tensor enc = feat_enc.encode(t, x_fixed);
    Tensor pooled = hgf::pool_personality(t, pers_enc.encode(t, pers),
                                          PersonalityPooling::FinalStates);
    return t.sum_all(hgf::apply_gating(t, enc, g2.gate_weights(t, pooled)));
  };
  Tensor wcopy = Tensor::from_data(gate.w.shape(),
                                   std::vector<double>(gate.w.data(), gate.w.data() + gate.w.size()));
  CHECK(hgf::grad_check(fw, wcopy, 1e-5) < 1e-4);
}
