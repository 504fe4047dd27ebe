#pragma once

// Sequence encoders: bidirectional LSTM over feature rows, and the
// personality gate that rescales encoded features channel-wise.

#include <string>
#include <vector>

#include "hgfusion/init.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

// One bidirectional LSTM layer. Gate order inside the fused 4H blocks is
// input, forget, cell, output. Output width is 2*hidden (forward state
// concat backward state per timestep).
struct BiLstmLayer {
  int input_dim = 0;
  int hidden = 0;
  Tensor w_fwd, u_fwd, b_fwd;  // [in,4H], [H,4H], [4H]
  Tensor w_bwd, u_bwd, b_bwd;

  BiLstmLayer() = default;

  BiLstmLayer(int input_dim_, int output_dim, Rng& rng) : input_dim(input_dim_) {
    if (output_dim % 2 != 0) {
      throw std::invalid_argument("BiLstmLayer: output dim " + std::to_string(output_dim) +
                                  " must be even (two directions)");
    }
    hidden = output_dim / 2;
    // All recurrent-cell weights share the uniform(-k, k), k = 1/sqrt(H) init;
    // biases start at zero.
    const double kw = 1.0 / std::sqrt(static_cast<double>(hidden));
    const double ku = 1.0 / std::sqrt(static_cast<double>(hidden));
    w_fwd = Tensor::zeros({input_dim, 4 * hidden}, true);
    u_fwd = Tensor::zeros({hidden, 4 * hidden}, true);
    b_fwd = Tensor::zeros({4 * hidden}, true);
    w_bwd = Tensor::zeros({input_dim, 4 * hidden}, true);
    u_bwd = Tensor::zeros({hidden, 4 * hidden}, true);
    b_bwd = Tensor::zeros({4 * hidden}, true);
    fill_uniform(w_fwd, rng, kw);
    fill_uniform(u_fwd, rng, ku);
    fill_uniform(w_bwd, rng, kw);
    fill_uniform(u_bwd, rng, ku);
  }

  // seq: [T, input_dim] -> [T, 2*hidden]. T >= 1 required.
  Tensor encode(Tape& tape, const Tensor& seq) const {
    if (seq.rank() != 2 || seq.shape()[1] != input_dim) {
      throw std::invalid_argument("BiLstmLayer::encode: expected [T," + std::to_string(input_dim) +
                                  "], got " + detail::shape_str(seq.shape()));
    }
    const int t_len = seq.shape()[0];
    std::vector<Tensor> fwd = run_direction(tape, seq, w_fwd, u_fwd, b_fwd, /*reverse=*/false);
    std::vector<Tensor> bwd = run_direction(tape, seq, w_bwd, u_bwd, b_bwd, /*reverse=*/true);
    std::vector<Tensor> rows(t_len);
    for (int t = 0; t < t_len; ++t) rows[t] = tape.concat_cols({fwd[t], bwd[t]});
    return tape.concat_rows(rows);
  }

 private:
  // Returns per-timestep hidden rows [1,H] indexed by original position.
  std::vector<Tensor> run_direction(Tape& tape, const Tensor& seq, const Tensor& w, const Tensor& u,
                                    const Tensor& b, bool reverse) const {
    const int t_len = seq.shape()[0];
    const int h = hidden;
    // One GEMM covers every step's input projection.
    Tensor xw = tape.matmul(seq, w);
    std::vector<Tensor> out(t_len);
    Tensor h_prev = Tensor::zeros({1, h});
    Tensor c_prev = Tensor::zeros({1, h});
    for (int step = 0; step < t_len; ++step) {
      const int t = reverse ? t_len - 1 - step : step;
      Tensor pre = tape.add_rowwise(
          tape.add(tape.slice_rows(xw, t, t + 1), tape.matmul(h_prev, u)), b);
      Tensor gi = tape.sigmoid(tape.slice_cols(pre, 0, h));
      Tensor gf = tape.sigmoid(tape.slice_cols(pre, h, 2 * h));
      Tensor gg = tape.tanh(tape.slice_cols(pre, 2 * h, 3 * h));
      Tensor go = tape.sigmoid(tape.slice_cols(pre, 3 * h, 4 * h));
      Tensor c = tape.add(tape.mul(gf, c_prev), tape.mul(gi, gg));
      Tensor hrow = tape.mul(go, tape.tanh(c));
      out[t] = hrow;
      h_prev = hrow;
      c_prev = c;
    }
    return out;
  }
};

// Stacked Bi-LSTM: first layer maps input_dim -> width, deeper layers
// width -> width.
struct BiLstmStack {
  std::vector<BiLstmLayer> layers;

  BiLstmStack() = default;

  BiLstmStack(int input_dim, int width, int depth, Rng& rng) {
    if (depth < 1) throw std::invalid_argument("BiLstmStack: depth must be >= 1");
    layers.emplace_back(input_dim, width, rng);
    for (int l = 1; l < depth; ++l) layers.emplace_back(width, width, rng);
  }

  Tensor encode(Tape& tape, const Tensor& seq) const {
    Tensor cur = seq;
    for (const BiLstmLayer& l : layers) cur = l.encode(tape, cur);
    return cur;
  }
};

enum class PersonalityPooling { FinalStates, MeanOverTime };

inline PersonalityPooling parse_pooling(const std::string& name) {
  if (name == "final") return PersonalityPooling::FinalStates;
  if (name == "mean") return PersonalityPooling::MeanOverTime;
  throw std::invalid_argument("personality_pooling: unknown mode \"" + name + "\"");
}

// Pools an encoded token sequence [S, 2H] to a single vector [2H].
// FinalStates takes the forward direction's last state concat the backward
// direction's state at t=0 (its last processed step). S=1 collapses both
// choices to the single row.
inline Tensor pool_personality(Tape& tape, const Tensor& encoded, PersonalityPooling mode) {
  if (encoded.rank() != 2 || encoded.shape()[1] % 2 != 0) {
    throw std::invalid_argument("pool_personality: expected [S,2H] input, got " +
                                detail::shape_str(encoded.shape()));
  }
  const int s = encoded.shape()[0];
  const int h = encoded.shape()[1] / 2;
  if (mode == PersonalityPooling::MeanOverTime) return tape.mean_rows(encoded);
  Tensor fwd_last = tape.slice_cols(tape.slice_rows(encoded, s - 1, s), 0, h);
  Tensor bwd_last = tape.slice_cols(tape.slice_rows(encoded, 0, 1), h, 2 * h);
  return tape.reshape(tape.concat_cols({fwd_last, bwd_last}), {2 * h});
}

// Maps the pooled personality vector to per-channel gate weights in (0,1).
struct PersonalityGate {
  int dim = 0;
  Tensor w;  // [d1, d1]
  Tensor b;  // [d1]

  PersonalityGate() = default;

  PersonalityGate(int d1, Rng& rng) : dim(d1) {
    w = Tensor::zeros({d1, d1}, true);
    b = Tensor::zeros({d1}, true);
    fill_uniform(w, rng, uniform_bound(d1));
  }

  // p_tilde: [d1] -> gate weights [d1], each in (0,1).
  Tensor gate_weights(Tape& tape, const Tensor& p_tilde) const {
    if (p_tilde.rank() != 1 || p_tilde.shape()[0] != dim) {
      throw std::invalid_argument("PersonalityGate: expected [" + std::to_string(dim) +
                                  "] vector, got " + detail::shape_str(p_tilde.shape()));
    }
    Tensor row = tape.reshape(p_tilde, {1, dim});
    Tensor z = tape.add_rowwise(tape.matmul(row, w), b);
    return tape.reshape(tape.sigmoid(z), {dim});
  }
};

// Residual gating: out[t,d] = feat[t,d] * (1 + w_gate[d]). With gate weights
// in (0,1) the multiplier lies in (1,2), so no channel shrinks.
inline Tensor apply_gating(Tape& tape, const Tensor& feat, const Tensor& w_gate) {
  if (feat.rank() != 2 || w_gate.rank() != 1 || feat.shape()[1] != w_gate.shape()[0]) {
    throw std::invalid_argument("apply_gating: feature shape " + detail::shape_str(feat.shape()) +
                                " incompatible with gate shape " + detail::shape_str(w_gate.shape()));
  }
  return tape.add(feat, tape.mul_rowwise(feat, w_gate));
}

}  // namespace hgf
