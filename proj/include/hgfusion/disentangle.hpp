#pragma once

// Event-domain disentanglement: shared (public) and per-event (private)
// encoders over fused timestep features, an event discriminator that the
// public branch is trained to fool, and an HSIC penalty that pushes the
// private branches of different events toward statistical independence.

#include <string>
#include <vector>

#include "hgfusion/init.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

// Affine + ReLU stack: first layer d_in -> d_out, deeper layers d_out -> d_out.
struct AffineEncoder {
  std::vector<Tensor> ws;
  std::vector<Tensor> bs;

  AffineEncoder() = default;

  AffineEncoder(int d_in, int d_out, int depth, Rng& rng) {
    if (depth < 1) throw std::invalid_argument("AffineEncoder: depth must be >= 1");
    int cur = d_in;
    for (int l = 0; l < depth; ++l) {
      Tensor w = Tensor::zeros({cur, d_out}, true);
      fill_uniform(w, rng, uniform_bound(cur, /*relu_follows=*/true));
      ws.push_back(w);
      bs.push_back(Tensor::zeros({d_out}, true));
      cur = d_out;
    }
  }

  Tensor forward(Tape& tape, const Tensor& x) const {
    Tensor cur = x;
    for (std::size_t l = 0; l < ws.size(); ++l) {
      cur = tape.relu(tape.add_rowwise(tape.matmul(cur, ws[l]), bs[l]));
    }
    return cur;
  }
};

// Linear map from public features to per-timestep event logits [T, K].
struct EventDiscriminator {
  int events = 0;
  Tensor w;  // [d3, K]
  Tensor b;  // [K]

  EventDiscriminator() = default;

  EventDiscriminator(int d3, int events_, Rng& rng) : events(events_) {
    if (events < 1) throw std::invalid_argument("EventDiscriminator: K must be >= 1");
    w = Tensor::zeros({d3, events}, true);
    fill_uniform(w, rng, uniform_bound(d3));
    b = Tensor::zeros({events}, true);
  }

  Tensor logits(Tape& tape, const Tensor& pub) const {
    if (pub.rank() != 2 || pub.shape()[1] != w.shape()[0]) {
      throw std::invalid_argument("EventDiscriminator: public features " +
                                  detail::shape_str(pub.shape()) + " do not match weight " +
                                  detail::shape_str(w.shape()));
    }
    return tape.add_rowwise(tape.matmul(pub, w), b);
  }
};

// Cross-entropy of every timestep of every event against its event index,
// SUMMED over the K*T timesteps of one sample. logits_per_event[k] holds
// [T_k, K] logits whose true label is k.
inline Tensor discriminator_loss(Tape& tape, const std::vector<Tensor>& logits_per_event) {
  const int k_events = static_cast<int>(logits_per_event.size());
  if (k_events < 1) throw std::invalid_argument("discriminator_loss: no events");
  Tensor total;
  for (int k = 0; k < k_events; ++k) {
    const Tensor& lg = logits_per_event[k];
    if (lg.rank() != 2 || lg.shape()[1] != k_events) {
      throw std::invalid_argument("discriminator_loss: event " + std::to_string(k) +
                                  " logits shaped " + detail::shape_str(lg.shape()) + ", expected [T," +
                                  std::to_string(k_events) + "]");
    }
    Tensor lsm = tape.log_softmax_rows(lg);
    // One-hot column mask picks -log p(event=k) per timestep.
    Tensor mask = Tensor::zeros({lg.shape()[0], k_events});
    for (int t = 0; t < lg.shape()[0]; ++t) mask.at(t, k) = 1.0;
    Tensor part = tape.scale(tape.sum_all(tape.mul(lsm, mask)), -1.0);
    total = k == 0 ? part : tape.add(total, part);
  }
  return total;
}

// The adversarial objective is the exact negation of the discriminator's.
inline Tensor adversarial_loss(Tape& tape, const Tensor& disc_loss) {
  return tape.scale(disc_loss, -1.0);
}

// Fraction of timesteps whose argmax logit names the right event.
// Ties resolve to the lower index, matching argmax conventions elsewhere.
inline double discriminator_accuracy(const std::vector<Tensor>& logits_per_event) {
  long long correct = 0, total = 0;
  for (std::size_t k = 0; k < logits_per_event.size(); ++k) {
    const Tensor& lg = logits_per_event[k];
    const int t_len = lg.shape()[0], classes = lg.shape()[1];
    for (int t = 0; t < t_len; ++t) {
      int best = 0;
      for (int j = 1; j < classes; ++j) {
        if (lg.at(t, j) > lg.at(t, best)) best = j;
      }
      correct += best == static_cast<int>(k) ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("discriminator_accuracy: no timesteps");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Centered RBF-kernel dependence score between two feature matrices with
// matching row counts: trace(L_x C L_y C) / T, where L are RBF Gram
// matrices (sigma defaults to 1) and C = I - (1/T) 11^T. Zero for T < 2
// (centering annihilates everything).
inline Tensor hsic(Tape& tape, const Tensor& x, const Tensor& y, double sigma = 1.0) {
  if (x.rank() != 2 || y.rank() != 2 || x.shape()[0] != y.shape()[0]) {
    throw std::invalid_argument("hsic: row counts must match, got " + detail::shape_str(x.shape()) +
                                " vs " + detail::shape_str(y.shape()));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("hsic: sigma must be positive");
  const int t_rows = x.shape()[0];
  if (t_rows < 2) return Tensor::scalar(0.0);

  auto rbf_gram = [&](const Tensor& m) {
    // Squared distances via the Gram identity; diagonal lands exactly on 0
    // because d2[i,i] = s_ii - 2 s_ii + s_ii.
    Tensor s = tape.matmul(m, tape.transpose(m));
    Tensor d = tape.diag(s);
    Tensor half = tape.add_rowwise(tape.scale(s, -2.0), d);
    Tensor d2 = tape.add_rowwise(tape.transpose(half), d);
    return tape.exp(tape.scale(d2, -1.0 / (2.0 * sigma * sigma)));
  };

  Tensor lx = rbf_gram(x);
  Tensor ly = rbf_gram(y);
  Tensor centering = Tensor::zeros({t_rows, t_rows});
  for (int i = 0; i < t_rows; ++i)
    for (int j = 0; j < t_rows; ++j) centering.at(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / t_rows;
  Tensor chain = tape.matmul(tape.matmul(lx, centering), tape.matmul(ly, centering));
  return tape.scale(tape.trace(chain), 1.0 / t_rows);
}

// Sum of pairwise scores over ordered pairs i != j; symmetry makes this
// twice the unordered-pair sum. Zero when fewer than two branches exist.
inline Tensor hsic_total(Tape& tape, const std::vector<Tensor>& privates, double sigma = 1.0) {
  const int k_events = static_cast<int>(privates.size());
  if (k_events < 2) return Tensor::scalar(0.0);
  Tensor total;
  bool first = true;
  for (int i = 0; i < k_events; ++i) {
    for (int j = i + 1; j < k_events; ++j) {
      Tensor pair = tape.scale(hsic(tape, privates[i], privates[j], sigma), 2.0);
      total = first ? pair : tape.add(total, pair);
      first = false;
    }
  }
  return total;
}

// Subject representation: time-mean of each branch, public averaged across
// events, privates kept separate; layout [mean_pub, pri_1 .. pri_K].
// Per-timestep event aggregation: columns [0, D3) hold the elementwise mean
// of the public representations over events; the K private blocks follow
// unchanged, so slicing the output recovers each private input exactly.
inline Tensor aggregate_events(Tape& tape, const std::vector<Tensor>& pubs,
                               const std::vector<Tensor>& pris) {
  if (pubs.empty() || pubs.size() != pris.size()) {
    throw std::invalid_argument("aggregate_events: need matching non-empty pub/pri lists");
  }
  const int k_events = static_cast<int>(pubs.size());
  const int t_len = pubs[0].shape()[0];
  for (const Tensor& p : pubs) {
    if (p.shape()[0] != t_len) {
      throw std::invalid_argument("aggregate_events: public row counts disagree");
    }
  }
  for (const Tensor& p : pris) {
    if (p.shape()[0] != t_len) {
      throw std::invalid_argument("aggregate_events: private row counts disagree");
    }
  }
  Tensor pub_sum = pubs[0];
  for (int k = 1; k < k_events; ++k) pub_sum = tape.add(pub_sum, pubs[k]);
  std::vector<Tensor> parts;
  parts.push_back(k_events == 1 ? pub_sum : tape.scale(pub_sum, 1.0 / k_events));
  for (const Tensor& p : pris) parts.push_back(p);
  return tape.concat_cols(parts);  // [T, (1+K)*d3]
}

}  // namespace hgf
