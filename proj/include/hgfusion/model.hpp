#pragma once

// The full network: personality-gated Bi-LSTM modality encoders, windowed
// hypergraph fusion with per-modality self-attention, public/private event
// disentanglement with an adversarial event discriminator, and a
// per-timestep classifier head producing log-probabilities.
//
// Parameters live in a named registry (construction order, stable across
// runs) split into the "main" group and the discriminator group; the two
// are disjoint by construction and the trainer verifies it.

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hgfusion/attention.hpp"
#include "hgfusion/config.hpp"
#include "hgfusion/data.hpp"
#include "hgfusion/disentangle.hpp"
#include "hgfusion/encoders.hpp"
#include "hgfusion/hypergraph.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Mean over timesteps of the negative log-probability of the true class.
inline Tensor depression_loss(Tape& tape, const Tensor& log_probs, int label) {
  if (log_probs.rank() != 2) {
    throw std::invalid_argument("depression_loss: expected [T, C] log-probabilities");
  }
  const int t_len = log_probs.shape()[0];
  const int classes = log_probs.shape()[1];
  if (label < 0 || label >= classes) {
    throw std::invalid_argument("depression_loss: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(classes) + ")");
  }
  Tensor mask = Tensor::zeros({t_len, classes});
  for (int t = 0; t < t_len; ++t) mask.data()[t * classes + label] = 1.0;
  return tape.scale(tape.sum_all(tape.mul(log_probs, mask)), -1.0 / t_len);
}

struct ForwardResult {
  Tensor log_probs;                 // [T, num_classes]
  std::vector<Tensor> pubs;         // K x [T, d3]
  std::vector<Tensor> pris;         // K x [T, d3]
  std::vector<Tensor> disc_logits;  // K x [T, K]
};

// Per-sample loss terms. disc is the summed (K*T-term) cross-entropy; dep is
// the time-mean classification loss; adv == -disc exactly.
struct SampleTerms {
  Tensor log_probs;
  Tensor dep, disc, adv, hsic;
  long long disc_correct = 0;
  long long disc_count = 0;
  std::vector<Tensor> pubs, pris;
};

class Network {
 public:
  Network(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    pooling_ = parse_pooling(cfg_.personality_pooling);
    const ConvActivation act = parse_conv_activation(cfg_.conv_activation);

    personality_lstm_ = BiLstmStack(cfg_.personality_dim, cfg_.d1, cfg_.lstm_layers, rng);
    visual_lstm_ = BiLstmStack(cfg_.visual_dim, cfg_.d1, cfg_.lstm_layers, rng);
    audio_lstm_ = BiLstmStack(cfg_.audio_dim, cfg_.d1, cfg_.lstm_layers, rng);
    gate_ = PersonalityGate(cfg_.d1, rng);
    conv_ = HypergraphConv(cfg_.d1, cfg_.d2, cfg_.conv_layers, act, rng);
    attn_audio_ = MultiHeadSelfAttention(cfg_.d2, cfg_.heads, cfg_.attention_per_head_scale, rng);
    attn_visual_ = MultiHeadSelfAttention(cfg_.d2, cfg_.heads, cfg_.attention_per_head_scale, rng);
    pub_enc_ = AffineEncoder(2 * cfg_.d2, cfg_.d3, cfg_.encoder_depth, rng);
    for (int k = 0; k < cfg_.events; ++k) {
      pri_encs_.emplace_back(2 * cfg_.d2, cfg_.d3, cfg_.encoder_depth, rng);
    }
    disc_ = EventDiscriminator(cfg_.d3, cfg_.events, rng);
    cls_hidden_ = AffineEncoder((1 + cfg_.events) * cfg_.d3, cfg_.d3, 1, rng);
    cls_out_w_ = Tensor::zeros({cfg_.d3, cfg_.num_classes}, true);
    fill_uniform(cls_out_w_, rng, uniform_bound(cfg_.d3));
    cls_out_b_ = Tensor::zeros({cfg_.num_classes}, true);

    register_lstm("personality_lstm", personality_lstm_);
    register_lstm("visual_lstm", visual_lstm_);
    register_lstm("audio_lstm", audio_lstm_);
    add_param("gate.w", gate_.w);
    add_param("gate.b", gate_.b);
    for (std::size_t l = 0; l < conv_.thetas.size(); ++l) {
      add_param("conv.theta" + std::to_string(l), conv_.thetas[l]);
    }
    register_attention("attn_audio", attn_audio_);
    register_attention("attn_visual", attn_visual_);
    register_affine("pub_enc", pub_enc_);
    for (int k = 0; k < cfg_.events; ++k) {
      register_affine("pri_enc" + std::to_string(k), pri_encs_[k]);
    }
    add_param("disc.w", disc_.w);
    add_param("disc.b", disc_.b);
    register_affine("cls.hidden", cls_hidden_);
    add_param("cls.out.w", cls_out_w_);
    add_param("cls.out.b", cls_out_b_);
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<NamedParam>& named_parameters() const { return params_; }

  Tensor parameter(const std::string& name) const {
    for (const NamedParam& p : params_) {
      if (p.name == name) return p.tensor;
    }
    throw std::invalid_argument("Network: no parameter named \"" + name + "\"");
  }

  std::vector<Tensor> discriminator_parameters() const {
    std::vector<Tensor> out;
    for (const NamedParam& p : params_) {
      if (p.name.rfind("disc.", 0) == 0) out.push_back(p.tensor);
    }
    return out;
  }

  std::vector<Tensor> main_parameters() const {
    std::vector<Tensor> out;
    for (const NamedParam& p : params_) {
      if (p.name.rfind("disc.", 0) != 0) out.push_back(p.tensor);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const NamedParam& p : params_) n += p.tensor.size();
    return n;
  }

  // Forward pass over one sample whose events all share the same length.
  ForwardResult forward(Tape& tape, const Sample& sample) const {
    const int t_len = validate_sample(sample, /*require_common_t=*/true);
    const IncidenceStructure& inc = incidence_for(t_len);

    // Personality pathway: encode tokens, pool, derive gate weights.
    Tensor p_enc = personality_lstm_.encode(tape, sample.personality);
    Tensor pooled = pool_personality(tape, p_enc, pooling_);
    Tensor w_gate = gate_.gate_weights(tape, pooled);

    ForwardResult out;
    for (int k = 0; k < cfg_.events; ++k) {
      const EventFeatures& ev = sample.events[k];
      Tensor aud = apply_gating(tape, audio_lstm_.encode(tape, ev.audio), w_gate);
      Tensor vis = apply_gating(tape, visual_lstm_.encode(tape, ev.visual), w_gate);
      aud = positional_encode(tape, aud);
      vis = positional_encode(tape, vis);

      // Audio rows occupy 0..T-1, visual rows T..2T-1.
      Tensor nodes = tape.concat_rows({aud, vis});
      Tensor mixed = conv_.forward(tape, nodes, inc);
      Tensor aud_blk = tape.slice_rows(mixed, 0, t_len);
      Tensor vis_blk = tape.slice_rows(mixed, t_len, 2 * t_len);
      Tensor fused = tape.concat_cols(
          {attn_audio_.forward(tape, aud_blk), attn_visual_.forward(tape, vis_blk)});

      out.pubs.push_back(pub_enc_.forward(tape, fused));
      out.pris.push_back(pri_encs_[k].forward(tape, fused));
      out.disc_logits.push_back(disc_.logits(tape, out.pubs.back()));
    }

    Tensor agg = aggregate_events(tape, out.pubs, out.pris);
    Tensor hidden = cls_hidden_.forward(tape, agg);
    Tensor logits = tape.add_rowwise(tape.matmul(hidden, cls_out_w_), cls_out_b_);
    out.log_probs = tape.log_softmax_rows(logits);
    return out;
  }

  // Pads the sample's events to a shared length and evaluates every loss
  // term. The sample's own longest event sets the padded length.
  SampleTerms sample_terms(Tape& tape, const Sample& sample, PaddingMode mode) const {
    validate_sample(sample, /*require_common_t=*/false);
    const Sample padded = pad_events(sample, sample.max_frames(), mode);
    ForwardResult fwd = forward(tape, padded);

    SampleTerms terms;
    terms.log_probs = fwd.log_probs;
    terms.pubs = fwd.pubs;
    terms.pris = fwd.pris;
    terms.dep = depression_loss(tape, fwd.log_probs, sample.label);
    terms.disc = discriminator_loss(tape, fwd.disc_logits);
    terms.adv = adversarial_loss(tape, terms.disc);
    terms.hsic = hsic_total(tape, fwd.pris);
    long long total = 0;
    for (const Tensor& lg : fwd.disc_logits) total += lg.shape()[0];
    terms.disc_count = total;
    terms.disc_correct =
        std::llround(discriminator_accuracy(fwd.disc_logits) * static_cast<double>(total));
    return terms;
  }

  // Effective window: never wider than the padded sequence itself.
  int effective_window(int t_len) const { return std::min(cfg_.window, t_len); }

  const IncidenceStructure& incidence_for(int t_len) const {
    auto it = inc_cache_.find(t_len);
    if (it == inc_cache_.end()) {
      it = inc_cache_.emplace(t_len, build_incidence(t_len, effective_window(t_len))).first;
    }
    return it->second;
  }

 private:
  void add_param(const std::string& name, const Tensor& t) {
    params_.push_back({name, t});
  }

  void register_lstm(const std::string& prefix, const BiLstmStack& stack) {
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      const BiLstmLayer& layer = stack.layers[l];
      const std::string base = prefix + ".l" + std::to_string(l) + ".";
      add_param(base + "w_fwd", layer.w_fwd);
      add_param(base + "u_fwd", layer.u_fwd);
      add_param(base + "b_fwd", layer.b_fwd);
      add_param(base + "w_bwd", layer.w_bwd);
      add_param(base + "u_bwd", layer.u_bwd);
      add_param(base + "b_bwd", layer.b_bwd);
    }
  }

  void register_attention(const std::string& prefix, const MultiHeadSelfAttention& attn) {
    for (int h = 0; h < attn.heads; ++h) {
      const std::string base = prefix + ".h" + std::to_string(h) + ".";
      add_param(base + "wq", attn.wq[h]);
      add_param(base + "wk", attn.wk[h]);
      add_param(base + "wv", attn.wv[h]);
    }
    add_param(prefix + ".wo", attn.wo);
  }

  void register_affine(const std::string& prefix, const AffineEncoder& enc) {
    for (std::size_t l = 0; l < enc.ws.size(); ++l) {
      add_param(prefix + ".w" + std::to_string(l), enc.ws[l]);
      add_param(prefix + ".b" + std::to_string(l), enc.bs[l]);
    }
  }

  int validate_sample(const Sample& sample, bool require_common_t) const {
    if (static_cast<int>(sample.events.size()) != cfg_.events) {
      throw std::invalid_argument("forward: sample " + sample.id + " has " +
                                  std::to_string(sample.events.size()) + " events, config says " +
                                  std::to_string(cfg_.events));
    }
    if (sample.label < 0 || sample.label >= cfg_.num_classes) {
      throw std::invalid_argument("forward: sample " + sample.id + " label " +
                                  std::to_string(sample.label) + " outside [0, " +
                                  std::to_string(cfg_.num_classes) + ")");
    }
    int t_len = 0;
    for (std::size_t k = 0; k < sample.events.size(); ++k) {
      const EventFeatures& e = sample.events[k];
      if (e.visual.rank() != 2 || e.audio.rank() != 2 || e.visual.shape()[1] != cfg_.visual_dim ||
          e.audio.shape()[1] != cfg_.audio_dim) {
        throw std::invalid_argument("forward: sample " + sample.id + " event " +
                                    std::to_string(k) + " feature widths do not match config");
      }
      if (e.visual.shape()[0] != e.audio.shape()[0] || e.frames() < 1) {
        throw std::invalid_argument("forward: sample " + sample.id + " event " +
                                    std::to_string(k) + " has inconsistent or empty frames");
      }
      if (k == 0) {
        t_len = e.frames();
      } else if (require_common_t && e.frames() != t_len) {
        throw std::invalid_argument("forward: sample " + sample.id +
                                    " events have unequal lengths; pad first");
      }
      t_len = std::max(t_len, e.frames());
    }
    if (sample.personality.rank() != 2 || sample.personality.shape()[1] != cfg_.personality_dim ||
        sample.personality.shape()[0] < 1) {
      throw std::invalid_argument("forward: sample " + sample.id +
                                  " personality tokens do not match config");
    }
    return t_len;
  }

  ModelConfig cfg_;
  PersonalityPooling pooling_ = PersonalityPooling::FinalStates;
  BiLstmStack personality_lstm_, visual_lstm_, audio_lstm_;
  PersonalityGate gate_;
  HypergraphConv conv_;
  MultiHeadSelfAttention attn_audio_, attn_visual_;
  AffineEncoder pub_enc_;
  std::vector<AffineEncoder> pri_encs_;
  EventDiscriminator disc_;
  AffineEncoder cls_hidden_;
  Tensor cls_out_w_, cls_out_b_;
  std::vector<NamedParam> params_;
  mutable std::map<int, IncidenceStructure> inc_cache_;
};

}  // namespace hgf
