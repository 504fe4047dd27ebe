#pragma once

// Alternating adversarial training loop. Each batch runs one forward pass
// per sample, then two scoped backward passes over the same tape: the
// discriminator objective only reaches discriminator parameters, the
// combined main objective only reaches everything else. The discriminator
// updates first, then the main group; both from gradients taken at the
// pre-step parameter state.
//
// Checkpoint container: versioned binary, named little-endian float64 blobs,
// embedded canonical config JSON + hash, optimizer moments, no timestamps.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hgfusion/config.hpp"
#include "hgfusion/data.hpp"
#include "hgfusion/metrics.hpp"
#include "hgfusion/model.hpp"
#include "hgfusion/optimizer.hpp"
#include "hgfusion/report.hpp"

namespace hgf {

struct LossBundle {
  double dep = 0.0;
  double disc = 0.0;
  double adv = 0.0;
  double hsic = 0.0;
  double main = 0.0;
  double disc_accuracy = 0.0;
};

// ---------------------------------------------------------------------------
// Checkpoint container.

struct Checkpoint {
  static constexpr char magic[9] = "HGFCHKP1";

  std::string config_json;  // canonical (sorted-key) dump
  std::string config_hash;  // 16 hex chars
  long long epoch = -1;     // epoch the snapshot was taken at
  double best_val_weighted_f1 = 0.0;
  std::vector<std::pair<std::string, std::vector<double>>> params;

  struct OptState {
    long long steps = 0;
    std::vector<std::vector<double>> m, v;
  };
  bool has_optimizer = false;
  OptState main_opt, disc_opt;
};

namespace detail {

template <typename T>
void put_pod(std::string& out, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string origin)
      : buf_(buf), origin_(std::move(origin)) {}

  template <typename T>
  T get_pod() {
    if (pos_ + sizeof(T) > buf_.size()) {
      throw std::runtime_error("checkpoint: " + origin_ + " truncated at byte " +
                               std::to_string(pos_));
    }
    T value;
    std::memcpy(&value, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw std::runtime_error("checkpoint: " + origin_ + " truncated at byte " +
                               std::to_string(pos_));
    }
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<double> get_doubles(std::size_t n) {
    if (pos_ + n * sizeof(double) > buf_.size()) {
      throw std::runtime_error("checkpoint: " + origin_ + " truncated at byte " +
                               std::to_string(pos_));
    }
    std::vector<double> v(n);
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }

  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

inline void put_doubles(std::string& out, const std::vector<double>& v) {
  put_pod<std::uint64_t>(out, v.size());
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

inline void put_opt_state(std::string& out, const Checkpoint::OptState& s) {
  put_pod<std::int64_t>(out, s.steps);
  put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.m.size()));
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    put_doubles(out, s.m[i]);
    put_doubles(out, s.v[i]);
  }
}

inline Checkpoint::OptState get_opt_state(ByteReader& r) {
  Checkpoint::OptState s;
  s.steps = r.get_pod<std::int64_t>();
  const std::uint32_t groups = r.get_pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < groups; ++i) {
    s.m.push_back(r.get_doubles(r.get_pod<std::uint64_t>()));
    s.v.push_back(r.get_doubles(r.get_pod<std::uint64_t>()));
  }
  return s;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out;
  out.append(Checkpoint::magic, 8);
  detail::put_pod<std::uint64_t>(out, c.config_json.size());
  out.append(c.config_json);
  detail::put_pod<std::uint64_t>(out, c.config_hash.size());
  out.append(c.config_hash);
  detail::put_pod<std::int64_t>(out, c.epoch);
  detail::put_pod<double>(out, c.best_val_weighted_f1);
  detail::put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.size()));
  for (const auto& [name, data] : c.params) {
    detail::put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    detail::put_doubles(out, data);
  }
  detail::put_pod<std::uint8_t>(out, c.has_optimizer ? 1 : 0);
  if (c.has_optimizer) {
    detail::put_opt_state(out, c.main_opt);
    detail::put_opt_state(out, c.disc_opt);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& buf, const std::string& origin) {
  detail::ByteReader r(buf, origin);
  if (r.get_bytes(8) != std::string(Checkpoint::magic, 8)) {
    throw std::runtime_error("checkpoint: " + origin + " has the wrong magic header");
  }
  Checkpoint c;
  c.config_json = r.get_bytes(r.get_pod<std::uint64_t>());
  c.config_hash = r.get_bytes(r.get_pod<std::uint64_t>());
  c.epoch = r.get_pod<std::int64_t>();
  c.best_val_weighted_f1 = r.get_pod<double>();
  const std::uint32_t n_params = r.get_pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.get_bytes(r.get_pod<std::uint32_t>());
    c.params.emplace_back(std::move(name), r.get_doubles(r.get_pod<std::uint64_t>()));
  }
  c.has_optimizer = r.get_pod<std::uint8_t>() != 0;
  if (c.has_optimizer) {
    c.main_opt = detail::get_opt_state(r);
    c.disc_opt = detail::get_opt_state(r);
  }
  if (!r.exhausted()) {
    throw std::runtime_error("checkpoint: " + origin + " has trailing bytes");
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(buf, path);
}

// Copies checkpointed parameter values into an already-constructed network.
// The stored config hash must match the network's.
inline void apply_checkpoint(Network& net, const Checkpoint& c) {
  if (c.config_hash != net.config().hash_hex()) {
    throw std::runtime_error("checkpoint: config hash " + c.config_hash +
                             " does not match the network's " + net.config().hash_hex());
  }
  const auto& named = net.named_parameters();
  if (c.params.size() != named.size()) {
    throw std::runtime_error("checkpoint: holds " + std::to_string(c.params.size()) +
                             " parameters, network has " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, data] = c.params[i];
    if (name != named[i].name) {
      throw std::runtime_error("checkpoint: parameter " + std::to_string(i) + " is \"" + name +
                               "\", expected \"" + named[i].name + "\"");
    }
    Tensor t = named[i].tensor;
    if (data.size() != t.size()) {
      throw std::runtime_error("checkpoint: parameter \"" + name + "\" holds " +
                               std::to_string(data.size()) + " values, expected " +
                               std::to_string(t.size()));
    }
    std::memcpy(t.data(), data.data(), data.size() * sizeof(double));
  }
}

// ---------------------------------------------------------------------------
// Training.

struct EvalResult {
  ConfusionMatrix confusion{2};
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<int> predictions;          // aligned with the dataset's samples
  SeparationStats separation;            // zeros when fewer than 2 events
  bool has_separation = false;
};

struct FitResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  int stopped_epoch = -1;
  double best_val_accuracy = 0.0;
  double best_val_weighted_f1 = 0.0;
  Checkpoint best_checkpoint;
};

class Trainer {
 public:
  Trainer(Network& net, const ModelConfig& cfg)
      : net_(net),
        cfg_(cfg),
        padding_(parse_padding(cfg.padding)),
        main_params_(net.main_parameters()),
        disc_params_(net.discriminator_parameters()),
        main_opt_(parse_optimizer(cfg.optimizer), main_params_, cfg.weight_decay,
                  cfg.grad_clip_norm),
        disc_opt_(parse_optimizer(cfg.optimizer), disc_params_, cfg.weight_decay,
                  cfg.grad_clip_norm) {
    cfg_.validate();
    std::set<const void*> main_ids;
    for (const Tensor& t : main_params_) main_ids.insert(t.id());
    for (const Tensor& t : disc_params_) {
      if (main_ids.count(t.id())) {
        throw std::invalid_argument("Trainer: parameter groups overlap");
      }
    }
    if (main_params_.size() + disc_params_.size() != net.named_parameters().size()) {
      throw std::invalid_argument("Trainer: parameter groups do not cover the network");
    }
  }

  Optimizer& main_optimizer() { return main_opt_; }
  Optimizer& discriminator_optimizer() { return disc_opt_; }

  void set_epoch_learning_rates(int epoch) {
    main_opt_.set_lr(cosine_lr(epoch, cfg_.max_epochs, cfg_.lr_main_hi, cfg_.lr_main_lo));
    disc_opt_.set_lr(cosine_lr(epoch, cfg_.max_epochs, cfg_.lr_disc_hi_eff(),
                               cfg_.lr_disc_lo_eff()));
  }

  // Batch losses from one forward pass per sample; every term is the mean
  // over the batch's samples. The returned tensors stay attached to `tape`.
  struct BatchTerms {
    Tensor dep, disc, adv, hsic, main;
    long long disc_correct = 0;
    long long disc_count = 0;
    LossBundle bundle() const {
      LossBundle b;
      b.dep = dep.value();
      b.disc = disc.value();
      b.adv = adv.value();
      b.hsic = hsic.value();
      b.main = main.value();
      b.disc_accuracy = disc_count == 0 ? 0.0
                                        : static_cast<double>(disc_correct) /
                                              static_cast<double>(disc_count);
      return b;
    }
  };

  BatchTerms compute_batch_terms(Tape& tape, const std::vector<const Sample*>& batch) const {
    if (batch.empty()) throw std::invalid_argument("train: empty batch");
    BatchTerms bt;
    Tensor dep_sum, disc_sum, hsic_sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      SampleTerms t = net_.sample_terms(tape, *batch[i], padding_);
      dep_sum = i == 0 ? t.dep : tape.add(dep_sum, t.dep);
      disc_sum = i == 0 ? t.disc : tape.add(disc_sum, t.disc);
      hsic_sum = i == 0 ? t.hsic : tape.add(hsic_sum, t.hsic);
      bt.disc_correct += t.disc_correct;
      bt.disc_count += t.disc_count;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    bt.dep = batch.size() == 1 ? dep_sum : tape.scale(dep_sum, inv);
    bt.disc = batch.size() == 1 ? disc_sum : tape.scale(disc_sum, inv);
    bt.hsic = batch.size() == 1 ? hsic_sum : tape.scale(hsic_sum, inv);
    bt.adv = tape.scale(bt.disc, -1.0);
    bt.main = tape.add(tape.add(tape.scale(bt.dep, cfg_.alpha), tape.scale(bt.adv, cfg_.beta)),
                       tape.scale(bt.hsic, cfg_.gamma));
    return bt;
  }

  // One alternating step: gradients for both objectives come from the same
  // forward state; the discriminator group updates first.
  LossBundle train_step(const std::vector<const Sample*>& batch) {
    Tape tape;
    BatchTerms bt = compute_batch_terms(tape, batch);
    tape.backward(bt.disc, disc_params_);
    tape.backward(bt.main, main_params_);
    disc_opt_.step();
    main_opt_.step();
    disc_opt_.zero_grad();
    main_opt_.zero_grad();
    last_disc_correct_ = bt.disc_correct;
    last_disc_count_ = bt.disc_count;
    return bt.bundle();
  }

  long long last_disc_correct() const { return last_disc_correct_; }
  long long last_disc_count() const { return last_disc_count_; }

  // Inference over a dataset: per-subject predictions from time-averaged
  // log-probabilities, plus event-separation statistics of the mean public
  // and private representations.
  EvalResult evaluate(const Dataset& ds) const {
    if (ds.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalResult r;
    r.confusion = ConfusionMatrix(cfg_.num_classes);
    std::vector<std::vector<std::vector<double>>> pub_rows(cfg_.events), pri_rows(cfg_.events);
    for (const Sample& s : ds.samples) {
      Tape tape;
      NoGradGuard guard(tape);
      const Sample padded = pad_events(s, s.max_frames(), padding_);
      ForwardResult fwd = net_.forward(tape, padded);
      const int pred = subject_prediction(fwd.log_probs);
      r.predictions.push_back(pred);
      r.confusion.add(s.label, pred);
      for (int k = 0; k < cfg_.events; ++k) {
        pub_rows[k].push_back(mean_row(fwd.pubs[k]));
        pri_rows[k].push_back(mean_row(fwd.pris[k]));
      }
    }
    r.accuracy = accuracy(r.confusion);
    r.weighted_f1 = weighted_f1(r.confusion);
    if (cfg_.events >= 2) {
      r.separation = separation_stats(pub_rows, pri_rows);
      r.has_separation = true;
    }
    return r;
  }

  Checkpoint snapshot(long long epoch, double best_wf1) const {
    Checkpoint c;
    c.config_json = cfg_.to_json().dump();
    c.config_hash = cfg_.hash_hex();
    c.epoch = epoch;
    c.best_val_weighted_f1 = best_wf1;
    for (const NamedParam& p : net_.named_parameters()) {
      c.params.emplace_back(p.name,
                            std::vector<double>(p.tensor.data(), p.tensor.data() + p.tensor.size()));
    }
    c.has_optimizer = true;
    c.main_opt = {main_opt_.step_count(), main_opt_.moments_m(), main_opt_.moments_v()};
    c.disc_opt = {disc_opt_.step_count(), disc_opt_.moments_m(), disc_opt_.moments_v()};
    return c;
  }

  void restore(const Checkpoint& c) {
    apply_checkpoint(net_, c);
    if (c.has_optimizer) {
      main_opt_.restore_state(c.main_opt.m, c.main_opt.v, c.main_opt.steps);
      disc_opt_.restore_state(c.disc_opt.m, c.disc_opt.v, c.disc_opt.steps);
    }
  }

  // Full loop: per-epoch seeded shuffle, size-`batch_size` chunks, cosine
  // learning rates, early stopping on validation weighted F1 (strict
  // improvement, `patience` non-improving epochs tolerated), best-epoch
  // parameters restored before returning.
  FitResult fit(const Dataset& train, const Dataset& val) {
    if (train.samples.empty() || val.samples.empty()) {
      throw std::invalid_argument("fit: empty train or validation split");
    }
    FitResult res;
    int stale = 0;
    std::vector<std::size_t> order(train.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
      set_epoch_learning_rates(epoch);
      Rng shuffle_rng = Rng::stream(cfg_.seed, 0xE70C0000ULL + static_cast<std::uint64_t>(epoch));
      shuffle_rng.shuffle(order);

      LossBundle sums;
      long long disc_correct = 0, disc_count = 0, seen = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(cfg_.batch_size)) {
        std::vector<const Sample*> batch;
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
        for (std::size_t i = start; i < stop; ++i) batch.push_back(&train.samples[order[i]]);
        LossBundle b = train_step(batch);
        const double w = static_cast<double>(batch.size());
        sums.dep += b.dep * w;
        sums.disc += b.disc * w;
        sums.adv += b.adv * w;
        sums.hsic += b.hsic * w;
        sums.main += b.main * w;
        disc_correct += last_disc_correct_;
        disc_count += last_disc_count_;
        seen += static_cast<long long>(batch.size());
      }

      EvalResult ev = evaluate(val);

      EpochRecord rec;
      rec.epoch = epoch;
      rec.lr_main = main_opt_.lr();
      rec.lr_disc = disc_opt_.lr();
      rec.loss_dep = sums.dep / static_cast<double>(seen);
      rec.loss_disc = sums.disc / static_cast<double>(seen);
      rec.loss_adv = sums.adv / static_cast<double>(seen);
      rec.loss_hsic = sums.hsic / static_cast<double>(seen);
      rec.loss_main = sums.main / static_cast<double>(seen);
      rec.disc_accuracy =
          disc_count == 0 ? 0.0 : static_cast<double>(disc_correct) / static_cast<double>(disc_count);
      rec.val_accuracy = ev.accuracy;
      rec.val_weighted_f1 = ev.weighted_f1;
      res.history.push_back(rec);
      res.stopped_epoch = epoch;

      if (ev.weighted_f1 > res.best_val_weighted_f1 || res.best_epoch < 0) {
        res.best_val_weighted_f1 = ev.weighted_f1;
        res.best_val_accuracy = ev.accuracy;
        res.best_epoch = epoch;
        res.best_checkpoint = snapshot(epoch, ev.weighted_f1);
        stale = 0;
      } else {
        ++stale;
        if (stale > cfg_.patience) break;
      }
    }
    restore(res.best_checkpoint);
    return res;
  }

 private:
  static std::vector<double> mean_row(const Tensor& t) {
    const int rows = t.shape()[0], cols = t.shape()[1];
    std::vector<double> out(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) out[c] += t.at(r, c);
    }
    for (double& x : out) x /= rows;
    return out;
  }

  Network& net_;
  ModelConfig cfg_;
  PaddingMode padding_;
  std::vector<Tensor> main_params_, disc_params_;
  Optimizer main_opt_, disc_opt_;
  long long last_disc_correct_ = 0;
  long long last_disc_count_ = 0;
};

}  // namespace hgf
