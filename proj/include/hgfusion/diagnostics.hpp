#pragma once

// Finite-difference validation of the assembled network. One unscoped
// backward pass of the combined objective is compared against central
// differences over every parameter coordinate of every module, so a single
// run certifies the whole chain end to end.

#include <string>
#include <vector>

#include "hgfusion/model.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/trainer.hpp"

namespace hgf {

struct GradCheckEntry {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  double eps = 0.0;
  double worst = 0.0;
  std::size_t total_coordinates = 0;
  std::vector<GradCheckEntry> entries;
  bool passed(double tol) const { return worst < tol; }
};

// A deterministic bundle of tiny random samples matching the config's dims.
// Labels cycle through the classes; event lengths alternate around t_len to
// exercise the padding path.
inline std::vector<Sample> gradcheck_samples(const ModelConfig& cfg, std::uint64_t seed, int count,
                                             int t_len) {
  if (count < 1 || t_len < 1) {
    throw std::invalid_argument("gradcheck_samples: count and t_len must be positive");
  }
  Rng rng = Rng::stream(seed, 0x6ADCFEED);
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    Sample s;
    s.id = "gc" + std::to_string(i);
    s.label = i % cfg.num_classes;
    for (int k = 0; k < cfg.events; ++k) {
      const int t = std::max(1, t_len - (i + k) % 2);
      auto fill = [&](int rows, int colsd) {
        std::vector<double> d(static_cast<std::size_t>(rows) * colsd);
        for (double& x : d) x = rng.normal();
        return Tensor::from_data({rows, colsd}, std::move(d));
      };
      EventFeatures e;
      e.visual = fill(t, cfg.visual_dim);
      e.audio = fill(t, cfg.audio_dim);
      s.events.push_back(std::move(e));
    }
    std::vector<double> p(2 * static_cast<std::size_t>(cfg.personality_dim));
    for (double& x : p) x = rng.normal();
    s.personality = Tensor::from_data({2, cfg.personality_dim}, std::move(p));
    out.push_back(std::move(s));
  }
  return out;
}

// Builds a fresh network from cfg and checks d(L_main)/d(theta) for every
// parameter coordinate against central differences of step eps.
//
// The error is |a - fd| / (|a| + |fd| + 1e-7). The 1e-7 floor is the
// resolution limit of central differences at eps=1e-5 on an O(1) loss
// (roundoff ~ ulp(L)/eps ~ 1e-11 absolute): coordinates whose true gradient
// sits below the floor are compared in absolute terms against 1e-11, which
// still exposes any wrongly-computed gradient of consequential size.
inline GradCheckReport check_model_gradients(const ModelConfig& cfg,
                                             const std::vector<Sample>& samples, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw std::invalid_argument("check_model_gradients: eps must lie in (0, 1e-2]");
  }
  if (samples.empty()) {
    throw std::invalid_argument("check_model_gradients: need at least one sample");
  }
  Rng rng = Rng::stream(cfg.seed, 0x6ADC3EC);
  Network net(cfg, rng);
  Trainer trainer(net, cfg);
  std::vector<const Sample*> batch;
  for (const Sample& s : samples) batch.push_back(&s);

  Tape tape;
  Trainer::BatchTerms bt = trainer.compute_batch_terms(tape, batch);
  tape.backward(bt.main);  // unscoped: every parameter receives its gradient

  std::vector<std::vector<double>> analytic;
  for (const NamedParam& p : net.named_parameters()) analytic.push_back(p.tensor.grad_copy());

  auto eval_main = [&]() {
    Tape t;
    NoGradGuard guard(t);
    return trainer.compute_batch_terms(t, batch).main.value();
  };

  GradCheckReport rep;
  rep.eps = eps;
  const auto& named = net.named_parameters();
  for (std::size_t pi = 0; pi < named.size(); ++pi) {
    Tensor p = named[pi].tensor;
    GradCheckEntry entry{named[pi].name, p.size(), 0.0};
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double orig = p.data()[j];
      p.data()[j] = orig + eps;
      const double fp = eval_main();
      p.data()[j] = orig - eps;
      const double fm = eval_main();
      p.data()[j] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double err =
          std::fabs(analytic[pi][j] - fd) / (std::fabs(analytic[pi][j]) + std::fabs(fd) + 1e-7);
      entry.max_rel_err = std::max(entry.max_rel_err, err);
    }
    rep.worst = std::max(rep.worst, entry.max_rel_err);
    rep.total_coordinates += entry.coordinates;
    rep.entries.push_back(std::move(entry));
  }
  return rep;
}

// The micro configuration used by the gradient certification: small enough
// that sweeping every coordinate stays under a minute.
inline ModelConfig gradcheck_config() {
  ModelConfig cfg;
  cfg.d1 = 4;
  cfg.d2 = 4;
  cfg.d3 = 2;
  cfg.visual_dim = 3;
  cfg.audio_dim = 2;
  cfg.personality_dim = 2;
  cfg.window = 2;
  cfg.heads = 2;
  cfg.conv_layers = 2;
  cfg.events = 2;
  cfg.num_classes = 3;
  cfg.alpha = 0.8;
  cfg.beta = 0.1;
  cfg.gamma = 0.1;
  cfg.batch_size = 2;
  return cfg;
}

}  // namespace hgf
