#pragma once

// Synthetic dataset with planted structure:
//   frame = g_s * (noise * xi + s_pub * coeff(y) * u_m + s_priv * (1+z_sk) * e_mk)
// where u_m is a per-modality class direction shared by every subject
// (public, label-carrying), e_mk is a per-event direction (private,
// event-carrying), z_sk is a per-subject event coefficient, and g_s is the
// subject's personality scale, also encoded in the personality tokens so
// the gate can undo it. Labels project onto u_m with class-dependent sign,
// which a tiny logistic model can verify independently of the network.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hgfusion/data.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

struct SyntheticSpec {
  int subjects = 60;
  int events = 3;
  int num_classes = 3;
  int t_min = 8;
  int t_max = 20;
  int visual_dim = 2048;
  int audio_dim = 1024;
  int personality_dim = 768;
  int personality_tokens = 6;
  double signal_public = 5.0;
  double signal_private = 1.0;
  double noise = 0.5;
  double personality_scale_min = 0.6;
  double personality_scale_max = 1.4;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes != 2 && num_classes != 3) {
      throw std::invalid_argument("synthetic: num_classes must be 2 or 3");
    }
    if (subjects < 2 * num_classes) {
      throw std::invalid_argument("synthetic: need at least 2 subjects per class");
    }
    if (events < 1) throw std::invalid_argument("synthetic: events must be >= 1");
    if (t_min < 1 || t_min > t_max) {
      throw std::invalid_argument("synthetic: need 1 <= t_min <= t_max");
    }
    if (visual_dim < 1 || audio_dim < 1 || personality_dim < 1 || personality_tokens < 1) {
      throw std::invalid_argument("synthetic: dimensions must be positive");
    }
    if (noise < 0.0 || signal_public < 0.0 || signal_private < 0.0) {
      throw std::invalid_argument("synthetic: strengths must be non-negative");
    }
    if (!(personality_scale_min > 0.0) || personality_scale_min > personality_scale_max) {
      throw std::invalid_argument("synthetic: need 0 < scale_min <= scale_max");
    }
  }

  nlohmann::json to_json() const {
    return {
        {"subjects", subjects},
        {"events", events},
        {"num_classes", num_classes},
        {"t_min", t_min},
        {"t_max", t_max},
        {"visual_dim", visual_dim},
        {"audio_dim", audio_dim},
        {"personality_dim", personality_dim},
        {"personality_tokens", personality_tokens},
        {"signal_public", signal_public},
        {"signal_private", signal_private},
        {"noise", noise},
        {"personality_scale_min", personality_scale_min},
        {"personality_scale_max", personality_scale_max},
        {"seed", seed},
    };
  }

  static SyntheticSpec from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("synthetic: top level must be a JSON object");
    static const std::set<std::string> known = {
        "subjects", "events", "num_classes", "t_min", "t_max",
        "visual_dim", "audio_dim", "personality_dim", "personality_tokens",
        "signal_public", "signal_private", "noise",
        "personality_scale_min", "personality_scale_max", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!known.count(it.key())) {
        throw std::invalid_argument("synthetic: unknown key \"" + it.key() + "\"");
      }
    }
    SyntheticSpec s;
    auto get_int = [&](const char* key, int& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_number_integer()) {
        throw std::invalid_argument(std::string("synthetic: ") + key + " must be an integer");
      }
      out = j[key].get<int>();
    };
    auto get_num = [&](const char* key, double& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_number()) {
        throw std::invalid_argument(std::string("synthetic: ") + key + " must be a number");
      }
      out = j[key].get<double>();
    };
    get_int("subjects", s.subjects);
    get_int("events", s.events);
    get_int("num_classes", s.num_classes);
    get_int("t_min", s.t_min);
    get_int("t_max", s.t_max);
    get_int("visual_dim", s.visual_dim);
    get_int("audio_dim", s.audio_dim);
    get_int("personality_dim", s.personality_dim);
    get_int("personality_tokens", s.personality_tokens);
    get_num("signal_public", s.signal_public);
    get_num("signal_private", s.signal_private);
    get_num("noise", s.noise);
    get_num("personality_scale_min", s.personality_scale_min);
    get_num("personality_scale_max", s.personality_scale_max);
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
        throw std::invalid_argument("synthetic: seed must be a non-negative integer");
      }
      const auto v = j["seed"].get<std::int64_t>();
      if (v < 0) throw std::invalid_argument("synthetic: seed must be a non-negative integer");
      s.seed = static_cast<std::uint64_t>(v);
    }
    s.validate();
    return s;
  }

  static SyntheticSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("synthetic: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("synthetic: " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }
};

namespace detail {

inline std::vector<double> unit_direction(int dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace detail

inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.events = spec.events;
  ds.num_classes = spec.num_classes;
  ds.visual_dim = spec.visual_dim;
  ds.audio_dim = spec.audio_dim;
  ds.personality_dim = spec.personality_dim;

  Rng dir_rng = Rng::stream(spec.seed, 1);
  const std::vector<double> u_vis = detail::unit_direction(spec.visual_dim, dir_rng);
  const std::vector<double> u_aud = detail::unit_direction(spec.audio_dim, dir_rng);
  const std::vector<double> u_per = detail::unit_direction(spec.personality_dim, dir_rng);
  std::vector<std::vector<double>> e_vis, e_aud;
  for (int k = 0; k < spec.events; ++k) {
    e_vis.push_back(detail::unit_direction(spec.visual_dim, dir_rng));
    e_aud.push_back(detail::unit_direction(spec.audio_dim, dir_rng));
  }

  // Class coefficients spread evenly over [-1, 1].
  std::vector<double> coeffs(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c) {
    coeffs[c] = spec.num_classes == 1 ? 0.0
                                      : -1.0 + 2.0 * c / static_cast<double>(spec.num_classes - 1);
  }

  Rng subj_rng = Rng::stream(spec.seed, 2);
  Rng noise_rng = Rng::stream(spec.seed, 3);

  for (int s = 0; s < spec.subjects; ++s) {
    Sample sample;
    char id[16];
    std::snprintf(id, sizeof(id), "subj%03d", s);
    sample.id = id;
    sample.label = s % spec.num_classes;
    const double g = subj_rng.uniform(spec.personality_scale_min, spec.personality_scale_max);
    const double coeff = coeffs[sample.label];

    for (int k = 0; k < spec.events; ++k) {
      const int t_len = spec.t_min + static_cast<int>(subj_rng.index(
                                         static_cast<std::size_t>(spec.t_max - spec.t_min + 1)));
      const double z = 1.0 + 0.3 * subj_rng.normal();
      EventFeatures ev;
      auto fill = [&](int dim, const std::vector<double>& u, const std::vector<double>& e) {
        std::vector<double> data(static_cast<std::size_t>(t_len) * dim);
        for (int t = 0; t < t_len; ++t) {
          double* row = data.data() + static_cast<std::size_t>(t) * dim;
          for (int i = 0; i < dim; ++i) {
            row[i] = g * (spec.noise * noise_rng.normal() + spec.signal_public * coeff * u[i] +
                          spec.signal_private * z * e[i]);
          }
        }
        return Tensor::from_data({t_len, dim}, std::move(data));
      };
      ev.visual = fill(spec.visual_dim, u_vis, e_vis[k]);
      ev.audio = fill(spec.audio_dim, u_aud, e_aud[k]);
      sample.events.push_back(std::move(ev));
    }

    // Personality tokens: scale along u_per plus small isotropic noise.
    std::vector<double> pdata(static_cast<std::size_t>(spec.personality_tokens) *
                              spec.personality_dim);
    for (int t = 0; t < spec.personality_tokens; ++t) {
      double* row = pdata.data() + static_cast<std::size_t>(t) * spec.personality_dim;
      for (int i = 0; i < spec.personality_dim; ++i) {
        row[i] = g * u_per[i] + 0.1 * noise_rng.normal();
      }
    }
    sample.personality =
        Tensor::from_data({spec.personality_tokens, spec.personality_dim}, std::move(pdata));
    ds.samples.push_back(std::move(sample));
  }

  ds.planted.present = true;
  ds.planted.seed = spec.seed;
  ds.planted.signal_public = spec.signal_public;
  ds.planted.signal_private = spec.signal_private;
  ds.planted.noise = spec.noise;
  ds.planted.personality_scale_min = spec.personality_scale_min;
  ds.planted.personality_scale_max = spec.personality_scale_max;
  ds.planted.class_coeffs = coeffs;
  ds.planted.visual_direction = u_vis;
  ds.planted.audio_direction = u_aud;
  return ds;
}

// Self-test oracle: project every frame onto the planted public directions,
// pool per subject, and fit a tiny multinomial logistic model on the two
// pooled projections. Returns training accuracy; with the default spec this
// sits near 1, and it collapses toward chance when signal_public is 0.
inline double planted_signal_accuracy(const Dataset& ds) {
  if (!ds.planted.present) {
    throw std::invalid_argument("planted_signal_accuracy: dataset carries no planted parameters");
  }
  if (static_cast<int>(ds.planted.visual_direction.size()) != ds.visual_dim ||
      static_cast<int>(ds.planted.audio_direction.size()) != ds.audio_dim) {
    throw std::invalid_argument("planted_signal_accuracy: direction widths disagree with dims");
  }
  const int n = static_cast<int>(ds.samples.size());
  if (n < 2) throw std::invalid_argument("planted_signal_accuracy: need at least 2 samples");
  const int classes = ds.num_classes;

  std::vector<std::array<double, 3>> feats(n);  // [q_vis, q_aud, 1]
  std::vector<int> labels(n);
  for (int s = 0; s < n; ++s) {
    const Sample& sm = ds.samples[s];
    double q_vis = 0.0, q_aud = 0.0;
    long long frames = 0;
    for (const EventFeatures& e : sm.events) {
      const int t_len = e.frames();
      for (int t = 0; t < t_len; ++t) {
        double pv = 0.0, pa = 0.0;
        for (int i = 0; i < ds.visual_dim; ++i) {
          pv += e.visual.at(t, i) * ds.planted.visual_direction[i];
        }
        for (int i = 0; i < ds.audio_dim; ++i) {
          pa += e.audio.at(t, i) * ds.planted.audio_direction[i];
        }
        q_vis += pv;
        q_aud += pa;
        ++frames;
      }
    }
    feats[s] = {q_vis / frames, q_aud / frames, 1.0};
    labels[s] = sm.label;
  }

  // Full-batch gradient descent on softmax cross-entropy; deterministic.
  std::vector<double> w(static_cast<std::size_t>(classes) * 3, 0.0);
  const double lr = 0.5;
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<double> grad(w.size(), 0.0);
    for (int s = 0; s < n; ++s) {
      double scores[8] = {0};
      double mx = -1e300;
      for (int c = 0; c < classes; ++c) {
        scores[c] = w[c * 3] * feats[s][0] + w[c * 3 + 1] * feats[s][1] + w[c * 3 + 2];
        mx = std::max(mx, scores[c]);
      }
      double sum = 0.0;
      for (int c = 0; c < classes; ++c) sum += std::exp(scores[c] - mx);
      for (int c = 0; c < classes; ++c) {
        const double p = std::exp(scores[c] - mx) / sum;
        const double d = (p - (labels[s] == c ? 1.0 : 0.0)) / n;
        grad[c * 3] += d * feats[s][0];
        grad[c * 3 + 1] += d * feats[s][1];
        grad[c * 3 + 2] += d;
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
  }

  int hits = 0;
  for (int s = 0; s < n; ++s) {
    int best = 0;
    double best_score = -1e300;
    for (int c = 0; c < classes; ++c) {
      const double score = w[c * 3] * feats[s][0] + w[c * 3 + 1] * feats[s][1] + w[c * 3 + 2];
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    hits += best == labels[s] ? 1 : 0;
  }
  return static_cast<double>(hits) / n;
}

}  // namespace hgf
