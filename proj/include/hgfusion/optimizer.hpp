#pragma once

// Parameter-group optimizer (AdamW with decoupled weight decay, plus a plain
// SGD mode) and the cosine learning-rate schedule. Gradient clipping rescales
// by the global norm across the whole group before the update.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgfusion/tensor.hpp"

namespace hgf {

// lr(epoch) = lo + (hi - lo) * (1 + cos(pi * epoch / max_epochs)) / 2.
// epoch 0 gives hi, epoch == max_epochs gives lo, and the curve is monotone
// in between.
inline double cosine_lr(int epoch, int max_epochs, double hi, double lo) {
  if (max_epochs < 1) throw std::invalid_argument("cosine_lr: max_epochs must be >= 1");
  if (epoch < 0 || epoch > max_epochs) {
    throw std::invalid_argument("cosine_lr: epoch " + std::to_string(epoch) +
                                " outside [0, " + std::to_string(max_epochs) + "]");
  }
  if (!(hi >= lo) || !(lo >= 0.0)) {
    throw std::invalid_argument("cosine_lr: need hi >= lo >= 0");
  }
  constexpr double pi = 3.14159265358979323846;
  return lo + 0.5 * (hi - lo) * (1.0 + std::cos(pi * epoch / max_epochs));
}

enum class OptimKind { AdamW, Sgd };

inline OptimKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimKind::AdamW;
  if (name == "sgd") return OptimKind::Sgd;
  throw std::invalid_argument("optimizer: unknown kind \"" + name + "\"");
}

class Optimizer {
 public:
  Optimizer(OptimKind kind, std::vector<Tensor> params, double weight_decay, double clip_norm)
      : kind_(kind), params_(std::move(params)), weight_decay_(weight_decay),
        clip_norm_(clip_norm) {
    if (params_.empty()) throw std::invalid_argument("Optimizer: empty parameter group");
    if (weight_decay_ < 0.0) throw std::invalid_argument("Optimizer: negative weight decay");
    for (const Tensor& p : params_) {
      if (!p.requires_grad()) {
        throw std::invalid_argument("Optimizer: parameter does not require gradients");
      }
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void set_lr(double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("Optimizer: learning rate must be >= 0");
    lr_ = lr;
  }
  double lr() const { return lr_; }
  long long step_count() const { return steps_; }
  double last_grad_norm() const { return last_norm_; }
  std::size_t group_size() const { return params_.size(); }

  // Global gradient norm over the group; clips in place when a positive
  // clip threshold is set and exceeded. Returns the pre-clip norm.
  double clip_gradients() {
    double sq = 0.0;
    for (const Tensor& p : params_) {
      const double* g = p.grad();
      for (std::size_t i = 0; i < p.size(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    last_norm_ = norm;
    if (clip_norm_ > 0.0 && norm > clip_norm_) {
      const double scale = clip_norm_ / norm;
      for (Tensor& p : params_) {
        double* g = p.grad();
        for (std::size_t i = 0; i < p.size(); ++i) g[i] *= scale;
      }
    }
    return norm;
  }

  void step() {
    clip_gradients();
    ++steps_;
    if (kind_ == OptimKind::Sgd) {
      for (Tensor& p : params_) {
        double* w = p.data();
        const double* g = p.grad();
        for (std::size_t i = 0; i < p.size(); ++i) {
          w[i] -= lr_ * (g[i] + weight_decay_ * w[i]);
        }
      }
      return;
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor& p = params_[pi];
      double* w = p.data();
      const double* g = p.grad();
      std::vector<double>& m = m_[pi];
      std::vector<double>& v = v_[pi];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * w[i]);
      }
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  // Moment access for checkpointing.
  const std::vector<std::vector<double>>& moments_m() const { return m_; }
  const std::vector<std::vector<double>>& moments_v() const { return v_; }
  void restore_state(const std::vector<std::vector<double>>& m,
                     const std::vector<std::vector<double>>& v, long long steps) {
    if (m.size() != m_.size() || v.size() != v_.size()) {
      throw std::invalid_argument("Optimizer: moment group count mismatch on restore");
    }
    for (std::size_t i = 0; i < m_.size(); ++i) {
      if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size()) {
        throw std::invalid_argument("Optimizer: moment size mismatch on restore");
      }
    }
    m_ = m;
    v_ = v;
    steps_ = steps;
  }

 private:
  OptimKind kind_;
  std::vector<Tensor> params_;
  double weight_decay_;
  double clip_norm_;
  double lr_ = 0.0;
  double last_norm_ = 0.0;
  long long steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
  static constexpr double beta1_ = 0.9;
  static constexpr double beta2_ = 0.999;
  static constexpr double eps_ = 1e-8;
};

}  // namespace hgf
