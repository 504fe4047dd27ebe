#pragma once

// Classification metrics over a confusion matrix, subject-level prediction
// from per-timestep log-probabilities, and the within/between separation
// ratio used to judge disentanglement.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hgfusion/tensor.hpp"

namespace hgf {

// counts[truth][pred], truth = rows.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<long long> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes_) : classes(classes_) {
    if (classes < 2) throw std::invalid_argument("ConfusionMatrix: need at least 2 classes");
    counts.assign(static_cast<std::size_t>(classes) * classes, 0);
  }

  void add(int truth, int pred, long long n = 1) {
    if (truth < 0 || truth >= classes || pred < 0 || pred >= classes) {
      throw std::invalid_argument("ConfusionMatrix::add: label out of range");
    }
    counts[static_cast<std::size_t>(truth) * classes + pred] += n;
  }

  long long at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * classes + pred];
  }

  long long total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
  }

  long long support(int truth) const {
    long long s = 0;
    for (int j = 0; j < classes; ++j) s += at(truth, j);
    return s;
  }

  long long predicted(int pred) const {
    long long s = 0;
    for (int i = 0; i < classes; ++i) s += at(i, pred);
    return s;
  }

  std::vector<std::vector<long long>> rows() const {
    std::vector<std::vector<long long>> out(classes);
    for (int i = 0; i < classes; ++i) {
      out[i].assign(counts.begin() + static_cast<std::ptrdiff_t>(i) * classes,
                    counts.begin() + static_cast<std::ptrdiff_t>(i + 1) * classes);
    }
    return out;
  }
};

inline double accuracy(const ConfusionMatrix& cm) {
  const long long total = cm.total();
  if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
  long long hit = 0;
  for (int i = 0; i < cm.classes; ++i) hit += cm.at(i, i);
  return static_cast<double>(hit) / static_cast<double>(total);
}

// Support-weighted mean of per-class F1. Classes with zero precision+recall
// denominator contribute F1 = 0; classes with zero support contribute
// nothing (weight 0).
inline double weighted_f1(const ConfusionMatrix& cm) {
  const long long total = cm.total();
  if (total == 0) throw std::invalid_argument("weighted_f1: empty confusion matrix");
  double acc = 0.0;
  for (int c = 0; c < cm.classes; ++c) {
    const long long sup = cm.support(c);
    if (sup == 0) continue;
    const long long tp = cm.at(c, c);
    const long long pred = cm.predicted(c);
    const double precision = pred > 0 ? static_cast<double>(tp) / pred : 0.0;
    const double recall = static_cast<double>(tp) / sup;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    acc += f1 * (static_cast<double>(sup) / static_cast<double>(total));
  }
  return acc;
}

// Subject-level decision: average log-probabilities over time, argmax wins,
// ties resolve to the lower class index.
inline int subject_prediction(const Tensor& log_probs) {
  if (log_probs.rank() != 2 || log_probs.shape()[0] < 1) {
    throw std::invalid_argument("subject_prediction: expected non-empty [T,C] log-probs");
  }
  const int t_len = log_probs.shape()[0], classes = log_probs.shape()[1];
  int best = 0;
  double best_score = 0.0;
  for (int c = 0; c < classes; ++c) {
    double mean = 0.0;
    for (int t = 0; t < t_len; ++t) mean += log_probs.at(t, c);
    mean /= t_len;
    if (c == 0 || mean > best_score) {
      best = c;
      best_score = mean;
    }
  }
  return best;
}

struct SeparationStats {
  double public_ratio = 0.0;   // between-event / within-event mean distance
  double private_ratio = 0.0;
};

// Between-event over within-event mean pairwise Euclidean distance, rows
// grouped by event. "Within" averages over all ordered row pairs inside one
// event (self-pairs included, contributing zero); "between" over all ordered
// pairs from different events. Identical feature sets across events give
// ratio exactly 1; event-specific clusters push it above 1.
inline double separation_ratio(const std::vector<std::vector<std::vector<double>>>& rows_by_event) {
  const int k_events = static_cast<int>(rows_by_event.size());
  if (k_events < 2) throw std::invalid_argument("separation_ratio: need at least 2 events");
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  };
  double within = 0.0, between = 0.0;
  long long n_within = 0, n_between = 0;
  for (int a = 0; a < k_events; ++a) {
    for (int b = 0; b < k_events; ++b) {
      for (const auto& ra : rows_by_event[a]) {
        for (const auto& rb : rows_by_event[b]) {
          if (ra.size() != rb.size()) {
            throw std::invalid_argument("separation_ratio: inconsistent feature widths");
          }
          const double d = dist(ra, rb);
          if (a == b) {
            within += d;
            ++n_within;
          } else {
            between += d;
            ++n_between;
          }
        }
      }
    }
  }
  if (n_within == 0 || n_between == 0) {
    throw std::invalid_argument("separation_ratio: empty event groups");
  }
  const double within_mean = within / n_within;
  if (within_mean == 0.0) {
    // Single row per event (or exact duplicates): no within spread to
    // compare against. Collapsed identical features count as ratio 1.
    return between / n_between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return (between / n_between) / within_mean;
}

inline SeparationStats separation_stats(
    const std::vector<std::vector<std::vector<double>>>& pub_rows_by_event,
    const std::vector<std::vector<std::vector<double>>>& pri_rows_by_event) {
  SeparationStats s;
  s.public_ratio = separation_ratio(pub_rows_by_event);
  s.private_ratio = separation_ratio(pri_rows_by_event);
  return s;
}

}  // namespace hgf
