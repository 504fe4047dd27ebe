#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Every operation validates shapes (errors name the offending shapes) and
// rejects non-finite inputs. Ops are recorded on an explicit Tape when any
// input requires gradients; Tape::backward replays the records in reverse.
// Backward accumulates into leaf gradients without clearing them, so two
// backward passes sum (linearity); intermediate gradients are re-zeroed at
// the start of each pass. A backward call may be scoped to a subset of leaf
// parameters: out-of-scope leaves receive exactly zero contribution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hgf {

using Shape = std::vector<int>;

namespace detail {

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  bool leaf = true;
};

using NodePtr = std::shared_ptr<Node>;

// C = A(m x k) * B(k x n), overwrite.
inline void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += G(m x n) * B(k x n)^T  -> (m x k)
inline void mm_nt_acc(const double* g, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* gi = g + static_cast<std::size_t>(i) * n;
    double* ci = c + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* bp = b + static_cast<std::size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// C += A(m x k)^T * G(m x n)  -> (k x n)
inline void mm_tn_acc(const double* a, const double* g, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    const double* gi = g + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) cp[j] += aip * gi[j];
    }
  }
}

}  // namespace detail

class Tape;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    return make(shape, std::vector<double>(detail::shape_numel(shape), 0.0), requires_grad);
  }

  static Tensor full(const Shape& shape, double value, bool requires_grad = false) {
    return make(shape, std::vector<double>(detail::shape_numel(shape), value), requires_grad);
  }

  static Tensor from_data(const Shape& shape, std::vector<double> data, bool requires_grad = false) {
    if (data.size() != detail::shape_numel(shape)) {
      throw std::invalid_argument("Tensor::from_data: " + std::to_string(data.size()) +
                                  " values for shape " + detail::shape_str(shape));
    }
    return make(shape, std::move(data), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return make(Shape{1}, std::vector<double>{value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t size() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  const void* id() const { return node_.get(); }

  int rows() const {
    check_rank2("rows");
    return node_->shape[0];
  }
  int cols() const {
    check_rank2("cols");
    return node_->shape[1];
  }

  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }
  double* grad() { return node_->requires_grad ? node_->grad.data() : nullptr; }
  const double* grad() const { return node_->requires_grad ? node_->grad.data() : nullptr; }

  double value() const {
    if (size() != 1) {
      throw std::invalid_argument("Tensor::value: tensor of shape " + detail::shape_str(shape()) +
                                  " is not scalar");
    }
    return node_->data[0];
  }

  double at(int r, int c) const {
    check_rank2("at");
    return node_->data[static_cast<std::size_t>(r) * node_->shape[1] + c];
  }
  double& at(int r, int c) {
    check_rank2("at");
    return node_->data[static_cast<std::size_t>(r) * node_->shape[1] + c];
  }

  void zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  std::vector<double> grad_copy() const {
    if (!node_->requires_grad) {
      throw std::invalid_argument("Tensor::grad_copy: tensor does not track gradients");
    }
    return node_->grad;
  }

 private:
  detail::NodePtr node_;

  static Tensor make(const Shape& shape, std::vector<double> data, bool requires_grad) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = shape;
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    if (requires_grad) t.node_->grad.assign(t.node_->data.size(), 0.0);
    t.node_->leaf = true;
    return t;
  }

  void check_rank2(const char* what) const {
    if (node_->shape.size() != 2) {
      throw std::invalid_argument(std::string("Tensor::") + what + ": tensor of shape " +
                                  detail::shape_str(node_->shape) + " is not rank 2");
    }
  }

  friend class Tape;
};

// Records operations and replays adjoints in reverse order.
class Tape {
 public:
  using LeafGate = std::function<bool(const detail::Node*)>;

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  std::size_t record_count() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Derivative of a scalar loss w.r.t. every gradient-tracking leaf.
  void backward(const Tensor& loss) {
    run_backward(loss, [](const detail::Node*) { return true; });
  }

  // Same, but leaf accumulation is restricted to `scope`; every other leaf
  // receives exactly zero contribution from this pass. Gradients still flow
  // through out-of-scope leaves' downstream consumers (they only read data).
  void backward(const Tensor& loss, const std::vector<Tensor>& scope) {
    std::unordered_set<const void*> allowed;
    allowed.reserve(scope.size() * 2);
    for (const Tensor& t : scope) allowed.insert(t.id());
    run_backward(loss, [allowed = std::move(allowed)](const detail::Node* n) {
      return allowed.count(n) != 0;
    });
  }

  // ---- operations -------------------------------------------------------

  Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
      throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                  detail::shape_str(a.shape()) + " x " + detail::shape_str(b.shape()));
    }
    check_finite(a, "matmul");
    check_finite(b, "matmul");
    Tensor out = fresh({m, n}, tracks(a) || tracks(b));
    detail::mm_nn(a.data(), b.data(), out.data(), m, k, n);
    if (out.requires_grad()) {
      auto an = a.node_, bn = b.node_, on = out.node_;
      push(on, [an, bn, on, m, k, n](const LeafGate& gate) {
        const double* g = on->grad.data();
        if (wants(an, gate)) detail::mm_nt_acc(g, bn->data.data(), an->grad.data(), m, n, k);
        if (wants(bn, gate)) detail::mm_tn_acc(an->data.data(), g, bn->grad.data(), m, k, n);
      });
    }
    return out;
  }

  Tensor transpose(const Tensor& x) {
    require_rank(x, 2, "transpose");
    const int m = x.shape()[0], n = x.shape()[1];
    check_finite(x, "transpose");
    Tensor out = fresh({n, m}, tracks(x));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        out.data()[static_cast<std::size_t>(j) * m + i] = x.data()[static_cast<std::size_t>(i) * n + j];
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, m, n](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            xn->grad[static_cast<std::size_t>(i) * n + j] += on->grad[static_cast<std::size_t>(j) * m + i];
      });
    }
    return out;
  }

  Tensor add(const Tensor& a, const Tensor& b) { return binary_same_shape(a, b, "add", Binary::Add); }
  Tensor sub(const Tensor& a, const Tensor& b) { return binary_same_shape(a, b, "sub", Binary::Sub); }
  Tensor mul(const Tensor& a, const Tensor& b) { return binary_same_shape(a, b, "mul", Binary::Mul); }

  Tensor scale(const Tensor& x, double c) {
    if (!std::isfinite(c)) throw std::domain_error("scale: non-finite factor");
    check_finite(x, "scale");
    Tensor out = fresh(x.shape(), tracks(x));
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, c](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += c * on->grad[i];
      });
    }
    return out;
  }

  // x: [t,d], v: [d]; out[t,d] = x[t,d] + v[d]. The only broadcast form.
  Tensor add_rowwise(const Tensor& x, const Tensor& v) { return rowwise(x, v, "add_rowwise", true); }
  // x: [t,d], v: [d]; out[t,d] = x[t,d] * v[d].
  Tensor mul_rowwise(const Tensor& x, const Tensor& v) { return rowwise(x, v, "mul_rowwise", false); }

  Tensor sigmoid(const Tensor& x) {
    check_finite(x, "sigmoid");
    Tensor out = fresh(x.shape(), tracks(x));
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x.data()[i];
      out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
          const double y = on->data[i];
          xn->grad[i] += on->grad[i] * y * (1.0 - y);
        }
      });
    }
    return out;
  }

  Tensor tanh(const Tensor& x) {
    check_finite(x, "tanh");
    Tensor out = fresh(x.shape(), tracks(x));
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
          const double y = on->data[i];
          xn->grad[i] += on->grad[i] * (1.0 - y * y);
        }
      });
    }
    return out;
  }

  Tensor relu(const Tensor& x) {
    check_finite(x, "relu");
    Tensor out = fresh(x.shape(), tracks(x));
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
          if (xn->data[i] > 0.0) xn->grad[i] += on->grad[i];
        }
      });
    }
    return out;
  }

  Tensor exp(const Tensor& x) {
    check_finite(x, "exp");
    Tensor out = fresh(x.shape(), tracks(x));
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::exp(x.data()[i]);
    check_finite(out, "exp (overflow)");
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * on->data[i];
      });
    }
    return out;
  }

  // Row-stable softmax over the last axis of a [t,c] tensor.
  Tensor softmax_rows(const Tensor& x) {
    require_rank(x, 2, "softmax_rows");
    check_finite(x, "softmax_rows");
    const int t = x.shape()[0], c = x.shape()[1];
    Tensor out = fresh(x.shape(), tracks(x));
    for (int i = 0; i < t; ++i) {
      const double* xi = x.data() + static_cast<std::size_t>(i) * c;
      double* oi = out.data() + static_cast<std::size_t>(i) * c;
      const double mx = *std::max_element(xi, xi + c);
      double sum = 0.0;
      for (int j = 0; j < c; ++j) {
        oi[j] = std::exp(xi[j] - mx);
        sum += oi[j];
      }
      for (int j = 0; j < c; ++j) oi[j] /= sum;
    }
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, t, c](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (int i = 0; i < t; ++i) {
          const double* y = on->data.data() + static_cast<std::size_t>(i) * c;
          const double* g = on->grad.data() + static_cast<std::size_t>(i) * c;
          double dot = 0.0;
          for (int j = 0; j < c; ++j) dot += g[j] * y[j];
          double* dx = xn->grad.data() + static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) dx[j] += y[j] * (g[j] - dot);
        }
      });
    }
    return out;
  }

  Tensor log_softmax_rows(const Tensor& x) {
    require_rank(x, 2, "log_softmax_rows");
    check_finite(x, "log_softmax_rows");
    const int t = x.shape()[0], c = x.shape()[1];
    Tensor out = fresh(x.shape(), tracks(x));
    for (int i = 0; i < t; ++i) {
      const double* xi = x.data() + static_cast<std::size_t>(i) * c;
      double* oi = out.data() + static_cast<std::size_t>(i) * c;
      const double mx = *std::max_element(xi, xi + c);
      double sum = 0.0;
      for (int j = 0; j < c; ++j) sum += std::exp(xi[j] - mx);
      const double lse = mx + std::log(sum);
      for (int j = 0; j < c; ++j) oi[j] = xi[j] - lse;
    }
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, t, c](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (int i = 0; i < t; ++i) {
          const double* y = on->data.data() + static_cast<std::size_t>(i) * c;
          const double* g = on->grad.data() + static_cast<std::size_t>(i) * c;
          double gsum = 0.0;
          for (int j = 0; j < c; ++j) gsum += g[j];
          double* dx = xn->grad.data() + static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) dx[j] += g[j] - std::exp(y[j]) * gsum;
        }
      });
    }
    return out;
  }

  Tensor concat_rows(const std::vector<Tensor>& parts) { return concat(parts, 0); }
  Tensor concat_cols(const std::vector<Tensor>& parts) { return concat(parts, 1); }

  Tensor slice_rows(const Tensor& x, int r0, int r1) { return slice(x, r0, r1, 0); }
  Tensor slice_cols(const Tensor& x, int c0, int c1) { return slice(x, c0, c1, 1); }

  // Mean over the row axis: [t,d] -> [d].
  Tensor mean_rows(const Tensor& x) {
    require_rank(x, 2, "mean_rows");
    check_finite(x, "mean_rows");
    const int t = x.shape()[0], d = x.shape()[1];
    Tensor out = fresh({d}, tracks(x));
    std::fill(out.data(), out.data() + d, 0.0);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < d; ++j) out.data()[j] += x.data()[static_cast<std::size_t>(i) * d + j];
    for (int j = 0; j < d; ++j) out.data()[j] /= t;
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, t, d](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (int i = 0; i < t; ++i)
          for (int j = 0; j < d; ++j)
            xn->grad[static_cast<std::size_t>(i) * d + j] += on->grad[j] / t;
      });
    }
    return out;
  }

  Tensor sum_all(const Tensor& x) {
    check_finite(x, "sum_all");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
    Tensor out = fresh({1}, tracks(x));
    out.data()[0] = s;
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        const double g = on->grad[0];
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
      });
    }
    return out;
  }

  Tensor trace(const Tensor& x) {
    require_rank(x, 2, "trace");
    const int n = x.shape()[0];
    if (x.shape()[1] != n) {
      throw std::invalid_argument("trace: matrix of shape " + detail::shape_str(x.shape()) +
                                  " is not square");
    }
    check_finite(x, "trace");
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x.data()[static_cast<std::size_t>(i) * n + i];
    Tensor out = fresh({1}, tracks(x));
    out.data()[0] = s;
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, n](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        const double g = on->grad[0];
        for (int i = 0; i < n; ++i) xn->grad[static_cast<std::size_t>(i) * n + i] += g;
      });
    }
    return out;
  }

  // Diagonal of a square matrix: [n,n] -> [n].
  Tensor diag(const Tensor& x) {
    require_rank(x, 2, "diag");
    const int n = x.shape()[0];
    if (x.shape()[1] != n) {
      throw std::invalid_argument("diag: matrix of shape " + detail::shape_str(x.shape()) +
                                  " is not square");
    }
    check_finite(x, "diag");
    Tensor out = fresh({n}, tracks(x));
    for (int i = 0; i < n; ++i) out.data()[i] = x.data()[static_cast<std::size_t>(i) * n + i];
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, n](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (int i = 0; i < n; ++i) xn->grad[static_cast<std::size_t>(i) * n + i] += on->grad[i];
      });
    }
    return out;
  }

  Tensor reshape(const Tensor& x, const Shape& shape) {
    if (detail::shape_numel(shape) != x.size()) {
      throw std::invalid_argument("reshape: cannot view " + detail::shape_str(x.shape()) + " as " +
                                  detail::shape_str(shape));
    }
    check_finite(x, "reshape");
    Tensor out = fresh(shape, tracks(x));
    std::copy(x.data(), x.data() + x.size(), out.data());
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
      });
    }
    return out;
  }

 private:
  enum class Binary { Add, Sub, Mul };

  struct Record {
    detail::NodePtr out;
    std::function<void(const LeafGate&)> pull;
  };

  std::vector<Record> records_;
  bool recording_ = true;

  bool tracks(const Tensor& t) const { return recording_ && t.requires_grad(); }

  static bool wants(const detail::NodePtr& n, const LeafGate& gate) {
    if (!n->requires_grad) return false;
    if (n->leaf) return gate(n.get());
    return true;
  }

  Tensor fresh(const Shape& shape, bool requires_grad) {
    Tensor t = Tensor::make(shape, std::vector<double>(detail::shape_numel(shape), 0.0), requires_grad);
    if (requires_grad) t.node_->leaf = false;
    return t;
  }

  void push(detail::NodePtr out, std::function<void(const LeafGate&)> pull) {
    records_.push_back(Record{std::move(out), std::move(pull)});
  }

  static void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank) {
      throw std::invalid_argument(std::string(op) + ": expected rank-" + std::to_string(rank) +
                                  " tensor, got shape " + detail::shape_str(t.shape()));
    }
  }

  static void check_finite(const Tensor& t, const char* op) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data()[i])) {
        throw std::domain_error(std::string(op) + ": non-finite value at flat index " +
                                std::to_string(i));
      }
    }
  }

  Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* op, Binary kind) {
    if (a.shape() != b.shape()) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch: " + detail::shape_str(a.shape()) +
                                  " vs " + detail::shape_str(b.shape()));
    }
    check_finite(a, op);
    check_finite(b, op);
    Tensor out = fresh(a.shape(), tracks(a) || tracks(b));
    const std::size_t n = a.size();
    switch (kind) {
      case Binary::Add:
        for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
        break;
      case Binary::Sub:
        for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
        break;
      case Binary::Mul:
        for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
        break;
    }
    if (out.requires_grad()) {
      auto an = a.node_, bn = b.node_, on = out.node_;
      push(on, [an, bn, on, kind](const LeafGate& gate) {
        const std::size_t n = on->grad.size();
        if (wants(an, gate)) {
          switch (kind) {
            case Binary::Add:
            case Binary::Sub:
              for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
              break;
            case Binary::Mul:
              for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->data[i];
              break;
          }
        }
        if (wants(bn, gate)) {
          switch (kind) {
            case Binary::Add:
              for (std::size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
              break;
            case Binary::Sub:
              for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
              break;
            case Binary::Mul:
              for (std::size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->data[i];
              break;
          }
        }
      });
    }
    return out;
  }

  Tensor rowwise(const Tensor& x, const Tensor& v, const char* op, bool additive) {
    require_rank(x, 2, op);
    if (v.rank() != 1 || v.shape()[0] != x.shape()[1]) {
      throw std::invalid_argument(std::string(op) + ": vector shape " + detail::shape_str(v.shape()) +
                                  " does not match row width of " + detail::shape_str(x.shape()));
    }
    check_finite(x, op);
    check_finite(v, op);
    const int t = x.shape()[0], d = x.shape()[1];
    Tensor out = fresh(x.shape(), tracks(x) || tracks(v));
    for (int i = 0; i < t; ++i) {
      const double* xi = x.data() + static_cast<std::size_t>(i) * d;
      double* oi = out.data() + static_cast<std::size_t>(i) * d;
      if (additive) {
        for (int j = 0; j < d; ++j) oi[j] = xi[j] + v.data()[j];
      } else {
        for (int j = 0; j < d; ++j) oi[j] = xi[j] * v.data()[j];
      }
    }
    if (out.requires_grad()) {
      auto xn = x.node_, vn = v.node_, on = out.node_;
      push(on, [xn, vn, on, t, d, additive](const LeafGate& gate) {
        if (wants(xn, gate)) {
          for (int i = 0; i < t; ++i) {
            const double* g = on->grad.data() + static_cast<std::size_t>(i) * d;
            double* dx = xn->grad.data() + static_cast<std::size_t>(i) * d;
            if (additive) {
              for (int j = 0; j < d; ++j) dx[j] += g[j];
            } else {
              for (int j = 0; j < d; ++j) dx[j] += g[j] * vn->data[j];
            }
          }
        }
        if (wants(vn, gate)) {
          for (int i = 0; i < t; ++i) {
            const double* g = on->grad.data() + static_cast<std::size_t>(i) * d;
            if (additive) {
              for (int j = 0; j < d; ++j) vn->grad[j] += g[j];
            } else {
              const double* xi = xn->data.data() + static_cast<std::size_t>(i) * d;
              for (int j = 0; j < d; ++j) vn->grad[j] += g[j] * xi[j];
            }
          }
        }
      });
    }
    return out;
  }

  Tensor concat(const std::vector<Tensor>& parts, int axis) {
    const char* op = axis == 0 ? "concat_rows" : "concat_cols";
    if (parts.empty()) throw std::invalid_argument(std::string(op) + ": no inputs");
    int total = 0;
    const int other = parts[0].shape()[1 - axis];
    bool any_grad = false;
    for (const Tensor& p : parts) {
      require_rank(p, 2, op);
      if (p.shape()[1 - axis] != other) {
        throw std::invalid_argument(std::string(op) + ": incompatible part shapes " +
                                    detail::shape_str(parts[0].shape()) + " vs " +
                                    detail::shape_str(p.shape()));
      }
      check_finite(p, op);
      total += p.shape()[axis];
      any_grad = any_grad || tracks(p);
    }
    Shape out_shape = axis == 0 ? Shape{total, other} : Shape{other, total};
    Tensor out = fresh(out_shape, any_grad);
    const int out_cols = out_shape[1];
    int offset = 0;
    for (const Tensor& p : parts) {
      const int pr = p.shape()[0], pc = p.shape()[1];
      if (axis == 0) {
        std::copy(p.data(), p.data() + p.size(),
                  out.data() + static_cast<std::size_t>(offset) * out_cols);
      } else {
        for (int i = 0; i < pr; ++i)
          std::copy(p.data() + static_cast<std::size_t>(i) * pc,
                    p.data() + static_cast<std::size_t>(i) * pc + pc,
                    out.data() + static_cast<std::size_t>(i) * out_cols + offset);
      }
      offset += p.shape()[axis];
    }
    if (out.requires_grad()) {
      std::vector<detail::NodePtr> ins;
      ins.reserve(parts.size());
      for (const Tensor& p : parts) ins.push_back(p.node_);
      auto on = out.node_;
      push(on, [ins, on, axis, out_cols](const LeafGate& gate) {
        int offset = 0;
        for (const auto& in : ins) {
          const int pr = in->shape[0], pc = in->shape[1];
          if (wants(in, gate)) {
            if (axis == 0) {
              const double* g = on->grad.data() + static_cast<std::size_t>(offset) * out_cols;
              for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += g[i];
            } else {
              for (int i = 0; i < pr; ++i) {
                const double* g = on->grad.data() + static_cast<std::size_t>(i) * out_cols + offset;
                double* dx = in->grad.data() + static_cast<std::size_t>(i) * pc;
                for (int j = 0; j < pc; ++j) dx[j] += g[j];
              }
            }
          }
          offset += in->shape[axis];
        }
      });
    }
    return out;
  }

  Tensor slice(const Tensor& x, int lo, int hi, int axis) {
    const char* op = axis == 0 ? "slice_rows" : "slice_cols";
    require_rank(x, 2, op);
    const int extent = x.shape()[axis];
    if (lo < 0 || hi > extent || lo >= hi) {
      throw std::invalid_argument(std::string(op) + ": range [" + std::to_string(lo) + "," +
                                  std::to_string(hi) + ") invalid for shape " +
                                  detail::shape_str(x.shape()));
    }
    check_finite(x, op);
    const int r = x.shape()[0], c = x.shape()[1];
    Shape out_shape = axis == 0 ? Shape{hi - lo, c} : Shape{r, hi - lo};
    Tensor out = fresh(out_shape, tracks(x));
    if (axis == 0) {
      std::copy(x.data() + static_cast<std::size_t>(lo) * c,
                x.data() + static_cast<std::size_t>(hi) * c, out.data());
    } else {
      for (int i = 0; i < r; ++i)
        std::copy(x.data() + static_cast<std::size_t>(i) * c + lo,
                  x.data() + static_cast<std::size_t>(i) * c + hi,
                  out.data() + static_cast<std::size_t>(i) * (hi - lo));
    }
    if (out.requires_grad()) {
      auto xn = x.node_, on = out.node_;
      push(on, [xn, on, lo, axis, r, c](const LeafGate& gate) {
        if (!wants(xn, gate)) return;
        if (axis == 0) {
          double* dx = xn->grad.data() + static_cast<std::size_t>(lo) * c;
          for (std::size_t i = 0; i < on->grad.size(); ++i) dx[i] += on->grad[i];
        } else {
          const int w = on->shape[1];
          for (int i = 0; i < r; ++i) {
            const double* g = on->grad.data() + static_cast<std::size_t>(i) * w;
            double* dx = xn->grad.data() + static_cast<std::size_t>(i) * c + lo;
            for (int j = 0; j < w; ++j) dx[j] += g[j];
          }
        }
      });
    }
    return out;
  }

  void run_backward(const Tensor& loss, const LeafGate& gate) {
    if (!loss.defined() || loss.size() != 1) {
      throw std::invalid_argument("backward: loss must be a defined scalar tensor");
    }
    if (records_.empty()) throw std::invalid_argument("backward: tape is empty");
    if (!loss.requires_grad()) {
      throw std::invalid_argument("backward: loss does not depend on any gradient-tracking input");
    }
    // Intermediates are re-zeroed each pass; leaf gradients persist (sum).
    for (Record& r : records_) std::fill(r.out->grad.begin(), r.out->grad.end(), 0.0);
    if (loss.is_leaf()) {
      if (gate(loss.node_.get())) loss.node_->grad[0] += 1.0;
      return;
    }
    loss.node_->grad[0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->pull(gate);
  }
};

// Restores recording state on scope exit.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), prev_(tape.recording()) { tape_.set_recording(false); }
  ~NoGradGuard() { tape_.set_recording(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool prev_;
};

// Central-difference check of d f / d point. f must build a scalar from the
// given tape and tensor. Returns the worst relative error over coordinates:
// |analytic - fd| / (|analytic| + |fd| + 1e-12).
template <typename F>
double grad_check(F&& f, const Tensor& point, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw std::invalid_argument("grad_check: eps must lie in (0, 1e-2]");
  }
  std::vector<double> base(point.data(), point.data() + point.size());

  Tape tape;
  Tensor x = Tensor::from_data(point.shape(), base, /*requires_grad=*/true);
  Tensor y = f(tape, x);
  if (y.size() != 1) throw std::invalid_argument("grad_check: f must produce a scalar");
  tape.backward(y);
  std::vector<double> analytic = x.grad_copy();

  auto eval = [&](const std::vector<double>& data) {
    Tape t;
    t.set_recording(false);
    Tensor xx = Tensor::from_data(point.shape(), data, false);
    return f(t, xx).value();
  };

  double worst = 0.0;
  std::vector<double> probe = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    double fp, fm;
    try {
      probe[i] = base[i] + eps;
      fp = eval(probe);
      probe[i] = base[i] - eps;
      fm = eval(probe);
    } catch (const std::exception& e) {
      throw std::domain_error("grad_check: evaluation failed at coordinate " + std::to_string(i) +
                              ": " + e.what());
    }
    probe[i] = base[i];
    const double fd = (fp - fm) / (2.0 * eps);
    if (!std::isfinite(fd)) {
      throw std::domain_error("grad_check: non-finite finite-difference at coordinate " +
                              std::to_string(i));
    }
    const double err = std::fabs(analytic[i] - fd) / (std::fabs(analytic[i]) + std::fabs(fd) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hgf
