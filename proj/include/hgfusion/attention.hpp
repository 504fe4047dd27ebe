#pragma once

// Multi-head self-attention over one modality's timestep rows.
// Per head i: softmax(x Wq_i (x Wk_i)^T * scale) (x Wv_i); heads are
// concatenated and projected by Wo. The score scale defaults to
// 1/sqrt(dim) over the full model width; per_head_scale switches to the
// more common 1/sqrt(dim/heads).

#include <vector>

#include "hgfusion/init.hpp"
#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

struct MultiHeadSelfAttention {
  int dim = 0;
  int heads = 0;
  bool per_head_scale = false;
  std::vector<Tensor> wq, wk, wv;  // each [dim, dim/heads]
  Tensor wo;                       // [dim, dim]

  MultiHeadSelfAttention() = default;

  MultiHeadSelfAttention(int dim_, int heads_, bool per_head_scale_, Rng& rng)
      : dim(dim_), heads(heads_), per_head_scale(per_head_scale_) {
    if (heads < 1 || dim % heads != 0) {
      throw std::invalid_argument("MultiHeadSelfAttention: dim " + std::to_string(dim) +
                                  " not divisible by heads " + std::to_string(heads));
    }
    const int dh = dim / heads;
    const double k = uniform_bound(dim);
    for (int h = 0; h < heads; ++h) {
      Tensor q = Tensor::zeros({dim, dh}, true);
      Tensor kk = Tensor::zeros({dim, dh}, true);
      Tensor v = Tensor::zeros({dim, dh}, true);
      fill_uniform(q, rng, k);
      fill_uniform(kk, rng, k);
      fill_uniform(v, rng, k);
      wq.push_back(q);
      wk.push_back(kk);
      wv.push_back(v);
    }
    wo = Tensor::zeros({dim, dim}, true);
    fill_uniform(wo, rng, k);
  }

  double score_scale() const {
    return 1.0 / std::sqrt(static_cast<double>(per_head_scale ? dim / heads : dim));
  }

  // x: [T, dim] -> [T, dim].
  Tensor forward(Tape& tape, const Tensor& x) const {
    if (x.rank() != 2 || x.shape()[1] != dim) {
      throw std::invalid_argument("MultiHeadSelfAttention: expected [T," + std::to_string(dim) +
                                  "], got " + detail::shape_str(x.shape()));
    }
    const double scale = score_scale();
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Tensor q = tape.matmul(x, wq[h]);
      Tensor k = tape.matmul(x, wk[h]);
      Tensor v = tape.matmul(x, wv[h]);
      Tensor scores = tape.scale(tape.matmul(q, tape.transpose(k)), scale);
      Tensor weights = tape.softmax_rows(scores);
      head_outputs.push_back(tape.matmul(weights, v));
    }
    return tape.matmul(tape.concat_cols(head_outputs), wo);
  }
};

}  // namespace hgf
