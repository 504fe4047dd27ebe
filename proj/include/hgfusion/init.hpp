#pragma once

#include <cmath>

#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

// Uniform parameter init in [-bound, bound]; draw order is flat row-major,
// so identical seeds give identical parameters.
inline void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
}

// Variance-preserving bound for uniform(-b, b): var = b^2/3, so b = sqrt(3/fan)
// keeps fan_in * var(w) = 1; layers feeding a ReLU get the doubled-gain
// sqrt(6/fan) to compensate for the halved activation variance.
inline double uniform_bound(int fan_in, bool relu_follows = false) {
  return std::sqrt((relu_follows ? 6.0 : 3.0) / static_cast<double>(fan_in));
}

}  // namespace hgf
