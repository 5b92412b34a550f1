#pragma once

#include <cstddef>
#include <vector>

#include "cnf/errors.hpp"

namespace cnf {

/// Dense 4-axis tensor, batch x channel x height(freq) x width(time),
/// row-major. Real is float in production; double instantiations exist for
/// numerical verification.
template <class Real>
struct TensorT {
  int b = 0, c = 0, h = 0, w = 0;
  std::vector<Real> data;

  TensorT() = default;
  TensorT(int b_, int c_, int h_, int w_, Real fill = Real(0))
      : b(b_), c(c_), h(h_), w(w_), data(size_t(b_) * c_ * h_ * w_, fill) {}

  size_t size() const { return data.size(); }
  size_t plane() const { return size_t(h) * w; }

  Real& at(int bi, int ci, int y, int x) {
    return data[((size_t(bi) * c + ci) * h + y) * w + x];
  }
  Real at(int bi, int ci, int y, int x) const {
    return data[((size_t(bi) * c + ci) * h + y) * w + x];
  }

  Real* plane_ptr(int bi, int ci) { return data.data() + (size_t(bi) * c + ci) * plane(); }
  const Real* plane_ptr(int bi, int ci) const {
    return data.data() + (size_t(bi) * c + ci) * plane();
  }

  bool same_shape(const TensorT& o) const {
    return b == o.b && c == o.c && h == o.h && w == o.w;
  }
};

using Tensor = TensorT<float>;

}  // namespace cnf
