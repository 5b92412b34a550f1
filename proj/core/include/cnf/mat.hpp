#pragma once

#include <cstddef>
#include <vector>

#include "cnf/errors.hpp"

namespace cnf {

/// Dense row-major double matrix. Deliberately minimal: storage plus bounds
/// bookkeeping, no linear algebra.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(size_t(r) * size_t(c), fill) {}

  double& at(int r, int c) { return v[size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[size_t(r) * cols + c]; }

  double* row(int r) { return v.data() + size_t(r) * cols; }
  const double* row(int r) const { return v.data() + size_t(r) * cols; }

  bool empty() const { return rows == 0 || cols == 0; }

  /// New matrix holding the given rows (in the given order).
  Mat take_rows(const std::vector<int>& idx) const {
    Mat out(int(idx.size()), cols);
    for (size_t i = 0; i < idx.size(); ++i) {
      const double* src = row(idx[i]);
      double* dst = out.row(int(i));
      for (int c = 0; c < cols; ++c) dst[c] = src[c];
    }
    return out;
  }
};

}  // namespace cnf
