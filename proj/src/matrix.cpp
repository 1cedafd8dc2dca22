#include "sedd/matrix.hpp"

#include <cmath>

namespace sedd {

Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) throw ArgumentError("matmul dimension mismatch");
  Matrix out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i) {
    const double* xr = x.a.data() + static_cast<size_t>(i) * x.cols;
    double* or_ = out.a.data() + static_cast<size_t>(i) * y.cols;
    for (int k = 0; k < x.cols; ++k) {
      const double v = xr[k];
      if (v == 0.0) continue;
      const double* yr = y.a.data() + static_cast<size_t>(k) * y.cols;
      for (int j = 0; j < y.cols; ++j) or_[j] += v * yr[j];
    }
  }
  return out;
}

double one_norm(const Matrix& m) {
  double best = 0.0;
  for (int j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += std::abs(m(i, j));
    best = std::max(best, s);
  }
  return best;
}

}  // namespace sedd
