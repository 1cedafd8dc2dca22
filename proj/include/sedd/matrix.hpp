#pragma once

#include <vector>

#include "sedd/errors.hpp"

namespace sedd {

// Minimal dense row-major matrix for the enumeration oracles. Not a linear
// algebra library; just enough structure for generators and kernels.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw ArgumentError("matrix dimensions must be nonnegative");
  }

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

Matrix matmul(const Matrix& x, const Matrix& y);

// Max absolute column sum.
double one_norm(const Matrix& m);

}  // namespace sedd
