#pragma once

#include <cstddef>
#include <vector>

namespace drowsy {

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return a.data() + static_cast<std::size_t>(i) * cols;
  }
  std::size_t size() const { return a.size(); }
};

// Dense row-major 3-way array, d0 x d1 x d2.
struct Tensor3 {
  int d0 = 0;
  int d1 = 0;
  int d2 = 0;
  std::vector<double> a;

  Tensor3() = default;
  Tensor3(int n0, int n1, int n2, double fill = 0.0)
      : d0(n0),
        d1(n1),
        d2(n2),
        a(static_cast<std::size_t>(n0) * n1 * n2, fill) {}

  double& operator()(int i, int j, int k) {
    return a[(static_cast<std::size_t>(i) * d1 + j) * d2 + k];
  }
  double operator()(int i, int j, int k) const {
    return a[(static_cast<std::size_t>(i) * d1 + j) * d2 + k];
  }
  double* row(int i, int j) {
    return a.data() + (static_cast<std::size_t>(i) * d1 + j) * d2;
  }
  const double* row(int i, int j) const {
    return a.data() + (static_cast<std::size_t>(i) * d1 + j) * d2;
  }
  std::size_t size() const { return a.size(); }
};

}  // namespace drowsy
