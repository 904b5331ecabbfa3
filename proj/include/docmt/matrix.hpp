#pragma once

#include <cstddef>
#include <vector>

namespace docmt {

// Plain row-major matrix for traces and attribution; no autograd.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

// a · b; throws DimensionError on mismatch.
Matrix multiply(const Matrix& a, const Matrix& b);

}  // namespace docmt
