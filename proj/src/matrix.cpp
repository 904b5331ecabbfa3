#include "docmt/matrix.hpp"

#include <string>

#include "docmt/errors.hpp"

namespace docmt {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw DimensionError("matrix product [" + std::to_string(a.rows) + "x" + std::to_string(a.cols) + "] x [" +
                         std::to_string(b.rows) + "x" + std::to_string(b.cols) + "]");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double v = a(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
    }
  return out;
}

}  // namespace docmt
