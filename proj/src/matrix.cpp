#include "kgp/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace kgp {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix Matrix::xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  if (rows + cols == 0) return m;
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : m.data_) x = dist(rng);
  return m;
}

}  // namespace kgp
