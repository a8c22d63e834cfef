#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rkshap/kernel.hpp"

namespace rkshap::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                            double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
  }
  return M;
}

inline Vector random_vector(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  return random_matrix(n, 1, seed, scale).col(0);
}

// Scalar RBF product, written out independently of kernel_matrix.
inline double scalar_kernel(const Matrix& X, Eigen::Index i, const Matrix& X2,
                            Eigen::Index j, const std::vector<double>& scales,
                            std::uint64_t mask) {
  double value = 1.0;
  for (std::size_t c = 0; c < scales.size(); ++c) {
    if (!((mask >> c) & 1U)) continue;
    const double diff = X(i, c) - X2(j, c);
    value *= std::exp(-diff * diff / (2.0 * scales[c] * scales[c]));
  }
  return value;
}

}  // namespace rkshap::test
