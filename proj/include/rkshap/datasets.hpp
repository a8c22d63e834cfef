#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rkshap/kernel.hpp"
#include "rkshap/mode.hpp"
#include "rkshap/shapley.hpp"

namespace rkshap {

struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;  // x1..xd unless read from a file
  std::string generator;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return X.rows(); }
  int dim() const { return static_cast<int>(X.cols()); }
};

std::vector<std::string> default_feature_names(int d);

/// Two-dimensional banana: Z ~ N(0, diag(v, 1)), X1 = Z1,
/// X2 = (Z1^2 - v) / b + Z2, y = (X1^2 - v) / b + X2.
struct BananaConfig {
  Eigen::Index n = 1000;
  double b = 1.0;
  double v = 10.0;
  std::uint64_t seed = 0;
};

Dataset sample_banana(const BananaConfig& cfg);

// Noise-free banana regression target.
Vector banana_truth(const Matrix& X, double b, double v);

// Closed-form attributions of the banana target (2 x n). Baseline is the
// target's mean, 0; grand is the target itself.
AttributionMatrix banana_ground_truth(const Matrix& X, double b, double v, Mode mode);

// Five correlated Gaussian features (unit variances, corr(x4, x5) = 0.9) with
// the noise-free linear target y = X [1, 2, 3, 4, 15]^T.
Dataset sample_correlated_gaussian(Eigen::Index n, std::uint64_t seed);
Matrix correlated_gaussian_covariance();
Vector correlated_gaussian_coefficients();

// Adds sigma_prime * N(0, 1) to one column (0-based); other columns untouched.
Matrix inject_noise(const Matrix& X, int column, double sigma_prime,
                    std::uint64_t seed);

// First `train_fraction` of a seeded permutation goes to training.
struct Split {
  Dataset train;
  Dataset test;
};
Split train_test_split(const Dataset& data, double train_fraction,
                       std::uint64_t seed);

}  // namespace rkshap
