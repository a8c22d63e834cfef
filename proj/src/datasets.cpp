#include "rkshap/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "rkshap/errors.hpp"

namespace rkshap {

std::vector<std::string> default_feature_names(int d) {
  std::vector<std::string> names;
  names.reserve(d);
  for (int c = 1; c <= d; ++c) names.push_back(fmt::format("x{}", c));
  return names;
}

Dataset sample_banana(const BananaConfig& cfg) {
  if (cfg.n < 2 || !(cfg.b > 0.0) || !(cfg.v > 0.0)) {
    throw InputError(fmt::format("banana needs n >= 2, b > 0, v > 0 (got {}, {}, {})",
                                 cfg.n, cfg.b, cfg.v));
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  const double sd1 = std::sqrt(cfg.v);
  Dataset data;
  data.X.resize(cfg.n, 2);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    const double z1 = sd1 * normal(rng);
    const double z2 = normal(rng);
    data.X(i, 0) = z1;
    data.X(i, 1) = (z1 * z1 - cfg.v) / cfg.b + z2;
  }
  data.y = banana_truth(data.X, cfg.b, cfg.v);
  data.feature_names = default_feature_names(2);
  data.generator = fmt::format("banana(b={}, v={})", cfg.b, cfg.v);
  data.seed = cfg.seed;
  return data;
}

Vector banana_truth(const Matrix& X, double b, double v) {
  if (X.cols() != 2) throw InputError("banana data has exactly two columns");
  return ((X.col(0).array().square() - v) / b + X.col(1).array()).matrix();
}

AttributionMatrix banana_ground_truth(const Matrix& X, double b, double v,
                                      Mode mode) {
  if (X.cols() != 2) throw InputError("banana data has exactly two columns");
  const Eigen::ArrayXd curve = (X.col(0).array().square() - v) / b;
  const Eigen::ArrayXd x2 = X.col(1).array();
  AttributionMatrix truth;
  truth.mode = mode;
  truth.values.resize(2, X.rows());
  if (mode == Mode::interventional) {
    truth.values.row(0) = curve.matrix().transpose();
    truth.values.row(1) = x2.matrix().transpose();
  } else {
    truth.values.row(0) = (0.5 * (3.0 * curve - x2)).matrix().transpose();
    truth.values.row(1) = (0.5 * (3.0 * x2 - curve)).matrix().transpose();
  }
  truth.baseline = Vector::Zero(X.rows());
  truth.grand = (curve + x2).matrix();
  return truth;
}

Matrix correlated_gaussian_covariance() {
  Matrix sigma = Matrix::Identity(5, 5);
  sigma(3, 4) = sigma(4, 3) = 0.9;
  return sigma;
}

Vector correlated_gaussian_coefficients() {
  Vector beta(5);
  beta << 1, 2, 3, 4, 15;
  return beta;
}

Dataset sample_correlated_gaussian(Eigen::Index n, std::uint64_t seed) {
  if (n < 2) throw InputError(fmt::format("need n >= 2, got {}", n));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(correlated_gaussian_covariance());
  const Matrix root = eig.eigenvectors() *
                      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      eig.eigenvectors().transpose();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix Z(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 5; ++c) Z(i, c) = normal(rng);
  }
  Dataset data;
  data.X = Z * root;  // root is symmetric
  data.y = data.X * correlated_gaussian_coefficients();
  data.feature_names = default_feature_names(5);
  data.generator = "correlated-gaussian";
  data.seed = seed;
  return data;
}

Matrix inject_noise(const Matrix& X, int column, double sigma_prime,
                    std::uint64_t seed) {
  if (column < 0 || column >= X.cols()) {
    throw InputError(fmt::format("column {} outside [0, {})", column, X.cols()));
  }
  if (!(sigma_prime >= 0.0)) {
    throw InputError(fmt::format("noise scale must be nonnegative, got {}", sigma_prime));
  }
  Matrix out = X;
  if (sigma_prime == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i, column) += sigma_prime * normal(rng);
  return out;
}

Split train_test_split(const Dataset& data, double train_fraction,
                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError(fmt::format("train fraction {} outside (0, 1)", train_fraction));
  }
  const Eigen::Index n = data.size();
  const auto n_train = static_cast<Eigen::Index>(std::llround(train_fraction * n));
  if (n_train < 1 || n_train >= n) {
    throw InputError(fmt::format("split of {} rows leaves an empty side", n));
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&](Eigen::Index begin, Eigen::Index end) {
    Dataset part;
    part.X.resize(end - begin, data.dim());
    part.y.resize(end - begin);
    for (Eigen::Index i = begin; i < end; ++i) {
      part.X.row(i - begin) = data.X.row(order[i]);
      part.y(i - begin) = data.y(order[i]);
    }
    part.feature_names = data.feature_names;
    part.generator = data.generator;
    part.seed = data.seed;
    return part;
  };
  return Split{take(0, n_train), take(n_train, n)};
}

}  // namespace rkshap
