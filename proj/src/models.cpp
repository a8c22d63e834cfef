#include "rkshap/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "rkshap/errors.hpp"

namespace rkshap {

namespace {

void check_training_set(const Matrix& X, const Vector& y, const KernelSpec& spec) {
  if (X.rows() < 2) throw InputError("fitting needs at least two rows");
  if (X.rows() != y.size()) {
    throw InputError(fmt::format("{} feature rows but {} labels", X.rows(), y.size()));
  }
  if (X.cols() != spec.dim()) {
    throw InputError(
        fmt::format("data has {} features, kernel {}", X.cols(), spec.dim()));
  }
  if (!y.allFinite()) throw InputError("labels contain non-finite values");
}

void check_feature(int feature, int d) {
  if (feature < 0 || feature >= d) {
    throw InputError(fmt::format("feature {} outside [0, {})", feature, d));
  }
}

double binomial(int n, int k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                             std::lgamma(n - k + 1.0)));
}

// sum over masks of weight * (V(S u A) - V(S)), train on train.
Matrix weighted_marginals(const ValueFunction& vf, int feature,
                          const std::map<std::uint64_t, double>& weights) {
  const Matrix& X = vf.x_train();
  const int d = vf.spec().dim();
  Matrix out = Matrix::Zero(X.rows(), X.rows());
  for (const auto& [mask, weight] : weights) {
    const Coalition S(mask, d);
    out += weight * (vf.matrix(X, S.with(feature)).values - vf.matrix(X, S).values);
  }
  return out;
}

}  // namespace

FittedModel fit_krr(const Matrix& X, const Vector& y, const KernelSpec& spec,
                    double lambda_f) {
  check_training_set(X, y, spec);
  if (!(lambda_f > 0.0)) {
    throw InputError(fmt::format("lambda_f must be positive, got {}", lambda_f));
  }
  const Matrix K = kernel_matrix(X, X, spec, Coalition::full(spec.dim())).values;
  FittedModel model;
  model.alpha = solve_psd(K, y, lambda_f);
  model.x_train = X;
  model.spec = spec;
  model.lambda_f = lambda_f;
  return model;
}

Vector predict(const FittedModel& model, const Matrix& Xq) {
  if (Xq.cols() != model.dim()) {
    throw InputError(
        fmt::format("queries have {} features, model {}", Xq.cols(), model.dim()));
  }
  // Row blocks keep the Gram temporaries small for large query batches.
  constexpr Eigen::Index kBlock = 256;
  const Coalition full = Coalition::full(model.dim());
  Vector out(Xq.rows());
  for (Eigen::Index start = 0; start < Xq.rows(); start += kBlock) {
    const Eigen::Index len = std::min(kBlock, Xq.rows() - start);
    out.segment(start, len) =
        kernel_matrix(Xq.middleRows(start, len), model.x_train, model.spec, full).values *
        model.alpha;
  }
  return out;
}

double rkhs_norm(const FittedModel& model) {
  const Matrix K = kernel_matrix(model.x_train, model.x_train, model.spec,
                                 Coalition::full(model.dim()))
                       .values;
  return std::sqrt(std::max(0.0, model.alpha.dot(K * model.alpha)));
}

GammaMatrix gamma_matrix(const Matrix& X, const KernelSpec& spec, int feature,
                         int samples, Mode mode, double eta, std::uint64_t seed) {
  const int d = spec.dim();
  check_feature(feature, d);
  if (samples < 1) {
    throw InputError(fmt::format("need at least one coalition sample, got {}", samples));
  }
  std::vector<int> others;
  for (int c = 0; c < d; ++c) {
    if (c != feature) others.push_back(c);
  }
  // Size uniform on {0..d-1}, then a uniform subset of the other features.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size_dist(0, d - 1);
  std::map<std::uint64_t, double> weights;
  std::vector<int> pool;
  for (int j = 0; j < samples; ++j) {
    const int s = size_dist(rng);
    pool = others;
    std::uint64_t mask = 0;
    for (int k = 0; k < s; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(pool.size()) - 1);
      std::swap(pool[k], pool[pick(rng)]);
      mask |= std::uint64_t{1} << pool[k];
    }
    weights[mask] += 1.0 / samples;
  }
  ValueFunction vf(X, spec, mode, eta);
  return GammaMatrix{weighted_marginals(vf, feature, weights), feature, mode,
                     samples, seed};
}

GammaMatrix gamma_matrix_exhaustive(const Matrix& X, const KernelSpec& spec,
                                    int feature, Mode mode, double eta) {
  const int d = spec.dim();
  check_feature(feature, d);
  if (d > 20) {
    throw CapacityError(
        fmt::format("exhaustive Shapley functional capped at d = 20, got {}", d));
  }
  const Coalition others = Coalition::of(d, {feature}).complement();
  std::map<std::uint64_t, double> weights;
  // Enumerate submasks of `others`.
  for (std::uint64_t mask = others.mask();; mask = (mask - 1) & others.mask()) {
    const int s = std::popcount(mask);
    weights[mask] = 1.0 / (d * binomial(d - 1, s));
    if (mask == 0) break;
  }
  ValueFunction vf(X, spec, mode, eta);
  return GammaMatrix{weighted_marginals(vf, feature, weights), feature, mode, 0, 0};
}

GammaMatrix build_gamma(const Matrix& X, const KernelSpec& spec, int feature,
                        Mode mode, double eta, std::uint64_t seed, int samples) {
  if (spec.dim() <= kExhaustiveGammaDim) {
    return gamma_matrix_exhaustive(X, spec, feature, mode, eta);
  }
  return gamma_matrix(X, spec, feature, samples, mode, eta, seed);
}

FittedModel fit_shapley_reg_krr(const Matrix& X, const Vector& y,
                                const KernelSpec& spec, double lambda_f,
                                double lambda_s, const GammaMatrix& gamma) {
  check_training_set(X, y, spec);
  if (!(lambda_f > 0.0)) {
    throw InputError(fmt::format("lambda_f must be positive, got {}", lambda_f));
  }
  if (!(lambda_s >= 0.0)) {
    throw InputError(fmt::format("lambda_s must be nonnegative, got {}", lambda_s));
  }
  const Eigen::Index n = X.rows();
  if (gamma.values.rows() != n || gamma.values.cols() != n) {
    throw InputError(fmt::format("Gamma is {}x{}, training set has {} rows",
                                 gamma.values.rows(), gamma.values.cols(), n));
  }
  const Matrix K = kernel_matrix(X, X, spec, Coalition::full(spec.dim())).values;
  Matrix system = K * K + lambda_f * K;
  if (lambda_s > 0.0) {
    system.noalias() +=
        (lambda_s / static_cast<double>(n)) * gamma.values * gamma.values.transpose();
  }
  system = 0.5 * (system + system.transpose()).eval();

  FittedModel model;
  model.alpha = solve_psd(system, K * y, 0.0);
  model.x_train = X;
  model.spec = spec;
  model.lambda_f = lambda_f;
  model.regulariser = RegulariserInfo{gamma.feature, lambda_s, gamma.samples,
                                      gamma.mode, gamma.seed};
  return model;
}

}  // namespace rkshap
