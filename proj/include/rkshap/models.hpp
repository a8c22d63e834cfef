#pragma once

#include <cstdint>

#include "rkshap/embeddings.hpp"
#include "rkshap/fitted_model.hpp"
#include "rkshap/kernel.hpp"
#include "rkshap/mode.hpp"

namespace rkshap {

inline constexpr int kDefaultGammaSamples = 64;
inline constexpr int kExhaustiveGammaDim = 6;

// Kernel ridge regression: alpha = (K + lambda_f I)^{-1} y.
FittedModel fit_krr(const Matrix& X, const Vector& y, const KernelSpec& spec,
                    double lambda_f);

Vector predict(const FittedModel& model, const Matrix& Xq);

// sqrt(alpha^T K alpha)
double rkhs_norm(const FittedModel& model);

/// Representer coordinates of the Shapley functional of one feature at every
/// training point: alpha^T column j estimates phi_{x_j, feature}(f).
struct GammaMatrix {
  Matrix values;  // n x n
  int feature = 0;
  Mode mode = Mode::interventional;
  int samples = 0;  // 0 for the exhaustive average
  std::uint64_t seed = 0;
};

// Monte-Carlo average over J coalitions S ~ p(S) = 1 / (d C(d-1, |S|)) drawn
// from the features other than `feature` of (V(S u {feature}) - V(S)).
GammaMatrix gamma_matrix(const Matrix& X, const KernelSpec& spec, int feature,
                         int samples, Mode mode, double eta, std::uint64_t seed);

// The same average taken exactly over all 2^(d-1) coalitions.
GammaMatrix gamma_matrix_exhaustive(const Matrix& X, const KernelSpec& spec,
                                    int feature, Mode mode, double eta);

// Exhaustive for d <= 6, sampled otherwise.
GammaMatrix build_gamma(const Matrix& X, const KernelSpec& spec, int feature,
                        Mode mode, double eta, std::uint64_t seed,
                        int samples = kDefaultGammaSamples);

// alpha = (K^2 + lambda_f K + (lambda_s / n) Gamma Gamma^T)^{-1} K y
FittedModel fit_shapley_reg_krr(const Matrix& X, const Vector& y,
                                const KernelSpec& spec, double lambda_f,
                                double lambda_s, const GammaMatrix& gamma);

}  // namespace rkshap
