#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>

#include "rkshap/fitted_model.hpp"
#include "rkshap/kernel.hpp"
#include "rkshap/shapley.hpp"

namespace rkshap {

inline constexpr int kDefaultMonteCarloCount = 200;

using Deadline = std::optional<std::chrono::steady_clock::time_point>;

// Monte-Carlo imputation estimate of E[f({xq_S, X_{S^c}})] over background
// rows. `batches` <= 0 or >= background rows uses the whole background
// (deterministic); otherwise that many rows are drawn with replacement.
double mc_interventional_value(const FittedModel& model, const Vector& xq,
                               Coalition S, const Matrix& background,
                               std::mt19937_64& rng, int batches);

// Model-agnostic interventional attribution: every coalition value is the
// full-background imputation average of model predictions.
AttributionMatrix mc_interventional_attribution(const FittedModel& model,
                                                const Matrix& Xq,
                                                const DesignPolicy& policy,
                                                const Matrix& background,
                                                int jobs = 1,
                                                Deadline deadline = {});

/// Empirical multivariate Gaussian with a small diagonal inflation.
struct GaussianFit {
  Vector mean;
  Matrix cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

GaussianFit fit_gaussian(const Matrix& X);

/// Conditional law of X_{S^c} given X_S under a GaussianFit, precomputed for
/// one coalition so many conditioning points can share the factorisations.
class GaussianConditional {
 public:
  GaussianConditional(const GaussianFit& fit, Coalition S);

  Vector mean(const Vector& x_present) const;
  const Matrix& covariance() const { return cov_; }
  // count x |S^c|
  Matrix sample(const Vector& x_present, int count, std::mt19937_64& rng) const;

  const std::vector<int>& present() const { return present_; }
  const std::vector<int>& absent() const { return absent_; }

 private:
  std::vector<int> present_;
  std::vector<int> absent_;
  Vector mean_present_;
  Vector mean_absent_;
  Matrix gain_;    // Sigma_{cS} Sigma_{SS}^{-1}
  Matrix cov_;     // Schur complement, symmetrised and eigenvalue-clipped
  Matrix factor_;  // cov_ = factor_ factor_^T
};

Matrix gaussian_conditional_sample(const GaussianFit& fit, Coalition S,
                                   const Vector& x_present, int count,
                                   std::mt19937_64& rng);

// Observational attribution from Gaussian-conditional imputation. Each
// (query, coalition) pair draws from its own RNG substream derived from
// (seed, query index, coalition mask).
AttributionMatrix gshap_osv(const FittedModel& model, const Matrix& Xq,
                            const DesignPolicy& policy, const GaussianFit& fit,
                            int mc_count, std::uint64_t seed, int jobs = 1,
                            Deadline deadline = {});

}  // namespace rkshap
