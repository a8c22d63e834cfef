#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "rkshap/fitted_model.hpp"
#include "rkshap/kernel.hpp"
#include "rkshap/mode.hpp"

namespace rkshap {

inline constexpr double kDefaultEta = 1e-3;

/// Representer coordinates of the value functional nu_{x', S} for every query
/// x'_j: column j holds <psi(x_i), nu_{x'_j, S}> over training points x_i, so
/// that alpha^T column j estimates nu_{x'_j, S}(f).
struct ValueMatrix {
  Matrix values;  // n_train x n_query
  Coalition coalition;
  Mode mode = Mode::interventional;
  double eta = 0.0;  // conditional-embedding regulariser, observational only
};

/// Per-coalition factorisations of (K_S + n*eta*I), shared by all value
/// matrices of one attribution run. Safe for concurrent population: a factor
/// is inserted at most once, concurrent duplicates are discarded.
class CmoFactorCache {
 public:
  std::shared_ptr<const PsdFactor> get_or_compute(Coalition S,
                                                  const Matrix& gram_s,
                                                  double ridge);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::shared_ptr<const PsdFactor>> factors_;
};

// entry(i, j) = k_S(x_i, x'_j) * mean_l k_{S^c}(x_i, x_l)
ValueMatrix interventional_value_matrix(const Matrix& X, const Matrix& Xq,
                                        const KernelSpec& spec, Coalition S);

// values = K_{x_S x'_S} (.) [K_{S^c} (K_S + n*eta*I)^{-1} K_{x_S x'_S}].
// S = D gives K_{x x'}; S = {} gives the interventional empty-coalition
// matrix, so the baseline is the mean training prediction in both modes.
ValueMatrix observational_value_matrix(const Matrix& X, const Matrix& Xq,
                                       const KernelSpec& spec, Coalition S,
                                       double eta,
                                       CmoFactorCache* cache = nullptr);

Vector value_of(const FittedModel& model, const ValueMatrix& vm);

// Value rows for several dual-weight vectors at once (columns of `alphas`).
// Result is k x n_query.
Matrix value_rows(const Matrix& alphas, const ValueMatrix& vm);

/// Value-matrix factory bound to one training set, kernel and mode.
class ValueFunction {
 public:
  ValueFunction(Matrix x_train, KernelSpec spec, Mode mode,
                double eta = kDefaultEta);

  ValueMatrix matrix(const Matrix& Xq, Coalition S) const;

  Mode mode() const { return mode_; }
  double eta() const { return eta_; }
  const Matrix& x_train() const { return x_train_; }
  const KernelSpec& spec() const { return spec_; }

 private:
  Matrix x_train_;
  KernelSpec spec_;
  Mode mode_;
  double eta_;
  std::shared_ptr<CmoFactorCache> cache_;
};

}  // namespace rkshap
