#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rkshap/embeddings.hpp"
#include "rkshap/fitted_model.hpp"
#include "rkshap/kernel.hpp"
#include "rkshap/mode.hpp"

namespace rkshap {

inline constexpr int kMaxExhaustiveDim = 20;
inline constexpr int kAutoExhaustiveDim = 12;
inline constexpr int kAutoSampleCount = 2048;

/// Proper, nonempty coalitions with their least-squares weights. The empty
/// and full coalitions never appear: their constraints are imposed exactly
/// by the solver.
struct CoalitionDesign {
  std::vector<Coalition> coalitions;
  std::vector<double> weights;
  int dim = 0;
  bool exhaustive = false;

  std::size_t size() const { return coalitions.size(); }
};

/// Shapley values for `dim` features at n query points (column j is query j).
struct AttributionMatrix {
  Matrix values;  // dim x n
  Mode mode = Mode::interventional;
  Vector baseline;  // nu(empty) per query
  Vector grand;     // nu(D) per query
};

// (d-1) / (C(d,s) s (d-s)) for 1 <= s <= d-1.
double shapley_kernel_weight(int d, int s);

// All 2^d - 2 proper nonempty coalitions in ascending mask order.
CoalitionDesign enumerate_coalitions(int d);

// `count` i.i.d. draws with probability proportional to the kernel weight:
// a size s is drawn from C(d,s) w(d,s), then a uniform subset of that size.
// Duplicates are merged; weights are multiplicities rescaled so the expected
// normal matrix matches the exhaustive one.
CoalitionDesign sample_coalitions(int d, int count, std::mt19937_64& rng);

// Constrained weighted least squares: beta_0 = baseline and
// sum(beta) = grand - baseline, enforced by eliminating the last feature.
// V is |design| x n with row r holding nu(design.coalitions[r]).
AttributionMatrix solve_shapley_wls(const CoalitionDesign& design,
                                    const Matrix& V, const Vector& baseline,
                                    const Vector& grand,
                                    Mode mode = Mode::interventional);

// Direct combinatorial Shapley value of `feature`. `game` has 2^d entries,
// game[mask] = nu(S) for the coalition with that bit mask.
double exact_shapley(std::span<const double> game, int d, int feature);

struct DesignPolicy {
  enum class Kind { automatic, exhaustive, sampled };
  Kind kind = Kind::automatic;
  int count = 0;  // sampled only; 0 means the default
  std::uint64_t seed = 0;

  static DesignPolicy exhaustive() { return {Kind::exhaustive, 0, 0}; }
  static DesignPolicy sampled(int count, std::uint64_t seed) {
    return {Kind::sampled, count, seed};
  }
  // "exhaustive", "auto", "sampled", or "sampled:N"
  static DesignPolicy parse(const std::string& text, std::uint64_t seed);

  CoalitionDesign build(int d) const;
  std::string describe() const;
};

// End-to-end attribution of one model at the query rows Xq.
AttributionMatrix attribute(const FittedModel& model, const Matrix& Xq,
                            Mode mode, const DesignPolicy& policy,
                            double eta = kDefaultEta, int jobs = 1);

// Attributions for several models that share the training inputs and kernel
// of `value_function`; `alphas` holds one dual-weight vector per column. Each
// coalition's value matrix is computed once and reused across models.
std::vector<AttributionMatrix> attribute_many(const ValueFunction& value_function,
                                              const Matrix& alphas,
                                              const Matrix& Xq,
                                              const DesignPolicy& policy,
                                              int jobs = 1);

}  // namespace rkshap
