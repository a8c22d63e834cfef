#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace rkshap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A subset of the feature indices {0, ..., dim-1}, stored as a bit mask.
/// Bit c set means feature c is present in the coalition.
class Coalition {
 public:
  static constexpr int kMaxDim = 64;

  Coalition() = default;
  Coalition(std::uint64_t mask, int dim);

  static Coalition empty(int dim) { return Coalition(0, dim); }
  static Coalition full(int dim);
  static Coalition of(int dim, std::initializer_list<int> members);

  std::uint64_t mask() const { return mask_; }
  int dim() const { return dim_; }
  int size() const;
  bool contains(int feature) const { return (mask_ >> feature) & 1U; }
  bool is_empty() const { return mask_ == 0; }
  bool is_full() const { return *this == full(dim_); }

  Coalition complement() const;
  Coalition with(int feature) const;
  Coalition without(int feature) const;
  std::vector<int> members() const;

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  std::uint64_t mask_ = 0;
  int dim_ = 0;
};

/// Per-dimension lengthscales of a product RBF kernel
///   k(x, x') = prod_c exp(-(x_c - x'_c)^2 / (2 l_c^2)),
/// normalised so that k(x, x) = 1.
class KernelSpec {
 public:
  KernelSpec() = default;
  explicit KernelSpec(std::vector<double> lengthscales);

  int dim() const { return static_cast<int>(lengthscales_.size()); }
  double lengthscale(int c) const { return lengthscales_[c]; }
  const std::vector<double>& lengthscales() const { return lengthscales_; }

 private:
  std::vector<double> lengthscales_;
};

struct GramBlock {
  Matrix values;
  Coalition coalition;
};

// Rows of X against rows of X2, product kernel over the features in S.
// Empty S yields the all-ones matrix.
GramBlock kernel_matrix(const Matrix& X, const Matrix& X2,
                        const KernelSpec& spec, Coalition S);

// Per-column median of the nonzero pairwise absolute differences. Inputs
// above 2000 rows are subsampled (seeded) before pairing.
std::vector<double> median_heuristic(const Matrix& X,
                                     std::uint64_t seed = 0);

/// Cholesky factor of (A + ridge*I), with deterministic jitter escalation:
/// on failure, jitter 1e-10 * tr(A)/n is added and doubled up to 8 times.
class PsdFactor {
 public:
  PsdFactor(const Matrix& A, double ridge);

  Matrix solve(const Matrix& B) const;
  Eigen::Index size() const { return llt_.rows(); }
  // Jitter that was needed on top of the ridge (0 if none).
  double jitter() const { return jitter_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

// Solves (A + ridge*I) X = B.
Matrix solve_psd(const Matrix& A, const Matrix& B, double ridge);

}  // namespace rkshap
