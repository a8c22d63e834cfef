#include "rkshap/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <fmt/format.h>

#include "rkshap/errors.hpp"

namespace rkshap {

namespace {

constexpr Eigen::Index kMedianSubsample = 2000;
constexpr int kJitterDoublings = 8;

void require_finite(const Matrix& X, const char* name) {
  if (!X.allFinite()) {
    throw InputError(fmt::format("{} contains non-finite feature values", name));
  }
}

}  // namespace

Coalition::Coalition(std::uint64_t mask, int dim) : mask_(mask), dim_(dim) {
  if (dim < 0 || dim > kMaxDim) {
    throw InputError(fmt::format("coalition dimension {} outside [0, {}]", dim,
                                 kMaxDim));
  }
  if (dim < kMaxDim && (mask >> dim) != 0) {
    throw InputError(
        fmt::format("coalition mask {:#x} has bits above dimension {}", mask,
                    dim));
  }
}

Coalition Coalition::full(int dim) {
  const std::uint64_t mask =
      dim == kMaxDim ? ~std::uint64_t{0} : (std::uint64_t{1} << dim) - 1;
  return Coalition(mask, dim);
}

Coalition Coalition::of(int dim, std::initializer_list<int> members) {
  std::uint64_t mask = 0;
  for (int c : members) {
    if (c < 0 || c >= dim) {
      throw InputError(fmt::format("feature {} outside [0, {})", c, dim));
    }
    mask |= std::uint64_t{1} << c;
  }
  return Coalition(mask, dim);
}

int Coalition::size() const { return std::popcount(mask_); }

Coalition Coalition::complement() const {
  return Coalition(full(dim_).mask_ & ~mask_, dim_);
}

Coalition Coalition::with(int feature) const {
  return Coalition(mask_ | (std::uint64_t{1} << feature), dim_);
}

Coalition Coalition::without(int feature) const {
  return Coalition(mask_ & ~(std::uint64_t{1} << feature), dim_);
}

std::vector<int> Coalition::members() const {
  std::vector<int> out;
  out.reserve(size());
  for (int c = 0; c < dim_; ++c) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

KernelSpec::KernelSpec(std::vector<double> lengthscales)
    : lengthscales_(std::move(lengthscales)) {
  if (lengthscales_.empty()) {
    throw InputError("kernel needs at least one lengthscale");
  }
  for (std::size_t c = 0; c < lengthscales_.size(); ++c) {
    const double l = lengthscales_[c];
    if (!std::isfinite(l) || l <= 0.0) {
      throw InputError(
          fmt::format("lengthscale {} of feature {} must be positive and finite",
                      l, c));
    }
  }
}

GramBlock kernel_matrix(const Matrix& X, const Matrix& X2,
                        const KernelSpec& spec, Coalition S) {
  if (X.cols() != spec.dim() || X2.cols() != spec.dim()) {
    throw InputError(fmt::format(
        "kernel expects {} columns, got {} and {}", spec.dim(), X.cols(),
        X2.cols()));
  }
  if (S.dim() != spec.dim()) {
    throw InputError(fmt::format("coalition over {} features, kernel over {}",
                                 S.dim(), spec.dim()));
  }
  require_finite(X, "X");
  require_finite(X2, "X2");

  // Accumulate the exponent, then exponentiate once. Every entry is computed
  // independently of the others.
  Matrix exponent = Matrix::Zero(X.rows(), X2.rows());
  for (int c : S.members()) {
    const double scale = 1.0 / (2.0 * spec.lengthscale(c) * spec.lengthscale(c));
    const auto xc = X.col(c).array();
    for (Eigen::Index j = 0; j < X2.rows(); ++j) {
      exponent.col(j).array() += (xc - X2(j, c)).square() * scale;
    }
  }
  return GramBlock{(-exponent.array()).exp().matrix(), S};
}

std::vector<double> median_heuristic(const Matrix& X, std::uint64_t seed) {
  if (X.rows() < 2) {
    throw InputError("median heuristic needs at least two rows");
  }
  std::vector<Eigen::Index> rows(X.rows());
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (X.rows() > kMedianSubsample) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(kMedianSubsample);
    std::sort(rows.begin(), rows.end());
  }

  std::vector<double> result(X.cols());
  std::vector<double> diffs;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    diffs.clear();
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const double d = std::abs(X(rows[a], c) - X(rows[b], c));
        if (d > 0.0) diffs.push_back(d);
      }
    }
    if (diffs.empty()) {
      throw InputError(fmt::format(
          "column x{} is constant; no valid lengthscale", c + 1));
    }
    // Even count: mean of the two middle values.
    const std::size_t mid = diffs.size() / 2;
    std::nth_element(diffs.begin(), diffs.begin() + mid, diffs.end());
    double median = diffs[mid];
    if (diffs.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(diffs.begin(),
                                                 diffs.begin() + mid));
    }
    result[c] = median;
  }
  return result;
}

PsdFactor::PsdFactor(const Matrix& A, double ridge) {
  if (A.rows() != A.cols()) {
    throw InputError(
        fmt::format("expected a square matrix, got {}x{}", A.rows(), A.cols()));
  }
  if (!(ridge >= 0.0)) {
    throw InputError(fmt::format("ridge must be nonnegative, got {}", ridge));
  }
  const Eigen::Index n = A.rows();
  Matrix system = A;
  system.diagonal().array() += ridge;
  llt_.compute(system);
  if (llt_.info() == Eigen::Success) return;

  const double base = n > 0 ? 1e-10 * A.trace() / static_cast<double>(n) : 0.0;
  double jitter = base;
  for (int attempt = 0; attempt <= kJitterDoublings; ++attempt) {
    Matrix jittered = system;
    jittered.diagonal().array() += jitter;
    llt_.compute(jittered);
    if (llt_.info() == Eigen::Success && jitter > 0.0) {
      jitter_ = jitter;
      return;
    }
    if (attempt < kJitterDoublings) jitter *= 2.0;
  }
  throw SingularSystemError(
      fmt::format("positive-definite factorisation failed after jitter "
                  "escalation (final jitter {:.3e})",
                  jitter),
      jitter);
}

Matrix PsdFactor::solve(const Matrix& B) const {
  if (B.rows() != size()) {
    throw InputError(fmt::format("right-hand side has {} rows, system has {}",
                                 B.rows(), size()));
  }
  return llt_.solve(B);
}

Matrix solve_psd(const Matrix& A, const Matrix& B, double ridge) {
  return PsdFactor(A, ridge).solve(B);
}

}  // namespace rkshap
