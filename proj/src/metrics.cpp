#include "rkshap/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rkshap/errors.hpp"

namespace rkshap {

double r_squared(const Vector& truth, const Vector& estimate) {
  if (truth.size() != estimate.size() || truth.size() < 2) {
    throw InputError(fmt::format("R^2 needs equal lengths >= 2, got {} and {}",
                                 truth.size(), estimate.size()));
  }
  const double total = (truth.array() - truth.mean()).square().sum();
  if (!(total > 0.0)) {
    throw InputError("R^2 undefined: truth is constant");
  }
  return 1.0 - (estimate - truth).squaredNorm() / total;
}

double rmse(const Vector& truth, const Vector& estimate) {
  if (truth.size() == 0) throw InputError("RMSE of empty input");
  if (truth.size() != estimate.size()) {
    throw InputError(fmt::format("RMSE needs equal lengths, got {} and {}",
                                 truth.size(), estimate.size()));
  }
  return std::sqrt((estimate - truth).squaredNorm() /
                   static_cast<double>(truth.size()));
}

double pooled_r_squared(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw InputError("pooled R^2 needs matrices of equal shape");
  }
  return r_squared(truth.reshaped(), estimate.reshaped());
}

}  // namespace rkshap
