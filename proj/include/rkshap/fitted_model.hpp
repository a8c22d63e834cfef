#pragma once

#include <cstdint>
#include <optional>

#include "rkshap/kernel.hpp"
#include "rkshap/mode.hpp"

namespace rkshap {

struct RegulariserInfo {
  int feature = 0;  // 0-based index of the regularised feature
  double lambda_s = 0.0;
  int samples = 0;  // 0 when the coalition average was exhaustive
  Mode mode = Mode::interventional;
  std::uint64_t seed = 0;
};

/// Kernel expansion f(.) = sum_i alpha_i k(., x_i) over the retained
/// training inputs.
struct FittedModel {
  Vector alpha;
  Matrix x_train;
  KernelSpec spec;
  double lambda_f = 0.0;
  std::optional<RegulariserInfo> regulariser;

  Eigen::Index size() const { return alpha.size(); }
  int dim() const { return spec.dim(); }
};

}  // namespace rkshap
