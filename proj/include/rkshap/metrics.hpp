#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>

#include "rkshap/kernel.hpp"

namespace rkshap {

struct ScoreReport {
  std::string metric;
  double value = 0.0;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// 1 - SSE / total sum of squares of the truth.
double r_squared(const Vector& truth, const Vector& estimate);

double rmse(const Vector& truth, const Vector& estimate);

// Pooled R^2 over every entry of two equally shaped matrices.
double pooled_r_squared(const Matrix& truth, const Matrix& estimate);

template <class T>
struct Timed {
  T result;
  double wall_seconds;
};

template <class Fn>
auto timed(Fn&& run) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
    std::forward<Fn>(run)();
    return std::chrono::duration<double>(Clock::now() - start).count();
  } else {
    auto result = std::forward<Fn>(run)();
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return Timed<decltype(result)>{std::move(result), seconds};
  }
}

}  // namespace rkshap
