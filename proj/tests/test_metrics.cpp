#include <chrono>
#include <cmath>

#include "doctest.h"
#include "rkshap/errors.hpp"
#include "rkshap/metrics.hpp"
#include "support.hpp"

using namespace rkshap;

namespace {

double busy_loop(long iterations) {
  volatile double acc = 0.0;
  for (long i = 0; i < iterations; ++i) acc = acc + std::sqrt(static_cast<double>(i));
  return acc;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("r_squared examples") {
  const Vector truth = test::random_vector(20, 1);
  CHECK(r_squared(truth, truth) == 1.0);
  CHECK(r_squared(truth, Vector::Constant(20, truth.mean())) == doctest::Approx(0.0));
  Vector t(3);
  t << 0, 1, 2;
  Vector e(3);
  e << 0, 1, 1;
  CHECK(r_squared(t, e) == doctest::Approx(0.5));
  CHECK(r_squared(t, -t) < 0.0);
  CHECK_THROWS_AS(r_squared(Vector::Ones(3), t), InputError);
  CHECK_THROWS_AS(r_squared(t, Vector::Ones(2)), InputError);
  CHECK_THROWS_AS(r_squared(Vector::Ones(1), Vector::Ones(1)), InputError);
}

TEST_CASE("r_squared invariances") {
  const Vector truth = test::random_vector(30, 2);
  const Vector est = truth + 0.3 * test::random_vector(30, 3);
  const double base = r_squared(truth, est);
  CHECK(base <= 1.0);
  const Vector shift = Vector::Constant(30, 7.5);
  CHECK(r_squared(truth + shift, est + shift) == doctest::Approx(base).epsilon(1e-12));
  const Vector tc = truth.array() - truth.mean();
  const Vector ec = est.array() - truth.mean();
  CHECK(r_squared(3.0 * tc, 3.0 * ec) == doctest::Approx(r_squared(tc, ec)).epsilon(1e-12));
}

TEST_CASE("pooled r_squared treats every entry as one sample") {
  const Matrix truth = test::random_matrix(2, 10, 4);
  const Matrix est = truth + 0.2 * test::random_matrix(2, 10, 5);
  const Vector tv = truth.reshaped();
  const Vector ev = est.reshaped();
  CHECK(pooled_r_squared(truth, est) == doctest::Approx(r_squared(tv, ev)).epsilon(1e-14));
  CHECK_THROWS_AS(pooled_r_squared(truth, est.leftCols(3)), InputError);
}

TEST_CASE("rmse examples and properties") {
  const Vector a = test::random_vector(25, 6);
  CHECK(rmse(a, a) == 0.0);
  Vector zero = Vector::Zero(2);
  Vector e(2);
  e << 3, 4;
  CHECK(rmse(zero, e) == doctest::Approx(std::sqrt(12.5)));
  const Vector b = test::random_vector(25, 7);
  const Vector c = test::random_vector(25, 8);
  CHECK(rmse(-2.5 * a, -2.5 * b) == doctest::Approx(2.5 * rmse(a, b)).epsilon(1e-13));
  CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c));
  CHECK_THROWS_AS(rmse(Vector(0), Vector(0)), InputError);
  CHECK_THROWS_AS(rmse(a, b.head(3)), InputError);
}

TEST_CASE("timing") {
  const double nothing = timed([] {});
  CHECK(nothing >= 0.0);
  CHECK(nothing < 1e-2);

  const auto result = timed([] { return 42; });
  CHECK(result.result == 42);
  CHECK(result.wall_seconds >= 0.0);

  // calibrate a busy loop to roughly 0.2 s, then time it again
  long iterations = 1 << 20;
  double calibration = timed([&] { busy_loop(iterations); });
  while (calibration < 0.05) {
    iterations *= 2;
    calibration = timed([&] { busy_loop(iterations); });
  }
  iterations = static_cast<long>(iterations * 0.2 / calibration);
  calibration = timed([&] { busy_loop(iterations); });
  const double measured = timed([&] { busy_loop(iterations); });
  CHECK(std::abs(measured - calibration) <= 0.5 * calibration);

  double inner_a = 0.0;
  double inner_b = 0.0;
  const double outer = timed([&] {
    inner_a = timed([&] { busy_loop(iterations / 2); });
    inner_b = timed([&] { busy_loop(iterations / 2); });
  });
  CHECK(std::abs(outer - (inner_a + inner_b)) <= 0.05 * outer);
}

}  // TEST_SUITE
