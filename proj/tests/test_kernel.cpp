#include <cmath>

#include "doctest.h"
#include "rkshap/errors.hpp"
#include "rkshap/kernel.hpp"
#include "support.hpp"

using namespace rkshap;

TEST_SUITE("kernel") {

TEST_CASE("coalition bit operations") {
  const Coalition S = Coalition::of(4, {0, 2});
  CHECK(S.mask() == 0b0101);
  CHECK(S.size() == 2);
  CHECK(S.contains(2));
  CHECK_FALSE(S.contains(1));
  CHECK(S.complement().mask() == 0b1010);
  CHECK((S.complement().mask() & S.mask()) == 0);
  CHECK((S.complement().mask() | S.mask()) == Coalition::full(4).mask());
  CHECK(S.with(1).mask() == 0b0111);
  CHECK(S.without(0).mask() == 0b0100);
  CHECK(S.members() == std::vector<int>{0, 2});
  CHECK(Coalition::empty(3).is_empty());
  CHECK(Coalition::full(3).is_full());
  CHECK(Coalition::full(64).size() == 64);
  CHECK_THROWS_AS(Coalition(0b1000, 3), InputError);
  CHECK_THROWS_AS(Coalition::of(3, {3}), InputError);
}

TEST_CASE("kernel spec rejects bad lengthscales") {
  CHECK_THROWS_AS(KernelSpec(std::vector<double>{}), InputError);
  CHECK_THROWS_AS(KernelSpec({1.0, 0.0}), InputError);
  CHECK_THROWS_AS(KernelSpec({-1.0}), InputError);
  CHECK_THROWS_AS(KernelSpec({std::nan("")}), InputError);
  CHECK_THROWS_AS(KernelSpec({INFINITY}), InputError);
}

TEST_CASE("two-point one-dimensional gram") {
  Matrix X(2, 1);
  X << 0, 1;
  const GramBlock K = kernel_matrix(X, X, KernelSpec({1.0}), Coalition::full(1));
  CHECK(K.values(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(K.values(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(K.values(1, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(K.values(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("empty coalition gives all ones") {
  const Matrix X = test::random_matrix(4, 3, 1);
  const Matrix X2 = test::random_matrix(5, 3, 2);
  const GramBlock K = kernel_matrix(X, X2, KernelSpec({1, 2, 3}), Coalition::empty(3));
  CHECK(K.values.rows() == 4);
  CHECK(K.values.cols() == 5);
  CHECK((K.values.array() == 1.0).all());
}

TEST_CASE("per-dimension factors multiply") {
  Matrix X(1, 2);
  X << 0, 0;
  Matrix X2(1, 2);
  X2 << 1, 2;
  const GramBlock K = kernel_matrix(X, X2, KernelSpec({1, 1}), Coalition::full(2));
  const double f1 = std::exp(-0.5);
  const double f2 = std::exp(-2.0);
  CHECK(K.values(0, 0) == doctest::Approx(f1 * f2).epsilon(1e-14));
}

TEST_CASE("gram matches scalar evaluation on random inputs") {
  const std::vector<double> scales{0.7, 1.3, 2.1};
  const KernelSpec spec(scales);
  const Matrix X = test::random_matrix(6, 3, 3);
  const Matrix X2 = test::random_matrix(4, 3, 4);
  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    const GramBlock K = kernel_matrix(X, X2, spec, Coalition(mask, 3));
    for (Eigen::Index i = 0; i < 6; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(K.values(i, j) ==
              doctest::Approx(test::scalar_kernel(X, i, X2, j, scales, mask)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("gram properties: symmetry, unit diagonal, multiplicativity, bounds") {
  const KernelSpec spec({0.5, 1.0, 1.5, 2.0});
  const Matrix X = test::random_matrix(12, 4, 5);
  for (std::uint64_t mask = 0; mask < 16; ++mask) {
    const Coalition S(mask, 4);
    const Matrix K = kernel_matrix(X, X, spec, S).values;
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((K.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(K.maxCoeff() <= 1.0);
    CHECK(K.minCoeff() > 0.0);
    // split S into two disjoint halves
    for (std::uint64_t sub = mask;; sub = (sub - 1) & mask) {
      const Matrix K1 = kernel_matrix(X, X, spec, Coalition(sub, 4)).values;
      const Matrix K2 = kernel_matrix(X, X, spec, Coalition(mask & ~sub, 4)).values;
      CHECK((K - K1.cwiseProduct(K2)).cwiseAbs().maxCoeff() <= 1e-12);
      if (sub == 0) break;
    }
  }
}

TEST_CASE("gram input validation") {
  const KernelSpec spec({1.0, 1.0});
  const Matrix X = test::random_matrix(3, 2, 6);
  CHECK_THROWS_AS(kernel_matrix(X, test::random_matrix(3, 3, 7), spec, Coalition::full(2)),
                  InputError);
  CHECK_THROWS_AS(kernel_matrix(X, X, spec, Coalition::full(3)), InputError);
  Matrix bad = X;
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(kernel_matrix(bad, X, spec, Coalition::full(2)), InputError);
  bad(1, 1) = INFINITY;
  CHECK_THROWS_AS(kernel_matrix(X, bad, spec, Coalition::full(2)), InputError);
}

TEST_CASE("median heuristic examples") {
  Matrix a(3, 1);
  a << 0, 1, 2;
  CHECK(median_heuristic(a)[0] == doctest::Approx(1.0));
  Matrix b(2, 1);
  b << 0, 10;
  CHECK(median_heuristic(b)[0] == doctest::Approx(10.0));
  Matrix c(3, 1);
  c << 0, 0, 4;
  CHECK(median_heuristic(c)[0] == doctest::Approx(4.0));
  // even count of nonzero differences: {1, 2, 3, 1, 2, 1} -> mean of middle pair
  Matrix e(4, 1);
  e << 0, 1, 2, 3;
  CHECK(median_heuristic(e)[0] == doctest::Approx(1.5));
}

TEST_CASE("median heuristic against brute-force pairs") {
  const Matrix X = test::random_matrix(31, 3, 8);
  const auto scales = median_heuristic(X);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> diffs;
    for (int i = 0; i < 31; ++i) {
      for (int j = i + 1; j < 31; ++j) diffs.push_back(std::abs(X(i, c) - X(j, c)));
    }
    std::sort(diffs.begin(), diffs.end());
    // 465 pairs, odd count
    CHECK(scales[c] == doctest::Approx(diffs[diffs.size() / 2]).epsilon(1e-14));
  }
}

TEST_CASE("median heuristic rejects constant columns and tiny inputs") {
  Matrix X(3, 2);
  X << 0, 5, 1, 5, 2, 5;
  try {
    median_heuristic(X);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
  }
  CHECK_THROWS_AS(median_heuristic(Matrix::Zero(1, 2)), InputError);
}

TEST_CASE("median heuristic subsamples large inputs deterministically") {
  const Matrix X = test::random_matrix(2500, 1, 9);
  const auto a = median_heuristic(X, 4);
  const auto b = median_heuristic(X, 4);
  CHECK(a == b);
  // median |Z - Z'| for standard normals is sqrt(2) * 0.6745
  CHECK(a[0] == doctest::Approx(std::sqrt(2.0) * 0.67449).epsilon(0.05));
}

TEST_CASE("solve_psd examples") {
  Matrix B(2, 1);
  B << 3, 4;
  CHECK(solve_psd(Matrix::Identity(2, 2), B, 0.0).isApprox(B, 1e-15));
  const Matrix inv = solve_psd(2.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.0);
  CHECK(inv.isApprox(0.5 * Matrix::Identity(2, 2), 1e-15));
  Matrix ones = Matrix::Ones(2, 2);
  const Matrix x = solve_psd(ones, Matrix::Ones(2, 1), 1.0);
  // (A + I)^{-1} = [[2,-1],[-1,2]] / 3 by hand
  CHECK(x(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(x(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("solve_psd matches a dense LU reference") {
  const Matrix R = test::random_matrix(20, 20, 10);
  const Matrix A = R * R.transpose() + 20.0 * Matrix::Identity(20, 20);
  const Matrix B = test::random_matrix(20, 3, 11);
  const Matrix ref = A.partialPivLu().solve(B);
  const Matrix got = solve_psd(A, B, 0.0);
  CHECK((got - ref).norm() / ref.norm() <= 1e-10);
}

TEST_CASE("solve_psd jitter escalation") {
  // exactly singular: the second pivot is 0, so plain Cholesky fails
  const Matrix A = Matrix::Ones(2, 2);
  const PsdFactor factor(A, 0.0);
  CHECK(factor.jitter() == doctest::Approx(1e-10));
  const Matrix x = factor.solve(Matrix::Ones(2, 1));
  CHECK(((A + factor.jitter() * Matrix::Identity(2, 2)) * x - Matrix::Ones(2, 1)).norm() <=
        1e-6);

  Matrix indefinite = Matrix::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  try {
    solve_psd(indefinite, Matrix::Ones(3, 1), 0.0);
    FAIL("expected singular system");
  } catch (const SingularSystemError& e) {
    CHECK(e.final_jitter() == doctest::Approx(1e-10 * 1.0 / 3.0 * 256.0));
  }
  CHECK_THROWS_AS(solve_psd(Matrix::Identity(2, 2), Matrix::Ones(3, 1), 0.0), InputError);
  CHECK_THROWS_AS(solve_psd(Matrix::Identity(2, 2), Matrix::Ones(2, 1), -1.0), InputError);
}

}  // TEST_SUITE
