#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "rkshap/errors.hpp"
#include "rkshap/models.hpp"
#include "rkshap/shapley.hpp"
#include "support.hpp"

using namespace rkshap;

namespace {

double choose(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Permutation-free Shapley oracle kept separate from exact_shapley: averages
// marginal contributions over every ordering of the players.
double shapley_by_orderings(const std::vector<double>& game, int d, int feature) {
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  int count = 0;
  do {
    std::uint64_t mask = 0;
    for (int p : order) {
      if (p == feature) {
        total += game[mask | (std::uint64_t{1} << p)] - game[mask];
        break;
      }
      mask |= std::uint64_t{1} << p;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return total / count;
}

std::vector<double> random_game(int d, std::uint64_t seed) {
  const Vector v = test::random_vector(Eigen::Index{1} << d, seed);
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Runs the exhaustive solver on a batch of games, one per column.
AttributionMatrix solve_games(const std::vector<std::vector<double>>& games, int d) {
  const CoalitionDesign design = enumerate_coalitions(d);
  const Eigen::Index n = static_cast<Eigen::Index>(games.size());
  Matrix V(design.size(), n);
  Vector baseline(n);
  Vector grand(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < design.size(); ++r) {
      V(r, j) = games[j][design.coalitions[r].mask()];
    }
    baseline(j) = games[j][0];
    grand(j) = games[j][(std::uint64_t{1} << d) - 1];
  }
  return solve_shapley_wls(design, V, baseline, grand);
}

}  // namespace

TEST_SUITE("shapley") {

TEST_CASE("kernel weight examples") {
  CHECK(shapley_kernel_weight(2, 1) == doctest::Approx(0.5));
  CHECK(shapley_kernel_weight(3, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(shapley_kernel_weight(3, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(shapley_kernel_weight(4, 2) == doctest::Approx(1.0 / 8.0));
  for (int d = 2; d <= 12; ++d) {
    for (int s = 1; s < d; ++s) {
      CHECK(shapley_kernel_weight(d, s) ==
            doctest::Approx((d - 1.0) / (choose(d, s) * s * (d - s))));
      CHECK(shapley_kernel_weight(d, s) == doctest::Approx(shapley_kernel_weight(d, d - s)));
    }
  }
  CHECK_THROWS_AS(shapley_kernel_weight(3, 0), InputError);
  CHECK_THROWS_AS(shapley_kernel_weight(3, 3), InputError);
  CHECK_THROWS_AS(shapley_kernel_weight(1, 1), InputError);
}

TEST_CASE("exhaustive enumeration") {
  const CoalitionDesign d2 = enumerate_coalitions(2);
  REQUIRE(d2.size() == 2);
  CHECK(d2.coalitions[0].mask() == 0b01);
  CHECK(d2.coalitions[1].mask() == 0b10);
  CHECK(d2.weights[0] == doctest::Approx(0.5));
  CHECK(d2.weights[1] == doctest::Approx(0.5));
  CHECK(d2.exhaustive);

  const CoalitionDesign d3 = enumerate_coalitions(3);
  CHECK(d3.size() == 6);
  CHECK(std::accumulate(d3.weights.begin(), d3.weights.end(), 0.0) == doctest::Approx(2.0));
  for (std::size_t r = 1; r < d3.size(); ++r) {
    CHECK(d3.coalitions[r - 1].mask() < d3.coalitions[r].mask());
  }

  const CoalitionDesign d20 = enumerate_coalitions(20);
  CHECK(d20.size() == 1048574);
  CHECK(d20.coalitions.front().mask() == 1);
  CHECK(d20.coalitions.back().mask() == (std::uint64_t{1} << 20) - 2);
  CHECK_THROWS_AS(enumerate_coalitions(21), CapacityError);
  CHECK_THROWS_AS(enumerate_coalitions(1), InputError);
}

TEST_CASE("sampled designs") {
  std::mt19937_64 rng(1);
  const CoalitionDesign d2 = sample_coalitions(2, 1000, rng);
  CHECK_FALSE(d2.exhaustive);
  CHECK(d2.size() == 2);
  for (const Coalition& S : d2.coalitions) CHECK((S.mask() == 1 || S.mask() == 2));

  std::mt19937_64 a(7);
  std::mt19937_64 b(7);
  const CoalitionDesign da = sample_coalitions(5, 100, a);
  const CoalitionDesign db = sample_coalitions(5, 100, b);
  CHECK(da.weights == db.weights);
  REQUIRE(da.size() == db.size());
  for (std::size_t r = 0; r < da.size(); ++r) CHECK(da.coalitions[r] == db.coalitions[r]);

  std::mt19937_64 c(2);
  CHECK_THROWS_AS(sample_coalitions(4, 4, c), InputError);
}

TEST_CASE("sampled size marginal matches the normalised kernel mass") {
  const int d = 4;
  const int draws = 100000;
  std::mt19937_64 rng(3);
  const CoalitionDesign design = sample_coalitions(d, draws, rng);
  double mass = 0.0;
  for (int s = 1; s < d; ++s) mass += choose(d, s) * shapley_kernel_weight(d, s);
  CHECK(mass == doctest::Approx(2.75));
  // weight = multiplicity * mass / draws
  std::map<int, double> counts;
  double total = 0.0;
  for (std::size_t r = 0; r < design.size(); ++r) {
    const double multiplicity = design.weights[r] * draws / mass;
    CHECK(multiplicity == doctest::Approx(std::round(multiplicity)).epsilon(1e-9));
    counts[design.coalitions[r].size()] += multiplicity;
    total += multiplicity;
  }
  CHECK(total == doctest::Approx(draws));
  const std::map<int, double> expected{{1, 1.0 / 2.75}, {2, 0.75 / 2.75}, {3, 1.0 / 2.75}};
  for (const auto& [s, p] : expected) {
    const double sigma = std::sqrt(draws * p * (1 - p));
    CHECK(std::abs(counts[s] - draws * p) <= 3.0 * sigma);
  }
}

TEST_CASE("exact_shapley examples") {
  const int d = 3;
  std::vector<double> additive(8);
  std::vector<double> squared(8);
  const double a[] = {1.5, -2.0, 0.25};
  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    for (int c = 0; c < d; ++c) {
      if ((mask >> c) & 1U) additive[mask] += a[c];
    }
    squared[mask] = std::pow(std::popcount(mask), 2);
  }
  for (int c = 0; c < d; ++c) {
    CHECK(exact_shapley(additive, d, c) == doctest::Approx(a[c]));
    CHECK(exact_shapley(squared, d, c) == doctest::Approx(3.0));
  }
  // feature 2 is a null player
  std::vector<double> game = random_game(3, 4);
  for (std::uint64_t mask = 4; mask < 8; ++mask) game[mask] = game[mask - 4];
  CHECK(exact_shapley(game, d, 2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(exact_shapley(std::vector<double>(7), 3, 0), InputError);
  CHECK_THROWS_AS(exact_shapley(additive, 3, 3), InputError);
}

TEST_CASE("exact_shapley agrees with the ordering average") {
  for (int d = 1; d <= 6; ++d) {
    const auto game = random_game(d, 10 + d);
    for (int c = 0; c < d; ++c) {
      CHECK(exact_shapley(game, d, c) ==
            doctest::Approx(shapley_by_orderings(game, d, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("two-feature solve matches the closed form") {
  const auto game = random_game(2, 20);
  const AttributionMatrix phi = solve_games({game}, 2);
  const double b1 = 0.5 * (game[1] - game[0]) + 0.5 * (game[3] - game[2]);
  const double b2 = 0.5 * (game[2] - game[0]) + 0.5 * (game[3] - game[1]);
  CHECK(phi.values(0, 0) == doctest::Approx(b1).epsilon(1e-12));
  CHECK(phi.values(1, 0) == doctest::Approx(b2).epsilon(1e-12));
}

TEST_CASE("null game gives zero attributions") {
  const CoalitionDesign design = enumerate_coalitions(4);
  const Vector base = test::random_vector(3, 21);
  Matrix V(design.size(), 3);
  for (std::size_t r = 0; r < design.size(); ++r) V.row(r) = base.transpose();
  const AttributionMatrix phi = solve_shapley_wls(design, V, base, base);
  CHECK(phi.values.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("exhaustive solve equals exact_shapley, with axioms") {
  for (int d = 2; d <= 8; ++d) {
    std::vector<std::vector<double>> games;
    for (int g = 0; g < 10; ++g) games.push_back(random_game(d, 100 * d + g));
    const AttributionMatrix phi = solve_games(games, d);
    double worst = 0.0;
    for (std::size_t g = 0; g < games.size(); ++g) {
      for (int c = 0; c < d; ++c) {
        worst = std::max(worst,
                         std::abs(phi.values(c, g) - exact_shapley(games[g], d, c)));
      }
      const double gap = phi.values.col(g).sum() - (phi.grand(g) - phi.baseline(g));
      CHECK(std::abs(gap) <= 1e-8);
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("symmetry and dummy axioms") {
  const int d = 5;
  // features 1 and 3 exchangeable, feature 4 a dummy
  const auto base = random_game(d, 30);
  std::vector<double> game(base.size());
  for (std::uint64_t mask = 0; mask < game.size(); ++mask) {
    std::uint64_t m = mask & ~std::uint64_t{0b10000};
    const bool has1 = (m >> 1) & 1U;
    const bool has3 = (m >> 3) & 1U;
    if (has3 && !has1) m = (m & ~std::uint64_t{0b1000}) | 0b10;
    game[mask] = base[m];
  }
  const AttributionMatrix phi = solve_games({game}, d);
  CHECK(std::abs(phi.values(1, 0) - phi.values(3, 0)) <= 1e-8);
  CHECK(std::abs(phi.values(4, 0)) <= 1e-8);
}

TEST_CASE("rank-deficient designs are rejected") {
  CoalitionDesign design;
  design.dim = 3;
  design.coalitions = {Coalition(0b001, 3)};
  design.weights = {1.0};
  const Matrix V = Matrix::Ones(1, 2);
  CHECK_THROWS_AS(solve_shapley_wls(design, V, Vector::Zero(2), Vector::Ones(2)),
                  IdentifiabilityError);
  design.weights = {-1.0};
  CHECK_THROWS_AS(solve_shapley_wls(design, V, Vector::Zero(2), Vector::Ones(2)),
                  InputError);
}

TEST_CASE("design policy parsing") {
  CHECK(DesignPolicy::parse("exhaustive", 0).kind == DesignPolicy::Kind::exhaustive);
  CHECK(DesignPolicy::parse("auto", 0).kind == DesignPolicy::Kind::automatic);
  const DesignPolicy s = DesignPolicy::parse("sampled:300", 9);
  CHECK(s.kind == DesignPolicy::Kind::sampled);
  CHECK(s.count == 300);
  CHECK(s.seed == 9);
  CHECK(DesignPolicy::parse("sampled", 0).kind == DesignPolicy::Kind::sampled);
  CHECK_THROWS_AS(DesignPolicy::parse("sampled:x", 0), InputError);
  CHECK_THROWS_AS(DesignPolicy::parse("sampled:-3", 0), InputError);
  CHECK_THROWS_AS(DesignPolicy::parse("greedy", 0), InputError);

  CHECK(DesignPolicy{}.build(12).exhaustive);
  const CoalitionDesign big = DesignPolicy{}.build(13);
  CHECK_FALSE(big.exhaustive);
  double multiplicity = 0.0;
  double mass = 0.0;
  for (int k = 1; k < 13; ++k) mass += choose(13, k) * shapley_kernel_weight(13, k);
  for (double w : big.weights) multiplicity += w * kAutoSampleCount / mass;
  CHECK(multiplicity == doctest::Approx(kAutoSampleCount));
}

TEST_CASE("attribution of a constant-label fit is near zero") {
  // A constant is only reproduced where the model was trained, so train on a
  // grid and query grid points: every interventional hybrid point is then a
  // training point. Observational values carry a conditional-embedding
  // shrinkage of order n*eta, so eta is taken small here.
  const int g = 7;
  Matrix X(g * g, 2);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      X(i * g + j, 0) = -1.0 + 2.0 * i / (g - 1);
      X(i * g + j, 1) = -1.0 + 2.0 * j / (g - 1);
    }
  }
  const double c = 4.0;
  const FittedModel model = fit_krr(X, Vector::Constant(g * g, c), KernelSpec({0.5, 0.5}), 1e-9);
  const AttributionMatrix isv =
      attribute(model, X, Mode::interventional, DesignPolicy::exhaustive());
  const AttributionMatrix osv =
      attribute(model, X, Mode::observational, DesignPolicy::exhaustive(), 1e-9);
  CHECK(isv.values.cwiseAbs().maxCoeff() <= 1e-6 * c);
  CHECK(osv.values.cwiseAbs().maxCoeff() <= 1e-6 * c);
}

TEST_CASE("attribution efficiency and exactness against the value game") {
  const Matrix X = test::random_matrix(25, 4, 41);
  const Vector y = X.col(0) + X.col(1).cwiseProduct(X.col(2)) - X.col(3).array().sin().matrix();
  const KernelSpec spec(median_heuristic(X));
  const FittedModel model = fit_krr(X, y, spec, 1e-2);
  const Matrix Xq = test::random_matrix(6, 4, 42);
  for (Mode mode : {Mode::interventional, Mode::observational}) {
    const AttributionMatrix phi = attribute(model, Xq, mode, DesignPolicy::exhaustive());
    CHECK(phi.mode == mode);
    const Vector gap = phi.values.colwise().sum().transpose() - (phi.grand - phi.baseline);
    CHECK(gap.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((phi.grand - predict(model, Xq)).cwiseAbs().maxCoeff() <= 1e-12);

    const ValueFunction vf(X, spec, mode);
    for (Eigen::Index j = 0; j < Xq.rows(); ++j) {
      std::vector<double> game(16);
      for (std::uint64_t mask = 0; mask < 16; ++mask) {
        game[mask] = value_of(model, vf.matrix(Xq.row(j), Coalition(mask, 4)))(0);
      }
      for (int c = 0; c < 4; ++c) {
        CHECK(std::abs(phi.values(c, j) - exact_shapley(game, 4, c)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("sampled design approaches the exhaustive answer at d = 6") {
  const Matrix X = test::random_matrix(40, 6, 43);
  const Vector y = X.col(0) + 2.0 * X.col(1) - X.col(4).cwiseProduct(X.col(5));
  const FittedModel model = fit_krr(X, y, KernelSpec(median_heuristic(X)), 1e-2);
  const Matrix Xq = X.topRows(5);
  const AttributionMatrix exact =
      attribute(model, Xq, Mode::interventional, DesignPolicy::exhaustive());
  const AttributionMatrix sampled =
      attribute(model, Xq, Mode::interventional, DesignPolicy::sampled(20000, 5));
  CHECK((exact.values - sampled.values).cwiseAbs().maxCoeff() <= 5e-2);
}

TEST_CASE("parallel attribution is schedule independent") {
  const Matrix X = test::random_matrix(30, 4, 44);
  const Vector y = X.rowwise().sum();
  const FittedModel model = fit_krr(X, y, KernelSpec(median_heuristic(X)), 1e-2);
  const AttributionMatrix one =
      attribute(model, X, Mode::observational, DesignPolicy::exhaustive(), 1e-3, 1);
  const AttributionMatrix four =
      attribute(model, X, Mode::observational, DesignPolicy::exhaustive(), 1e-3, 4);
  CHECK(one.values == four.values);
}

TEST_CASE("attribute_many matches attribute per model") {
  const Matrix X = test::random_matrix(20, 3, 45);
  const KernelSpec spec(median_heuristic(X));
  const Matrix Xq = test::random_matrix(5, 3, 46);
  const Matrix alphas = test::random_matrix(20, 3, 47);
  for (Mode mode : {Mode::interventional, Mode::observational}) {
    const ValueFunction vf(X, spec, mode);
    const auto many = attribute_many(vf, alphas, Xq, DesignPolicy::exhaustive());
    REQUIRE(many.size() == 3);
    for (int k = 0; k < 3; ++k) {
      FittedModel model;
      model.alpha = alphas.col(k);
      model.x_train = X;
      model.spec = spec;
      model.lambda_f = 1.0;
      const AttributionMatrix single = attribute(model, Xq, mode, DesignPolicy::exhaustive());
      CHECK((many[k].values - single.values).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((many[k].baseline - single.baseline).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((many[k].grand - single.grand).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("interventional robustness bound on random models") {
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + trial % 2;
    const double delta = trial % 4 < 2 ? 1e-4 : 1e-2;
    const double l = 0.5 + (trial % 5) * 0.25;
    const Matrix X = test::random_matrix(15, d, 500 + trial);
    FittedModel model;
    model.x_train = X;
    model.spec = KernelSpec(std::vector<double>(d, l));
    model.alpha = test::random_vector(15, 600 + trial);
    model.lambda_f = 1.0;
    Matrix pair(2, d);
    pair.row(0) = test::random_matrix(1, d, 700 + trial);
    for (int c = 0; c < d; ++c) pair(1, c) = pair(0, c) + std::sqrt(delta) * unit(rng);
    const AttributionMatrix phi =
        attribute(model, pair, Mode::interventional, DesignPolicy::exhaustive());
    const double bound =
        rkhs_norm(model) * 2.0 * std::sqrt(1.0 - std::exp(-d * delta / (2.0 * l * l)));
    for (int c = 0; c < d; ++c) {
      CHECK(std::abs(phi.values(c, 0) - phi.values(c, 1)) <= bound);
    }
  }
}

}  // TEST_SUITE
