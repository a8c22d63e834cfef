#include "rkshap/shapley.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "rkshap/errors.hpp"
#include "rkshap/parallel.hpp"

namespace rkshap {

namespace {

double binomial(int n, int k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                             std::lgamma(n - k + 1.0)));
}

void check_dim(int d) {
  if (d < 2) {
    throw InputError(fmt::format("coalition designs need d >= 2, got {}", d));
  }
  if (d > Coalition::kMaxDim - 1) {
    throw CapacityError(fmt::format("d = {} exceeds the coalition mask width", d));
  }
}

// Mean training prediction is alpha^T (row means of K_xx): the empty
// coalition's value matrix has identical columns.
Matrix baseline_rows(const Matrix& alphas, const Matrix& x_train,
                     const KernelSpec& spec, Eigen::Index n_query) {
  const Vector row_means =
      kernel_matrix(x_train, x_train, spec, Coalition::full(spec.dim()))
          .values.rowwise()
          .mean();
  const Vector per_model = alphas.transpose() * row_means;
  return per_model.replicate(1, n_query);
}

}  // namespace

double shapley_kernel_weight(int d, int s) {
  if (d < 2 || s < 1 || s > d - 1) {
    throw InputError(fmt::format(
        "kernel weight defined for d >= 2 and 1 <= s <= d-1, got d={} s={}", d,
        s));
  }
  return (d - 1.0) / (binomial(d, s) * s * (d - s));
}

CoalitionDesign enumerate_coalitions(int d) {
  if (d > kMaxExhaustiveDim) {
    throw CapacityError(fmt::format(
        "exhaustive design capped at d = {} (got {}); use sampled coalitions",
        kMaxExhaustiveDim, d));
  }
  check_dim(d);
  const std::uint64_t total = std::uint64_t{1} << d;
  std::vector<double> size_weight(d);
  for (int s = 1; s < d; ++s) size_weight[s] = shapley_kernel_weight(d, s);

  CoalitionDesign design;
  design.dim = d;
  design.exhaustive = true;
  design.coalitions.reserve(total - 2);
  design.weights.reserve(total - 2);
  for (std::uint64_t mask = 1; mask + 1 < total; ++mask) {
    Coalition S(mask, d);
    design.coalitions.push_back(S);
    design.weights.push_back(size_weight[S.size()]);
  }
  return design;
}

CoalitionDesign sample_coalitions(int d, int count, std::mt19937_64& rng) {
  check_dim(d);
  if (count < d + 1) {
    throw InputError(fmt::format(
        "sampled design needs at least d + 1 = {} draws, got {}", d + 1, count));
  }
  // Mass of each size class under w: C(d,s) w(d,s) = (d-1) / (s (d-s)).
  std::vector<double> size_mass(d + 1, 0.0);
  for (int s = 1; s < d; ++s) size_mass[s] = (d - 1.0) / (s * (d - s));
  const double total_mass = std::accumulate(size_mass.begin(), size_mass.end(), 0.0);
  std::discrete_distribution<int> size_dist(size_mass.begin(), size_mass.end());

  std::map<std::uint64_t, int> multiplicity;
  std::vector<int> pool(d);
  for (int draw = 0; draw < count; ++draw) {
    const int s = size_dist(rng);
    std::iota(pool.begin(), pool.end(), 0);
    std::uint64_t mask = 0;
    // Partial Fisher-Yates: the first s slots become a uniform s-subset.
    for (int k = 0; k < s; ++k) {
      std::uniform_int_distribution<int> pick(k, d - 1);
      std::swap(pool[k], pool[pick(rng)]);
      mask |= std::uint64_t{1} << pool[k];
    }
    ++multiplicity[mask];
  }

  CoalitionDesign design;
  design.dim = d;
  design.exhaustive = false;
  const double unit = total_mass / count;
  for (const auto& [mask, times] : multiplicity) {
    design.coalitions.emplace_back(mask, d);
    design.weights.push_back(unit * times);
  }
  return design;
}

AttributionMatrix solve_shapley_wls(const CoalitionDesign& design,
                                    const Matrix& V, const Vector& baseline,
                                    const Vector& grand, Mode mode) {
  const int d = design.dim;
  const Eigen::Index n = baseline.size();
  if (grand.size() != n || V.cols() != n) {
    throw InputError(fmt::format(
        "baseline ({}), grand ({}) and value columns ({}) must agree",
        baseline.size(), grand.size(), V.cols()));
  }
  if (static_cast<std::size_t>(V.rows()) != design.size() ||
      design.weights.size() != design.size()) {
    throw InputError(fmt::format("design has {} coalitions, V has {} rows",
                                 design.size(), V.rows()));
  }

  AttributionMatrix out;
  out.mode = mode;
  out.baseline = baseline;
  out.grand = grand;
  const Vector total = grand - baseline;
  if (d == 1) {
    out.values = total.transpose();
    return out;
  }

  const int free = d - 1;
  const int last = d - 1;
  Matrix normal = Matrix::Zero(free, free);
  Matrix rhs = Matrix::Zero(free, n);
  Vector z(free);
  for (std::size_t r = 0; r < design.size(); ++r) {
    const Coalition& S = design.coalitions[r];
    const double w = design.weights[r];
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InputError(fmt::format("coalition weight {} must be positive", w));
    }
    const double z_last = S.contains(last) ? 1.0 : 0.0;
    for (int i = 0; i < free; ++i) z(i) = (S.contains(i) ? 1.0 : 0.0) - z_last;
    normal.noalias() += w * z * z.transpose();
    const Eigen::RowVectorXd target =
        V.row(r) - baseline.transpose() - z_last * total.transpose();
    rhs.noalias() += w * z * target;
  }

  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    throw IdentifiabilityError(fmt::format(
        "coalition design with {} distinct coalitions does not identify {} "
        "attributions",
        design.size(), d));
  }
  const Matrix beta = llt.solve(rhs);
  out.values.resize(d, n);
  out.values.topRows(free) = beta;
  out.values.row(last) = total.transpose() - beta.colwise().sum();
  return out;
}

double exact_shapley(std::span<const double> game, int d, int feature) {
  if (d < 1 || d > kMaxExhaustiveDim) {
    throw CapacityError(fmt::format("exact Shapley supports 1 <= d <= {}, got {}",
                                    kMaxExhaustiveDim, d));
  }
  const std::size_t expected = std::size_t{1} << d;
  if (game.size() != expected) {
    throw InputError(fmt::format("game defines {} of the {} subset values",
                                 game.size(), expected));
  }
  if (feature < 0 || feature >= d) {
    throw InputError(fmt::format("feature {} outside [0, {})", feature, d));
  }
  std::vector<double> coefficient(d);
  for (int s = 0; s < d; ++s) coefficient[s] = 1.0 / (d * binomial(d - 1, s));

  const std::uint64_t bit = std::uint64_t{1} << feature;
  double phi = 0.0;
  for (std::uint64_t mask = 0; mask < expected; ++mask) {
    if (mask & bit) continue;
    const int s = std::popcount(mask);
    phi += coefficient[s] * (game[mask | bit] - game[mask]);
  }
  return phi;
}

DesignPolicy DesignPolicy::parse(const std::string& text, std::uint64_t seed) {
  if (text == "exhaustive") return exhaustive();
  if (text == "auto") return {Kind::automatic, 0, seed};
  if (text == "sampled") return sampled(0, seed);
  const std::string prefix = "sampled:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string number = text.substr(prefix.size());
    std::size_t used = 0;
    int count = 0;
    try {
      count = std::stoi(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != number.size() || count <= 0) {
      throw InputError(fmt::format("bad sample count in design '{}'", text));
    }
    return sampled(count, seed);
  }
  throw InputError(fmt::format(
      "unknown design '{}' (expected exhaustive, auto or sampled:N)", text));
}

CoalitionDesign DesignPolicy::build(int d) const {
  const auto default_count = [d] {
    const double all = std::ldexp(1.0, d) - 2.0;
    return static_cast<int>(std::min<double>(all, kAutoSampleCount));
  };
  switch (kind) {
    case Kind::exhaustive:
      return enumerate_coalitions(d);
    case Kind::automatic:
      if (d <= kAutoExhaustiveDim) return enumerate_coalitions(d);
      [[fallthrough]];
    case Kind::sampled: {
      std::mt19937_64 rng(seed);
      return sample_coalitions(d, count > 0 ? count : default_count(), rng);
    }
  }
  throw InputError("unreachable design kind");
}

std::string DesignPolicy::describe() const {
  switch (kind) {
    case Kind::exhaustive:
      return "exhaustive";
    case Kind::automatic:
      return "auto";
    case Kind::sampled:
      return count > 0 ? fmt::format("sampled:{}", count) : "sampled";
  }
  return "?";
}

std::vector<AttributionMatrix> attribute_many(const ValueFunction& value_function,
                                              const Matrix& alphas,
                                              const Matrix& Xq,
                                              const DesignPolicy& policy,
                                              int jobs) {
  const KernelSpec& spec = value_function.spec();
  const Matrix& x_train = value_function.x_train();
  const int d = spec.dim();
  if (alphas.rows() != x_train.rows()) {
    throw InputError(fmt::format("dual weights have {} rows, training set {}",
                                 alphas.rows(), x_train.rows()));
  }
  if (Xq.cols() != d) {
    throw InputError(fmt::format("queries have {} features, model {}", Xq.cols(), d));
  }
  const Eigen::Index models = alphas.cols();
  const Eigen::Index n_query = Xq.rows();

  const Matrix baseline = baseline_rows(alphas, x_train, spec, n_query);
  const Matrix grand =
      alphas.transpose() *
      kernel_matrix(x_train, Xq, spec, Coalition::full(d)).values;

  std::vector<AttributionMatrix> out;
  out.reserve(models);
  if (d == 1) {
    CoalitionDesign none;
    none.dim = 1;
    none.exhaustive = true;
    for (Eigen::Index k = 0; k < models; ++k) {
      out.push_back(solve_shapley_wls(none, Matrix(0, n_query),
                                      baseline.row(k).transpose(),
                                      grand.row(k).transpose(),
                                      value_function.mode()));
    }
    return out;
  }

  const CoalitionDesign design = policy.build(d);
  // rows[k] is the |design| x n_query value table of model k.
  std::vector<Matrix> rows(models, Matrix(design.size(), n_query));
  parallel_for(design.size(), jobs, [&](std::size_t r) {
    const Matrix values =
        value_rows(alphas, value_function.matrix(Xq, design.coalitions[r]));
    for (Eigen::Index k = 0; k < models; ++k) rows[k].row(r) = values.row(k);
  });
  for (Eigen::Index k = 0; k < models; ++k) {
    out.push_back(solve_shapley_wls(design, rows[k], baseline.row(k).transpose(),
                                    grand.row(k).transpose(),
                                    value_function.mode()));
  }
  return out;
}

AttributionMatrix attribute(const FittedModel& model, const Matrix& Xq,
                            Mode mode, const DesignPolicy& policy, double eta,
                            int jobs) {
  ValueFunction value_function(model.x_train, model.spec, mode, eta);
  return std::move(
      attribute_many(value_function, model.alpha, Xq, policy, jobs).front());
}

}  // namespace rkshap
