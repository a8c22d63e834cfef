#include "rkshap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "rkshap/baselines.hpp"
#include "rkshap/datasets.hpp"
#include "rkshap/errors.hpp"
#include "rkshap/io.hpp"
#include "rkshap/metrics.hpp"
#include "rkshap/models.hpp"
#include "rkshap/parallel.hpp"
#include "rkshap/shapley.hpp"

namespace rkshap {

namespace {

using nlohmann::json;

SummaryStat summarise(const std::vector<double>& values) {
  SummaryStat s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

double efficiency_gap(const AttributionMatrix& phi) {
  if (phi.values.cols() == 0) return 0.0;
  const Vector gap = phi.values.colwise().sum().transpose() - (phi.grand - phi.baseline);
  return gap.cwiseAbs().maxCoeff();
}

KernelSpec choose_kernel(const ExperimentConfig& cfg, const Matrix& X,
                         std::uint64_t seed) {
  if (cfg.lengthscales) {
    if (static_cast<Eigen::Index>(cfg.lengthscales->size()) != X.cols()) {
      throw InputError(fmt::format("{} lengthscales given for {} features",
                                   cfg.lengthscales->size(), X.cols()));
    }
    return KernelSpec(*cfg.lengthscales);
  }
  return KernelSpec(median_heuristic(X, seed));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::uint64_t out[1];
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out[0] = (std::uint64_t{words[0]} << 32) | words[1];
  return out[0];
}

double choose_eta(const ExperimentConfig& cfg, const FittedModel& model, std::uint64_t seed) {
  if (cfg.eta_grid.empty()) return cfg.eta;
  return select_eta(model, cfg.eta_grid, cfg.cv_folds, derive_seed(seed, 3));
}

int zero_based(int feature, int d, const char* what) {
  if (feature < 1 || feature > d) {
    throw InputError(fmt::format("{} {} outside 1..{}", what, feature, d));
  }
  return feature - 1;
}

std::ofstream open_report(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = cfg.out_dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& files,
                    json extra) {
  json doc;
  doc["experiment"] = cfg.experiment;
  doc["version"] = kLibraryVersion;
  doc["config_hash"] = cfg.hash();
  doc["config"] = cfg.to_json();
  doc["seeds"] = cfg.seeds();
  doc["files"] = files;
  for (auto& [key, value] : extra.items()) doc[key] = value;
  auto out = open_report(cfg, cfg.experiment + ".json");
  out << doc.dump(2) << '\n';
}

std::string num(double value) { return format_double(value); }

}  // namespace

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw InputError(fmt::format("bad log grid [{}, {}] x {}", lo, hi, count));
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int k = 0; k < count; ++k) {
    grid[k] = std::pow(10.0, a + (b - a) * k / (count - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["experiment"] = experiment;
  doc["n"] = n;
  doc["seed"] = seed;
  doc["repeats"] = repeats;
  doc["b_values"] = b_values;
  doc["v"] = v;
  doc["n_values"] = n_values;
  doc["methods"] = methods;
  doc["runtime_b"] = runtime_b;
  doc["runtime_lambda_f"] = runtime_lambda_f;
  doc["timeout_seconds"] = timeout_seconds;
  doc["sigma_values"] = sigma_values;
  doc["lambda_s_values"] = lambda_s_values;
  doc["train_fraction"] = train_fraction;
  doc["feature"] = feature;
  doc["correlated_feature"] = correlated_feature;
  doc["lambda_f_grid"] = lambda_f_grid;
  doc["cv_folds"] = cv_folds;
  doc["lengthscales"] = lengthscales ? json(*lengthscales) : json(nullptr);
  doc["eta"] = eta;
  doc["eta_grid"] = eta_grid;
  doc["design"] = design;
  doc["mc_count"] = mc_count;
  // jobs and out_dir do not change results and stay out of the hash.
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc, ExperimentConfig base) {
  if (!doc.is_object()) throw InputError("config must be a flat JSON object");
  ExperimentConfig cfg = std::move(base);
  const auto read = [&](const char* key, auto& field) {
    if (doc.contains(key)) {
      try {
        doc.at(key).get_to(field);
      } catch (const json::exception& e) {
        throw InputError(fmt::format("config key '{}': {}", key, e.what()));
      }
    }
  };
  static const std::vector<std::string> known{
      "experiment", "n", "seed", "repeats", "b_values", "v", "n_values", "methods",
      "runtime_b", "runtime_lambda_f", "timeout_seconds", "sigma_values",
      "lambda_s_values", "train_fraction", "feature", "correlated_feature",
      "lambda_f_grid", "cv_folds", "lengthscales", "eta", "eta_grid", "design", "mc_count",
      "jobs", "out_dir"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError(fmt::format("unknown config key '{}'", key));
    }
  }
  read("experiment", cfg.experiment);
  read("n", cfg.n);
  read("seed", cfg.seed);
  read("repeats", cfg.repeats);
  read("b_values", cfg.b_values);
  read("v", cfg.v);
  read("n_values", cfg.n_values);
  read("methods", cfg.methods);
  read("runtime_b", cfg.runtime_b);
  read("runtime_lambda_f", cfg.runtime_lambda_f);
  read("timeout_seconds", cfg.timeout_seconds);
  read("sigma_values", cfg.sigma_values);
  read("lambda_s_values", cfg.lambda_s_values);
  read("train_fraction", cfg.train_fraction);
  read("feature", cfg.feature);
  read("correlated_feature", cfg.correlated_feature);
  read("lambda_f_grid", cfg.lambda_f_grid);
  read("cv_folds", cfg.cv_folds);
  if (doc.contains("lengthscales")) {
    if (doc["lengthscales"].is_null()) {
      cfg.lengthscales.reset();
    } else {
      std::vector<double> scales;
      read("lengthscales", scales);
      cfg.lengthscales = scales;
    }
  }
  read("eta", cfg.eta);
  read("eta_grid", cfg.eta_grid);
  read("design", cfg.design);
  read("mc_count", cfg.mc_count);
  read("jobs", cfg.jobs);
  if (doc.contains("out_dir")) {
    cfg.out_dir = doc.at("out_dir").get<std::string>();
  }
  const auto finite = [](const std::vector<double>& values, const char* key) {
    for (double x : values) {
      if (!std::isfinite(x)) throw InputError(fmt::format("non-finite value in {}", key));
    }
  };
  finite(cfg.b_values, "b_values");
  finite(cfg.sigma_values, "sigma_values");
  finite(cfg.lambda_s_values, "lambda_s_values");
  finite(cfg.lambda_f_grid, "lambda_f_grid");
  finite(cfg.eta_grid, "eta_grid");
  const auto at_least = [](const std::vector<double>& values, double lo, bool strict,
                           const char* key) {
    for (double x : values) {
      if (strict ? !(x > lo) : !(x >= lo)) {
        throw InputError(fmt::format("{} holds {}, which is out of range", key, x));
      }
    }
  };
  at_least(cfg.b_values, 0.0, true, "b_values");
  at_least(cfg.sigma_values, 0.0, false, "sigma_values");
  at_least(cfg.lambda_s_values, 0.0, false, "lambda_s_values");
  at_least(cfg.lambda_f_grid, 0.0, true, "lambda_f_grid");
  at_least(cfg.eta_grid, 0.0, true, "eta_grid");
  if (cfg.n < 2 || cfg.repeats < 1 || cfg.mc_count < 1 || cfg.jobs < 1 ||
      !(cfg.timeout_seconds > 0.0) || !(cfg.eta > 0.0) || !(cfg.v > 0.0) ||
      !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw InputError("config has a non-positive size, count, budget or scale");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  return from_json(doc, ExperimentConfig{});
}

std::string ExperimentConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  std::vector<std::uint64_t> out(std::max(repeats, 0));
  std::iota(out.begin(), out.end(), seed);
  return out;
}

double select_lambda_f(const Matrix& X, const Vector& y, const KernelSpec& spec,
                       const std::vector<double>& grid, int folds,
                       std::uint64_t seed) {
  if (grid.empty()) throw InputError("lambda_f grid is empty");
  const Eigen::Index n = X.rows();
  if (folds < 2 || folds > n) {
    throw InputError(fmt::format("need 2 <= folds <= {}, got {}", n, folds));
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // Selection runs on standardised labels so the grid means the same thing
  // for every target scale.
  Vector z = y.array() - y.mean();
  const double scale = std::sqrt(z.squaredNorm() / static_cast<double>(n));
  if (scale > 0.0) z /= scale;

  const Matrix K = kernel_matrix(X, X, spec, Coalition::full(spec.dim())).values;
  std::vector<double> error(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> valid;
    for (Eigen::Index i = 0; i < n; ++i) {
      (i % folds == f ? valid : train).push_back(order[i]);
    }
    const Matrix K_train = K(train, train);
    const Matrix K_valid = K(valid, train);
    const Vector y_train = z(train);
    const Vector y_valid = z(valid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Vector alpha = solve_psd(K_train, y_train, grid[g]);
      error[g] += (K_valid * alpha - y_valid).squaredNorm() / static_cast<double>(n);
    }
  }
  return grid[std::min_element(error.begin(), error.end()) - error.begin()];
}

double select_eta(const FittedModel& model, const std::vector<double>& grid, int folds,
                  std::uint64_t seed) {
  if (grid.empty()) throw InputError("eta grid is empty");
  const int d = model.dim();
  if (d < 2) throw InputError("eta selection needs at least two features");
  const Matrix& X = model.x_train;
  std::vector<Eigen::Index> order(X.rows());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  constexpr Eigen::Index kMaxRows = 500;
  if (static_cast<Eigen::Index>(order.size()) > kMaxRows) order.resize(kMaxRows);
  const Eigen::Index n = static_cast<Eigen::Index>(order.size());
  if (folds < 2 || folds > n) {
    throw InputError(fmt::format("need 2 <= folds <= {}, got {}", n, folds));
  }
  const Matrix Xs = X(order, Eigen::all);
  const Vector target = predict(model, Xs);

  // For a query x and fold-train rows T, the estimate is
  //   nu(x) = sum_j alpha_j k_S(x_j, x) sum_{l in T} beta_l(x) k_C(x_j, x_l),
  //   beta(x) = (K_S[T,T] + |T| eta I)^{-1} k_S(X_T, x),
  // scored by squared error against f(x) on held-out rows.
  std::vector<double> loss(grid.size(), 0.0);
  for (int c = 0; c < d; ++c) {
    const Coalition S = Coalition::of(d, {c});
    const Matrix KS = kernel_matrix(Xs, Xs, model.spec, S).values;
    const Matrix KS_model = kernel_matrix(X, Xs, model.spec, S).values;
    const Matrix KC_model = kernel_matrix(X, Xs, model.spec, S.complement()).values;
    for (int f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> train;
      std::vector<Eigen::Index> valid;
      for (Eigen::Index i = 0; i < n; ++i) (i % folds == f ? valid : train).push_back(i);
      const double m = static_cast<double>(train.size());
      const Matrix KS_tt = KS(train, train);
      const Matrix KS_tv = KS(train, valid);
      const Matrix weighted =
          model.alpha.asDiagonal() * Matrix(KS_model(Eigen::all, valid));
      const Matrix KC_mt = KC_model(Eigen::all, train);
      const Vector f_valid = target(valid);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const Matrix B = solve_psd(KS_tt, KS_tv, m * grid[g]);
        const Vector nu = (weighted.cwiseProduct(KC_mt * B)).colwise().sum().transpose();
        loss[g] += (nu - f_valid).squaredNorm();
      }
    }
  }
  return grid[std::min_element(loss.begin(), loss.end()) - loss.begin()];
}

const BananaSummaryRow& BananaResult::find(double b, const std::string& method) const {
  for (const auto& row : summary) {
    if (row.b == b && row.method == method) return row;
  }
  throw InputError(fmt::format("no banana summary for b={} method={}", b, method));
}

BananaResult run_banana_shap(const ExperimentConfig& cfg,
                             const std::function<void(const BananaResult&)>& on_progress) {
  static const std::vector<std::string> kMethods{"rkhs-isv", "rkhs-osv",
                                                 "mc-interventional", "gshap-osv"};
  const auto seeds = cfg.seeds();
  const DesignPolicy policy = DesignPolicy::parse(cfg.design, cfg.seed);

  struct Cell {
    std::vector<BananaRow> rows;
    double efficiency = 0.0;
    double identity = 0.0;
  };

  BananaResult result;
  for (double b : cfg.b_values) {
    std::vector<Cell> cells(seeds.size());
    parallel_for(seeds.size(), cfg.jobs, [&](std::size_t s) {
      const std::uint64_t seed = seeds[s];
      const Dataset data = sample_banana({cfg.n, b, cfg.v, seed});
      const KernelSpec spec = choose_kernel(cfg, data.X, seed);
      const double lambda_f =
          select_lambda_f(data.X, data.y, spec, cfg.lambda_f_grid, cfg.cv_folds, seed);
      const FittedModel model = fit_krr(data.X, data.y, spec, lambda_f);
      const double eta = choose_eta(cfg, model, seed);

      const AttributionMatrix isv_truth =
          banana_ground_truth(data.X, b, cfg.v, Mode::interventional);
      const AttributionMatrix osv_truth =
          banana_ground_truth(data.X, b, cfg.v, Mode::observational);

      const AttributionMatrix rkhs_isv =
          attribute(model, data.X, Mode::interventional, policy, eta);
      const AttributionMatrix rkhs_osv =
          attribute(model, data.X, Mode::observational, policy, eta);
      const AttributionMatrix mc_isv =
          mc_interventional_attribution(model, data.X, policy, data.X);
      const AttributionMatrix gshap = gshap_osv(model, data.X, policy,
                                                fit_gaussian(data.X), cfg.mc_count,
                                                derive_seed(seed, 0x65));

      Cell& cell = cells[s];
      const std::pair<const char*, const AttributionMatrix*> estimates[] = {
          {"rkhs-isv", &rkhs_isv},
          {"rkhs-osv", &rkhs_osv},
          {"mc-interventional", &mc_isv},
          {"gshap-osv", &gshap}};
      for (const auto& [name, phi] : estimates) {
        const AttributionMatrix& truth =
            phi->mode == Mode::interventional ? isv_truth : osv_truth;
        BananaRow row;
        row.b = b;
        row.method = name;
        row.seed = seed;
        row.lambda_f = lambda_f;
        row.eta = eta;
        row.r2_pooled = pooled_r_squared(truth.values, phi->values);
        row.r2_x1 = r_squared(truth.values.row(0).transpose(),
                              phi->values.row(0).transpose());
        row.r2_x2 = r_squared(truth.values.row(1).transpose(),
                              phi->values.row(1).transpose());
        cell.rows.push_back(row);
        cell.efficiency = std::max(cell.efficiency, efficiency_gap(*phi));
      }
      cell.identity = (rkhs_isv.values - mc_isv.values).cwiseAbs().maxCoeff();
    });

    for (const std::string& method : kMethods) {
      std::vector<double> pooled;
      std::vector<double> x1;
      std::vector<double> x2;
      for (const Cell& cell : cells) {
        for (const BananaRow& row : cell.rows) {
          if (row.method != method) continue;
          result.rows.push_back(row);
          pooled.push_back(row.r2_pooled);
          x1.push_back(row.r2_x1);
          x2.push_back(row.r2_x2);
        }
      }
      result.summary.push_back(
          {b, method, summarise(pooled), summarise(x1), summarise(x2)});
    }
    for (const Cell& cell : cells) {
      result.max_efficiency_gap = std::max(result.max_efficiency_gap, cell.efficiency);
      result.max_isv_identity_gap = std::max(result.max_isv_identity_gap, cell.identity);
    }
    if (on_progress) on_progress(result);
  }
  return result;
}

void write_banana_report(const BananaResult& result, const ExperimentConfig& cfg) {
  {
    auto out = open_report(cfg, "banana_shap.csv");
    out << "b,method,seed,lambda_f,eta,r2_pooled,r2_x1,r2_x2\n";
    for (const BananaRow& r : result.rows) {
      out << num(r.b) << ',' << r.method << ',' << r.seed << ',' << num(r.lambda_f) << ','
          << num(r.eta) << ',' << num(r.r2_pooled) << ',' << num(r.r2_x1) << ',' << num(r.r2_x2) << '\n';
    }
  }
  {
    auto out = open_report(cfg, "banana_shap_summary.csv");
    out << "b,method,r2_pooled_mean,r2_pooled_sd,r2_x1_mean,r2_x1_sd,r2_x2_mean,"
           "r2_x2_sd\n";
    for (const BananaSummaryRow& r : result.summary) {
      out << num(r.b) << ',' << r.method << ',' << num(r.r2_pooled.mean) << ','
          << num(r.r2_pooled.sd) << ',' << num(r.r2_x1.mean) << ',' << num(r.r2_x1.sd)
          << ',' << num(r.r2_x2.mean) << ',' << num(r.r2_x2.sd) << '\n';
    }
  }
  write_manifest(cfg, {"banana_shap.csv", "banana_shap_summary.csv"},
                 {{"max_efficiency_gap", result.max_efficiency_gap},
                  {"max_isv_identity_gap", result.max_isv_identity_gap}});
}

bool RuntimeResult::any_censored() const {
  return std::any_of(rows.begin(), rows.end(), [](const RuntimeRow& r) { return r.censored; });
}

const RuntimeRow* RuntimeResult::find(const std::string& method, Eigen::Index n) const {
  for (const auto& row : rows) {
    if (row.method == method && row.n == n) return &row;
  }
  return nullptr;
}

RuntimeResult run_runtime_bench(const ExperimentConfig& cfg) {
  const DesignPolicy policy = DesignPolicy::parse(cfg.design, cfg.seed);
  for (const std::string& m : cfg.methods) {
    if (m != "rkhs-isv" && m != "rkhs-osv" && m != "mc-interventional" &&
        m != "gshap-osv") {
      throw InputError(fmt::format("unknown runtime method '{}'", m));
    }
  }
  RuntimeResult result;
  std::vector<std::string> censored_methods;
  for (Eigen::Index n : cfg.n_values) {
    const Dataset data = sample_banana({n, cfg.runtime_b, cfg.v, cfg.seed});
    const KernelSpec spec = choose_kernel(cfg, data.X, cfg.seed);
    const FittedModel model = fit_krr(data.X, data.y, spec, cfg.runtime_lambda_f);
    for (const std::string& method : cfg.methods) {
      RuntimeRow row{method, n, cfg.timeout_seconds, cfg.seed, true};
      if (std::find(censored_methods.begin(), censored_methods.end(), method) !=
          censored_methods.end()) {
        result.rows.push_back(row);
        continue;
      }
      const Deadline deadline =
          std::chrono::steady_clock::now() +
          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
              std::chrono::duration<double>(cfg.timeout_seconds));
      try {
        auto run = [&]() -> AttributionMatrix {
          if (method == "rkhs-isv") {
            return attribute(model, data.X, Mode::interventional, policy, cfg.eta, cfg.jobs);
          }
          if (method == "rkhs-osv") {
            return attribute(model, data.X, Mode::observational, policy, cfg.eta, cfg.jobs);
          }
          if (method == "mc-interventional") {
            return mc_interventional_attribution(model, data.X, policy, data.X, cfg.jobs,
                                                 deadline);
          }
          return gshap_osv(model, data.X, policy, fit_gaussian(data.X), cfg.mc_count,
                           cfg.seed, cfg.jobs, deadline);
        };
        auto measured = timed(run);
        row.seconds = measured.wall_seconds;
        row.censored = measured.wall_seconds > cfg.timeout_seconds;
        result.max_efficiency_gap =
            std::max(result.max_efficiency_gap, efficiency_gap(measured.result));
      } catch (const TimeoutError&) {
        row.censored = true;
      }
      if (row.censored) {
        row.seconds = cfg.timeout_seconds;
        censored_methods.push_back(method);
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_runtime_report(const RuntimeResult& result, const ExperimentConfig& cfg) {
  auto out = open_report(cfg, "runtime_bench.csv");
  out << "method,n,seconds,seed,censored\n";
  for (const RuntimeRow& r : result.rows) {
    out << r.method << ',' << r.n << ',' << num(r.seconds) << ',' << r.seed << ','
        << (r.censored ? 1 : 0) << '\n';
  }
  write_manifest(cfg, {"runtime_bench.csv"},
                 {{"max_efficiency_gap", result.max_efficiency_gap},
                  {"censored", result.any_censored()}});
}

const CovariateShiftRow& CovariateShiftResult::find(double lambda_s, double sigma) const {
  for (const auto& row : summary) {
    if (row.lambda_s == lambda_s && row.sigma == sigma) return row;
  }
  throw InputError(fmt::format("no covariate-shift row for lambda_s={} sigma={}",
                               lambda_s, sigma));
}

CovariateShiftResult run_covariate_shift(const ExperimentConfig& cfg) {
  const auto seeds = cfg.seeds();
  const int feature = zero_based(cfg.feature, 5, "feature");
  CovariateShiftResult result;
  result.per_seed.resize(seeds.size());
  parallel_for(seeds.size(), cfg.jobs, [&](std::size_t s) {
    const std::uint64_t seed = seeds[s];
    const Dataset data = sample_correlated_gaussian(cfg.n, seed);
    const Split split = train_test_split(data, cfg.train_fraction, derive_seed(seed, 1));
    const KernelSpec spec = choose_kernel(cfg, split.train.X, seed);
    const double lambda_f = select_lambda_f(split.train.X, split.train.y, spec,
                                            cfg.lambda_f_grid, cfg.cv_folds, seed);
    const GammaMatrix gamma = build_gamma(split.train.X, spec, feature,
                                          Mode::interventional, cfg.eta,
                                          derive_seed(seed, 2));
    std::vector<Matrix> noisy;
    for (std::size_t k = 0; k < cfg.sigma_values.size(); ++k) {
      noisy.push_back(inject_noise(split.test.X, feature, cfg.sigma_values[k],
                                   derive_seed(seed, 100 + k)));
    }
    auto& table = result.per_seed[s];
    for (double lambda_s : cfg.lambda_s_values) {
      const FittedModel model = fit_shapley_reg_krr(split.train.X, split.train.y, spec,
                                                    lambda_f, lambda_s, gamma);
      std::vector<double> row;
      for (const Matrix& Xt : noisy) row.push_back(rmse(split.test.y, predict(model, Xt)));
      table.push_back(std::move(row));
    }
  });
  for (std::size_t l = 0; l < cfg.lambda_s_values.size(); ++l) {
    for (std::size_t k = 0; k < cfg.sigma_values.size(); ++k) {
      std::vector<double> values;
      for (const auto& table : result.per_seed) values.push_back(table[l][k]);
      result.summary.push_back(
          {cfg.lambda_s_values[l], cfg.sigma_values[k], summarise(values)});
    }
  }
  return result;
}

void write_covariate_shift_report(const CovariateShiftResult& result,
                                  const ExperimentConfig& cfg) {
  auto out = open_report(cfg, "covariate_shift.csv");
  out << "lambda_s,sigma,rmse_mean,rmse_sd\n";
  for (const auto& r : result.summary) {
    out << num(r.lambda_s) << ',' << num(r.sigma) << ',' << num(r.rmse.mean) << ','
        << num(r.rmse.sd) << '\n';
  }
  write_manifest(cfg, {"covariate_shift.csv"}, json::object());
}

const FairnessRow& FairnessResult::find(const std::string& regulariser, double lambda_s,
                                        int feature, const std::string& mode) const {
  for (const auto& row : summary) {
    if (row.regulariser == regulariser && row.lambda_s == lambda_s &&
        row.feature == feature && row.mode == mode) {
      return row;
    }
  }
  throw InputError(fmt::format("no fairness row for {} lambda_s={} x{} {}", regulariser,
                               lambda_s, feature, mode));
}

FairnessResult run_fairness(const ExperimentConfig& cfg) {
  const auto seeds = cfg.seeds();
  const int sensitive = zero_based(cfg.feature, 5, "feature");
  const int correlated = zero_based(cfg.correlated_feature, 5, "correlated_feature");
  const DesignPolicy policy = DesignPolicy::parse(cfg.design, cfg.seed);
  const Mode regularisers[] = {Mode::interventional, Mode::observational};
  const Mode modes[] = {Mode::interventional, Mode::observational};
  const int features[] = {correlated, sensitive};
  const std::size_t n_lambda = cfg.lambda_s_values.size();

  // stats[s][reg][lambda][mode][feature] = {mean |phi|, sd phi}
  using Stats = std::array<std::array<std::pair<double, double>, 2>, 2>;
  std::vector<std::vector<std::vector<Stats>>> stats(
      seeds.size(), std::vector<std::vector<Stats>>(2, std::vector<Stats>(n_lambda)));
  std::vector<double> efficiency(seeds.size(), 0.0);

  parallel_for(seeds.size(), cfg.jobs, [&](std::size_t s) {
    const std::uint64_t seed = seeds[s];
    const Dataset data = sample_correlated_gaussian(cfg.n, seed);
    const Split split = train_test_split(data, cfg.train_fraction, derive_seed(seed, 1));
    const KernelSpec spec = choose_kernel(cfg, split.train.X, seed);
    const double lambda_f = select_lambda_f(split.train.X, split.train.y, spec,
                                            cfg.lambda_f_grid, cfg.cv_folds, seed);
    const double eta =
        choose_eta(cfg, fit_krr(split.train.X, split.train.y, spec, lambda_f), seed);
    // Column r * n_lambda + l holds the model of regulariser r at lambda l.
    Matrix alphas(split.train.size(), 2 * n_lambda);
    for (int r = 0; r < 2; ++r) {
      const GammaMatrix gamma = build_gamma(split.train.X, spec, sensitive,
                                            regularisers[r], eta,
                                            derive_seed(seed, 2 + r));
      for (std::size_t l = 0; l < n_lambda; ++l) {
        alphas.col(r * n_lambda + l) =
            fit_shapley_reg_krr(split.train.X, split.train.y, spec, lambda_f,
                                cfg.lambda_s_values[l], gamma)
                .alpha;
      }
    }
    for (int m = 0; m < 2; ++m) {
      const ValueFunction vf(split.train.X, spec, modes[m], eta);
      const auto phis = attribute_many(vf, alphas, split.test.X, policy);
      for (int r = 0; r < 2; ++r) {
        for (std::size_t l = 0; l < n_lambda; ++l) {
          const AttributionMatrix& phi = phis[r * n_lambda + l];
          efficiency[s] = std::max(efficiency[s], efficiency_gap(phi));
          for (int f = 0; f < 2; ++f) {
            const Eigen::ArrayXd row = phi.values.row(features[f]).transpose().array();
            const double mean_abs = row.abs().mean();
            const double sd =
                std::sqrt((row - row.mean()).square().sum() /
                          std::max<double>(1.0, static_cast<double>(row.size() - 1)));
            stats[s][r][l][m][f] = {mean_abs, sd};
          }
        }
      }
    }
  });

  FairnessResult result;
  for (double e : efficiency) result.max_efficiency_gap = std::max(result.max_efficiency_gap, e);
  for (int r = 0; r < 2; ++r) {
    for (std::size_t l = 0; l < n_lambda; ++l) {
      for (int f = 0; f < 2; ++f) {
        for (int m = 0; m < 2; ++m) {
          std::vector<double> means;
          double sd_sum = 0.0;
          for (std::size_t s = 0; s < seeds.size(); ++s) {
            means.push_back(stats[s][r][l][m][f].first);
            sd_sum += stats[s][r][l][m][f].second;
          }
          FairnessRow row;
          row.regulariser = regularisers[r] == Mode::interventional ? "isv-reg" : "osv-reg";
          row.lambda_s = cfg.lambda_s_values[l];
          row.feature = features[f] + 1;
          row.mode = std::string(to_string(modes[m]));
          row.mean_abs_phi = summarise(means);
          row.phi_sd = seeds.empty() ? 0.0 : sd_sum / static_cast<double>(seeds.size());
          result.summary.push_back(row);
        }
      }
    }
  }
  return result;
}

void write_fairness_report(const FairnessResult& result, const ExperimentConfig& cfg) {
  auto out = open_report(cfg, "fairness.csv");
  out << "regulariser,lambda_s,feature,mode,mean_abs_phi,sd,phi_sd\n";
  for (const auto& r : result.summary) {
    out << r.regulariser << ',' << num(r.lambda_s) << ",x" << r.feature << ',' << r.mode
        << ',' << num(r.mean_abs_phi.mean) << ',' << num(r.mean_abs_phi.sd) << ','
        << num(r.phi_sd) << '\n';
  }
  write_manifest(cfg, {"fairness.csv"}, {{"max_efficiency_gap", result.max_efficiency_gap}});
}

}  // namespace rkshap
