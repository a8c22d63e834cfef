#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rkshap/fitted_model.hpp"
#include "rkshap/kernel.hpp"

namespace rkshap {

inline constexpr const char* kLibraryVersion = "0.1.0";

// `count` points log-spaced over [lo, hi], endpoints included.
std::vector<double> log_grid(double lo, double hi, int count);

/// Settings shared by the experiment commands. Serialises to one flat JSON
/// object; keys are the long flag names with '_' for '-'.
struct ExperimentConfig {
  std::string experiment = "banana-shap";
  Eigen::Index n = 1000;
  std::uint64_t seed = 0;
  int repeats = 10;  // seeds seed, seed+1, ..., seed+repeats-1

  // banana-shap / runtime-bench
  std::vector<double> b_values{1, 10, 20, 50, 100};
  double v = 10.0;
  std::vector<Eigen::Index> n_values{100, 500, 1000, 1500, 3000, 5000};
  std::vector<std::string> methods{"rkhs-isv", "rkhs-osv", "mc-interventional",
                                   "gshap-osv"};
  double runtime_b = 1.0;
  double runtime_lambda_f = 1e-3;
  double timeout_seconds = 3600.0;

  // covariate-shift / fairness
  std::vector<double> sigma_values{0, 0.1, 0.5, 1, 1.5};
  std::vector<double> lambda_s_values{0, 0.5, 1, 1.5, 2, 2.5};
  double train_fraction = 0.7;
  int feature = 5;             // regularised / noised feature, 1-based
  int correlated_feature = 4;  // 1-based

  // model selection and attribution
  std::vector<double> lambda_f_grid = log_grid(1e-4, 1.0, 7);
  int cv_folds = 5;
  std::optional<std::vector<double>> lengthscales;  // median heuristic if unset
  double eta = 1e-3;  // used as is when eta_grid is empty
  std::vector<double> eta_grid = log_grid(1e-5, 1e-1, 9);
  std::string design = "auto";
  int mc_count = 200;
  int jobs = 1;
  std::filesystem::path out_dir = ".";

  nlohmann::json to_json() const;
  // Missing keys keep the values already in `base`.
  static ExperimentConfig from_json(const nlohmann::json& doc, ExperimentConfig base);
  static ExperimentConfig from_json(const nlohmann::json& doc);
  // FNV-1a over the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
  std::vector<std::uint64_t> seeds() const;
};

// lambda_f with the lowest mean validation MSE over seeded K folds, scored on
// standardised labels.
double select_lambda_f(const Matrix& X, const Vector& y, const KernelSpec& spec,
                       const std::vector<double>& grid, int folds,
                       std::uint64_t seed);

// eta whose observational value estimate nu_S(x) best predicts the model
// output f(x) on held-out rows, summed over singleton coalitions S. Folds are
// seeded; at most 500 rows are used.
double select_eta(const FittedModel& model, const std::vector<double>& grid, int folds,
                  std::uint64_t seed);

struct BananaRow {
  double b = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  double lambda_f = 0.0;
  double eta = 0.0;
  double r2_pooled = 0.0;
  double r2_x1 = 0.0;
  double r2_x2 = 0.0;
};

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;
};

struct BananaSummaryRow {
  double b = 0.0;
  std::string method;
  SummaryStat r2_pooled;
  SummaryStat r2_x1;
  SummaryStat r2_x2;
};

struct BananaResult {
  std::vector<BananaRow> rows;
  std::vector<BananaSummaryRow> summary;
  double max_efficiency_gap = 0.0;
  // max |phi_rkhs-isv - phi_mc-interventional| over all cells
  double max_isv_identity_gap = 0.0;

  const BananaSummaryRow& find(double b, const std::string& method) const;
};

// `on_progress` runs after each b value completes, with the rows so far.
BananaResult run_banana_shap(
    const ExperimentConfig& cfg,
    const std::function<void(const BananaResult&)>& on_progress = {});
void write_banana_report(const BananaResult& result, const ExperimentConfig& cfg);

struct RuntimeRow {
  std::string method;
  Eigen::Index n = 0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  bool censored = false;
};

struct RuntimeResult {
  std::vector<RuntimeRow> rows;
  double max_efficiency_gap = 0.0;
  bool any_censored() const;
  const RuntimeRow* find(const std::string& method, Eigen::Index n) const;
};

RuntimeResult run_runtime_bench(const ExperimentConfig& cfg);
void write_runtime_report(const RuntimeResult& result, const ExperimentConfig& cfg);

struct CovariateShiftRow {
  double lambda_s = 0.0;
  double sigma = 0.0;
  SummaryStat rmse;
};

struct CovariateShiftResult {
  std::vector<CovariateShiftRow> summary;
  // per seed: rmse[seed][lambda index][sigma index]
  std::vector<std::vector<std::vector<double>>> per_seed;
  const CovariateShiftRow& find(double lambda_s, double sigma) const;
};

CovariateShiftResult run_covariate_shift(const ExperimentConfig& cfg);
void write_covariate_shift_report(const CovariateShiftResult& result,
                                  const ExperimentConfig& cfg);

struct FairnessRow {
  std::string regulariser;  // "isv-reg" or "osv-reg"
  double lambda_s = 0.0;
  int feature = 0;  // 1-based
  std::string mode;
  SummaryStat mean_abs_phi;  // over seeds
  double phi_sd = 0.0;       // spread of phi over test rows, seed-averaged
};

struct FairnessResult {
  std::vector<FairnessRow> summary;
  double max_efficiency_gap = 0.0;
  const FairnessRow& find(const std::string& regulariser, double lambda_s,
                          int feature, const std::string& mode) const;
};

FairnessResult run_fairness(const ExperimentConfig& cfg);
void write_fairness_report(const FairnessResult& result, const ExperimentConfig& cfg);

}  // namespace rkshap
