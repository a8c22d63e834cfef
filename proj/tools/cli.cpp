#include "cli.hpp"

#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "rkshap/datasets.hpp"
#include "rkshap/errors.hpp"
#include "rkshap/experiments.hpp"
#include "rkshap/io.hpp"
#include "rkshap/models.hpp"
#include "rkshap/shapley.hpp"

namespace rkshap::cli {

namespace {

// Flags shared by every subcommand. Only flags the user actually passed
// override the config file.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string mode = "isv";
  double eta = kDefaultEta;
  std::string design = "auto";
  int jobs = 1;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_dir_opt = nullptr;
  CLI::Option* eta_opt = nullptr;
  CLI::Option* design_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--config", c.config_path, "flat JSON config file")
      ->check(CLI::ExistingFile);
  c.seed_opt = app.add_option("--seed", c.seed, "base seed");
  c.out_dir_opt = app.add_option("--out-dir", c.out_dir, "report directory");
  app.add_option("--mode", c.mode, "value function")
      ->check(CLI::IsMember({"isv", "osv", "interventional", "observational"}));
  c.eta_opt = app.add_option("--eta", c.eta, "conditional-operator regulariser");
  c.design_opt =
      app.add_option("--design", c.design, "exhaustive, auto, sampled or sampled:N");
  c.jobs_opt = app.add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

struct ExperimentFlags {
  Eigen::Index n = 0;
  int repeats = 0;
  std::vector<double> b_values;
  std::vector<Eigen::Index> n_values;
  std::vector<std::string> methods;
  std::vector<double> sigma_values;
  std::vector<double> lambda_s_values;
  std::vector<double> lambda_f_grid;
  std::vector<double> lengthscales;
  std::vector<double> eta_grid;
  double timeout = 0.0;
  int mc_count = 0;
  int cv_folds = 0;
  std::vector<CLI::Option*> options;
};

void add_experiment_flags(CLI::App& app, ExperimentFlags& f) {
  f.options = {
      app.add_option("--n", f.n, "sample size"),
      app.add_option("--repeats", f.repeats, "number of consecutive seeds"),
      app.add_option("--b-values", f.b_values, "banana curvature grid")->delimiter(','),
      app.add_option("--n-values", f.n_values, "runtime sample sizes")->delimiter(','),
      app.add_option("--methods", f.methods, "runtime methods")->delimiter(','),
      app.add_option("--sigma-values", f.sigma_values, "test noise grid")->delimiter(','),
      app.add_option("--lambda-s-values", f.lambda_s_values, "Shapley penalty grid")
          ->delimiter(','),
      app.add_option("--lambda-f-grid", f.lambda_f_grid, "ridge CV grid")->delimiter(','),
      app.add_option("--lengthscales", f.lengthscales, "fixed RBF lengthscales")
          ->delimiter(','),
      app.add_option("--timeout", f.timeout, "per-cell budget in seconds"),
      app.add_option("--mc-count", f.mc_count, "Gaussian draws per coalition"),
      app.add_option("--cv-folds", f.cv_folds, "cross-validation folds"),
      app.add_option("--eta-grid", f.eta_grid, "eta CV grid; --eta alone fixes eta")
          ->delimiter(','),
  };
}

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot read config '{}'", path));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("config '{}': {}", path, e.what()));
  }
}

ExperimentConfig build_config(const std::string& experiment, const Common& c,
                              const ExperimentFlags& f) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (!c.config_path.empty()) {
    cfg = ExperimentConfig::from_json(read_config_file(c.config_path), cfg);
    if (cfg.experiment != experiment) {
      throw InputError(fmt::format("config is for '{}', not '{}'", cfg.experiment,
                                   experiment));
    }
  }
  const auto given = [](const CLI::Option* o) { return o && o->count() > 0; };
  if (given(c.seed_opt)) cfg.seed = c.seed;
  if (given(c.out_dir_opt)) cfg.out_dir = c.out_dir;
  if (given(c.eta_opt)) {
    cfg.eta = c.eta;
    cfg.eta_grid.clear();
  }
  if (given(c.design_opt)) cfg.design = c.design;
  if (given(c.jobs_opt)) cfg.jobs = c.jobs;
  const auto& o = f.options;
  if (given(o[0])) cfg.n = f.n;
  if (given(o[1])) cfg.repeats = f.repeats;
  if (given(o[2])) cfg.b_values = f.b_values;
  if (given(o[3])) cfg.n_values = f.n_values;
  if (given(o[4])) cfg.methods = f.methods;
  if (given(o[5])) cfg.sigma_values = f.sigma_values;
  if (given(o[6])) cfg.lambda_s_values = f.lambda_s_values;
  if (given(o[7])) cfg.lambda_f_grid = f.lambda_f_grid;
  if (given(o[8])) cfg.lengthscales = f.lengthscales;
  if (given(o[9])) cfg.timeout_seconds = f.timeout;
  if (given(o[10])) cfg.mc_count = f.mc_count;
  if (given(o[11])) cfg.cv_folds = f.cv_folds;
  if (given(o[12])) cfg.eta_grid = f.eta_grid;
  // Round-trip through JSON so flag values get the same validation as files.
  return ExperimentConfig::from_json(cfg.to_json(), cfg);
}

void check_schema(const Dataset& data, const FittedModel& model) {
  const int d = model.dim();
  if (data.dim() > d) {
    throw InputError(fmt::format("unexpected column '{}': model has {} features",
                                 data.feature_names[d], d));
  }
  if (data.dim() < d) {
    throw InputError(fmt::format("missing column 'x{}': model has {} features",
                                 data.dim() + 1, d));
  }
}

void write_output(const std::string& path, const std::function<void(std::ostream&)>& body,
                  std::ostream& out) {
  if (path.empty() || path == "-") {
    body(out);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError(fmt::format("cannot write '{}'", path));
  body(file);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shapley attribution for kernel ridge regression models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  // explain
  Common explain_common;
  std::string model_path;
  std::string data_path;
  std::string output_path;
  auto* explain = app.add_subcommand("explain", "attribute every row of a CSV");
  add_common(*explain, explain_common);
  explain->add_option("--model", model_path, "model JSON")->required();
  explain->add_option("--data", data_path, "query CSV")->required();
  explain->add_option("--output", output_path, "attribution CSV, '-' for stdout");

  // fit
  Common fit_common;
  std::string fit_data;
  std::string fit_output;
  double fit_lambda_f = 0.0;
  std::vector<double> fit_lengthscales;
  auto* fit = app.add_subcommand("fit", "fit kernel ridge regression to a CSV");
  add_common(*fit, fit_common);
  fit->add_option("--data", fit_data, "training CSV with a y column")->required();
  fit->add_option("--output", fit_output, "model JSON")->required();
  auto* fit_lambda_opt =
      fit->add_option("--lambda-f", fit_lambda_f, "ridge penalty; CV when omitted");
  fit->add_option("--lengthscales", fit_lengthscales, "fixed lengthscales")
      ->delimiter(',');

  // generate
  Common gen_common;
  std::string gen_dataset = "banana";
  Eigen::Index gen_n = 1000;
  double gen_b = 1.0;
  double gen_v = 10.0;
  std::string gen_output;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset CSV");
  add_common(*generate, gen_common);
  generate->add_option("--dataset", gen_dataset)
      ->check(CLI::IsMember({"banana", "correlated-gaussian"}));
  generate->add_option("--n", gen_n);
  generate->add_option("--b", gen_b);
  generate->add_option("--v", gen_v);
  generate->add_option("--output", gen_output, "CSV path, '-' for stdout");

  // experiments
  const std::vector<std::string> experiment_names{"banana-shap", "runtime-bench",
                                                  "covariate-shift", "fairness"};
  std::vector<Common> exp_common(experiment_names.size());
  std::vector<ExperimentFlags> exp_flags(experiment_names.size());
  std::vector<CLI::App*> exp_apps;
  for (std::size_t k = 0; k < experiment_names.size(); ++k) {
    auto* sub = app.add_subcommand(experiment_names[k], "run the " + experiment_names[k] +
                                                            " experiment");
    add_common(*sub, exp_common[k]);
    add_experiment_flags(*sub, exp_flags[k]);
    exp_apps.push_back(sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (explain->parsed()) {
      const Common& c = explain_common;
      const FittedModel model = read_model_json(std::filesystem::path(model_path));
      const Dataset data = read_dataset_csv(std::filesystem::path(data_path));
      check_schema(data, model);
      const Mode mode = parse_mode(c.mode);
      const DesignPolicy policy = DesignPolicy::parse(c.design, c.seed);
      const AttributionMatrix phi = attribute(model, data.X, mode, policy, c.eta, c.jobs);
      write_output(output_path,
                   [&](std::ostream& o) { write_attribution_csv(phi, data.feature_names, o); },
                   out);
      return kSuccess;
    }
    if (fit->parsed()) {
      const Dataset data = read_dataset_csv(std::filesystem::path(fit_data));
      if (data.y.size() != data.size()) {
        throw InputError("training CSV needs a trailing 'y' column");
      }
      const KernelSpec spec = fit_lengthscales.empty()
                                  ? KernelSpec(median_heuristic(data.X, fit_common.seed))
                                  : KernelSpec(fit_lengthscales);
      const ExperimentConfig defaults;
      const double lambda_f =
          fit_lambda_opt->count() > 0
              ? fit_lambda_f
              : select_lambda_f(data.X, data.y, spec, defaults.lambda_f_grid,
                                defaults.cv_folds, fit_common.seed);
      write_model_json(fit_krr(data.X, data.y, spec, lambda_f),
                       std::filesystem::path(fit_output));
      out << fmt::format("lambda_f={}\n", format_double(lambda_f));
      return kSuccess;
    }
    if (generate->parsed()) {
      const Dataset data =
          gen_dataset == "banana"
              ? sample_banana({gen_n, gen_b, gen_v, gen_common.seed})
              : sample_correlated_gaussian(gen_n, gen_common.seed);
      write_output(gen_output, [&](std::ostream& o) { write_dataset_csv(data, o); }, out);
      return kSuccess;
    }
    for (std::size_t k = 0; k < exp_apps.size(); ++k) {
      if (!exp_apps[k]->parsed()) continue;
      const ExperimentConfig cfg =
          build_config(experiment_names[k], exp_common[k], exp_flags[k]);
      const std::string& name = experiment_names[k];
      if (name == "banana-shap") {
        const auto result = run_banana_shap(
            cfg, [&](const BananaResult& partial) { write_banana_report(partial, cfg); });
        write_banana_report(result, cfg);
      } else if (name == "runtime-bench") {
        const auto result = run_runtime_bench(cfg);
        write_runtime_report(result, cfg);
        if (result.any_censored()) {
          err << "warning: some runtime cells hit the time budget\n";
          return kTimeout;
        }
      } else if (name == "covariate-shift") {
        write_covariate_shift_report(run_covariate_shift(cfg), cfg);
      } else {
        write_fairness_report(run_fairness(cfg), cfg);
      }
      out << fmt::format("{} written to {}\n", name, cfg.out_dir.string());
      return kSuccess;
    }
  } catch (const TimeoutError& e) {
    err << "timeout: " << e.what() << '\n';
    return kTimeout;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace rkshap::cli
