#include "rkshap/baselines.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "rkshap/errors.hpp"
#include "rkshap/models.hpp"
#include "rkshap/parallel.hpp"

namespace rkshap {

namespace {

constexpr double kCovarianceInflation = 1e-9;

void check_deadline(const Deadline& deadline) {
  if (deadline && std::chrono::steady_clock::now() > *deadline) {
    throw TimeoutError("baseline exceeded its time budget");
  }
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t query,
                          std::uint64_t mask) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(query),
                    static_cast<std::uint32_t>(query >> 32),
                    static_cast<std::uint32_t>(mask),
                    static_cast<std::uint32_t>(mask >> 32)};
  return std::mt19937_64(seq);
}

Vector mean_training_prediction(const FittedModel& model, Eigen::Index n_query) {
  return Vector::Constant(n_query, predict(model, model.x_train).mean());
}

Matrix select(const Matrix& M, const std::vector<int>& rows,
              const std::vector<int>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = M(rows[i], cols[j]);
  }
  return out;
}

Vector select(const Vector& v, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace

double mc_interventional_value(const FittedModel& model, const Vector& xq,
                               Coalition S, const Matrix& background,
                               std::mt19937_64& rng, int batches) {
  if (background.rows() == 0) throw InputError("background set is empty");
  if (xq.size() != model.dim() || background.cols() != model.dim() ||
      S.dim() != model.dim()) {
    throw InputError(fmt::format(
        "model has {} features; query {}, background {}, coalition {}",
        model.dim(), xq.size(), background.cols(), S.dim()));
  }
  Matrix imputed;
  if (batches <= 0 || batches >= background.rows()) {
    imputed = background;
  } else {
    std::uniform_int_distribution<Eigen::Index> pick(0, background.rows() - 1);
    imputed.resize(batches, background.cols());
    for (int b = 0; b < batches; ++b) imputed.row(b) = background.row(pick(rng));
  }
  for (int c : S.members()) imputed.col(c).setConstant(xq(c));
  return predict(model, imputed).mean();
}

AttributionMatrix mc_interventional_attribution(const FittedModel& model,
                                                const Matrix& Xq,
                                                const DesignPolicy& policy,
                                                const Matrix& background,
                                                int jobs, Deadline deadline) {
  const int d = model.dim();
  const Eigen::Index n_query = Xq.rows();
  const Vector baseline = mean_training_prediction(model, n_query);
  const Vector grand = predict(model, Xq);
  CoalitionDesign design;
  design.dim = d;
  if (d >= 2) design = policy.build(d);

  Matrix V(design.size(), n_query);
  parallel_for(static_cast<std::size_t>(n_query), jobs, [&](std::size_t q) {
    check_deadline(deadline);
    const Vector xq = Xq.row(q).transpose();
    std::mt19937_64 rng;
    for (std::size_t r = 0; r < design.size(); ++r) {
      V(r, q) = mc_interventional_value(model, xq, design.coalitions[r],
                                        background, rng, 0);
    }
  });
  return solve_shapley_wls(design, V, baseline, grand, Mode::interventional);
}

GaussianFit fit_gaussian(const Matrix& X) {
  if (X.rows() < 2) throw InputError("Gaussian fit needs at least two rows");
  GaussianFit fit;
  fit.mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - fit.mean.transpose();
  fit.cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
  double inflation = kCovarianceInflation * fit.cov.diagonal().mean();
  if (!(inflation > 0.0)) inflation = kCovarianceInflation;
  fit.cov.diagonal().array() += inflation;
  return fit;
}

GaussianConditional::GaussianConditional(const GaussianFit& fit, Coalition S) {
  if (S.dim() != fit.dim()) {
    throw InputError(fmt::format("coalition over {} features, Gaussian over {}",
                                 S.dim(), fit.dim()));
  }
  present_ = S.members();
  absent_ = S.complement().members();
  mean_present_ = select(fit.mean, present_);
  mean_absent_ = select(fit.mean, absent_);

  const Matrix cov_cc = select(fit.cov, absent_, absent_);
  if (present_.empty()) {
    gain_ = Matrix::Zero(absent_.size(), 0);
    cov_ = cov_cc;
  } else {
    const Matrix cov_ss = select(fit.cov, present_, present_);
    const Matrix cov_sc = select(fit.cov, present_, absent_);
    Eigen::LLT<Matrix> llt(cov_ss);
    if (llt.info() != Eigen::Success) {
      throw NumericError("conditioning block of the covariance is not invertible");
    }
    gain_ = llt.solve(cov_sc).transpose();
    cov_ = cov_cc - gain_ * cov_sc;
  }
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  if (cov_.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
    const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
    cov_ = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    factor_ = eig.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
  } else {
    factor_.resize(0, 0);
  }
}

Vector GaussianConditional::mean(const Vector& x_present) const {
  if (x_present.size() != static_cast<Eigen::Index>(present_.size())) {
    throw InputError(fmt::format("expected {} conditioning values, got {}",
                                 present_.size(), x_present.size()));
  }
  if (present_.empty()) return mean_absent_;
  return mean_absent_ + gain_ * (x_present - mean_present_);
}

Matrix GaussianConditional::sample(const Vector& x_present, int count,
                                   std::mt19937_64& rng) const {
  const Vector mu = mean(x_present);
  const Eigen::Index k = static_cast<Eigen::Index>(absent_.size());
  std::normal_distribution<double> normal;
  Matrix z(count, k);
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) z(i, j) = normal(rng);
  }
  Matrix out = z * factor_.transpose();
  out.rowwise() += mu.transpose();
  return out;
}

Matrix gaussian_conditional_sample(const GaussianFit& fit, Coalition S,
                                   const Vector& x_present, int count,
                                   std::mt19937_64& rng) {
  return GaussianConditional(fit, S).sample(x_present, count, rng);
}

AttributionMatrix gshap_osv(const FittedModel& model, const Matrix& Xq,
                            const DesignPolicy& policy, const GaussianFit& fit,
                            int mc_count, std::uint64_t seed, int jobs,
                            Deadline deadline) {
  const int d = model.dim();
  if (fit.dim() != d || Xq.cols() != d) {
    throw InputError(fmt::format("model has {} features; Gaussian {}, queries {}", d,
                                 fit.dim(), Xq.cols()));
  }
  if (mc_count < 1) {
    throw InputError(fmt::format("Monte-Carlo count must be positive, got {}", mc_count));
  }
  const Eigen::Index n_query = Xq.rows();
  const Vector baseline = mean_training_prediction(model, n_query);
  const Vector grand = predict(model, Xq);
  CoalitionDesign design;
  design.dim = d;
  if (d >= 2) design = policy.build(d);

  std::vector<GaussianConditional> conditionals;
  conditionals.reserve(design.size());
  for (const Coalition& S : design.coalitions) conditionals.emplace_back(fit, S);

  Matrix V(design.size(), n_query);
  parallel_for(static_cast<std::size_t>(n_query), jobs, [&](std::size_t q) {
    check_deadline(deadline);
    const Vector xq = Xq.row(q).transpose();
    for (std::size_t r = 0; r < design.size(); ++r) {
      const GaussianConditional& cond = conditionals[r];
      std::mt19937_64 rng = substream(seed, q, design.coalitions[r].mask());
      const Matrix draws = cond.sample(select(xq, cond.present()), mc_count, rng);
      Matrix imputed(mc_count, d);
      for (std::size_t j = 0; j < cond.present().size(); ++j) {
        imputed.col(cond.present()[j]).setConstant(xq(cond.present()[j]));
      }
      for (std::size_t j = 0; j < cond.absent().size(); ++j) {
        imputed.col(cond.absent()[j]) = draws.col(j);
      }
      V(r, q) = predict(model, imputed).mean();
    }
  });
  return solve_shapley_wls(design, V, baseline, grand, Mode::observational);
}

}  // namespace rkshap
