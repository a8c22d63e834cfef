#include "rkshap/embeddings.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rkshap/errors.hpp"

namespace rkshap {

namespace {

void check_shapes(const Matrix& X, const Matrix& Xq, const KernelSpec& spec,
                  Coalition S) {
  if (X.rows() == 0) throw InputError("training set is empty");
  if (X.cols() != spec.dim() || Xq.cols() != spec.dim()) {
    throw InputError(fmt::format("value matrix expects {} features, got {} and {}",
                                 spec.dim(), X.cols(), Xq.cols()));
  }
  if (S.dim() != spec.dim()) {
    throw InputError(fmt::format("coalition over {} features, kernel over {}",
                                 S.dim(), spec.dim()));
  }
}

}  // namespace

std::string_view to_string(Mode mode) {
  return mode == Mode::interventional ? "isv" : "osv";
}

Mode parse_mode(std::string_view text) {
  if (text == "isv" || text == "interventional") return Mode::interventional;
  if (text == "osv" || text == "observational") return Mode::observational;
  throw InputError(fmt::format("unknown mode '{}' (expected isv or osv)", text));
}

std::shared_ptr<const PsdFactor> CmoFactorCache::get_or_compute(
    Coalition S, const Matrix& gram_s, double ridge) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = factors_.find(S.mask()); it != factors_.end()) {
      return it->second;
    }
  }
  auto factor = std::make_shared<const PsdFactor>(gram_s, ridge);
  std::lock_guard lock(mutex_);
  return factors_.emplace(S.mask(), std::move(factor)).first->second;
}

std::size_t CmoFactorCache::size() const {
  std::lock_guard lock(mutex_);
  return factors_.size();
}

ValueMatrix interventional_value_matrix(const Matrix& X, const Matrix& Xq,
                                        const KernelSpec& spec, Coalition S) {
  check_shapes(X, Xq, spec, S);
  Matrix values = kernel_matrix(X, Xq, spec, S).values;
  if (!S.is_full()) {
    const Vector marginal =
        kernel_matrix(X, X, spec, S.complement()).values.rowwise().mean();
    values.array().colwise() *= marginal.array();
  }
  return ValueMatrix{std::move(values), S, Mode::interventional, 0.0};
}

ValueMatrix observational_value_matrix(const Matrix& X, const Matrix& Xq,
                                       const KernelSpec& spec, Coalition S,
                                       double eta, CmoFactorCache* cache) {
  check_shapes(X, Xq, spec, S);
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InputError(fmt::format("eta must be positive and finite, got {}", eta));
  }
  if (S.is_empty() || S.is_full()) {
    ValueMatrix vm = interventional_value_matrix(X, Xq, spec, S);
    vm.mode = Mode::observational;
    vm.eta = eta;
    return vm;
  }

  const double n = static_cast<double>(X.rows());
  const Matrix cross = kernel_matrix(X, Xq, spec, S).values;
  const Matrix gram_s = kernel_matrix(X, X, spec, S).values;
  const Matrix gram_c = kernel_matrix(X, X, spec, S.complement()).values;

  std::shared_ptr<const PsdFactor> factor =
      cache ? cache->get_or_compute(S, gram_s, n * eta)
            : std::make_shared<const PsdFactor>(gram_s, n * eta);
  Matrix values = gram_c * factor->solve(cross);
  values.array() *= cross.array();
  return ValueMatrix{std::move(values), S, Mode::observational, eta};
}

Vector value_of(const FittedModel& model, const ValueMatrix& vm) {
  if (model.alpha.size() != vm.values.rows()) {
    throw InputError(fmt::format("model has {} dual weights, value matrix {} rows",
                                 model.alpha.size(), vm.values.rows()));
  }
  return vm.values.transpose() * model.alpha;
}

Matrix value_rows(const Matrix& alphas, const ValueMatrix& vm) {
  if (alphas.rows() != vm.values.rows()) {
    throw InputError(fmt::format("dual weights have {} rows, value matrix {}",
                                 alphas.rows(), vm.values.rows()));
  }
  return alphas.transpose() * vm.values;
}

ValueFunction::ValueFunction(Matrix x_train, KernelSpec spec, Mode mode,
                             double eta)
    : x_train_(std::move(x_train)),
      spec_(std::move(spec)),
      mode_(mode),
      eta_(eta),
      cache_(std::make_shared<CmoFactorCache>()) {
  if (mode_ == Mode::observational && !(eta_ > 0.0)) {
    throw InputError(fmt::format("eta must be positive, got {}", eta_));
  }
}

ValueMatrix ValueFunction::matrix(const Matrix& Xq, Coalition S) const {
  if (mode_ == Mode::interventional) {
    return interventional_value_matrix(x_train_, Xq, spec_, S);
  }
  return observational_value_matrix(x_train_, Xq, spec_, S, eta_, cache_.get());
}

}  // namespace rkshap
