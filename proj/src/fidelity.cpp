#include "bpfid/fidelity.hpp"

namespace bpfid {

FidelityTerm::FidelityTerm(FidelityKind kind, OpPtr op, Vec y, double eps)
    : kind_(kind), op_(std::move(op)), y_(std::move(y)), eps_(eps) {
  if (!op_) throw DimensionError("fidelity: null operator");
  if (y_.size() != op_->rows()) throw DimensionError("fidelity: y length does not match range");
  if (eps_ < 0.0) throw NumericalError("fidelity: eps must be >= 0");
  if (kind_ == FidelityKind::BackProjection) gram_ = op_->gram_solver(eps_);
}

FidelityTerm FidelityTerm::least_squares(OpPtr op, Vec y) {
  return FidelityTerm(FidelityKind::LeastSquares, std::move(op), std::move(y), 0.0);
}

FidelityTerm FidelityTerm::back_projection(OpPtr op, Vec y, double eps) {
  return FidelityTerm(FidelityKind::BackProjection, std::move(op), std::move(y), eps);
}

double FidelityTerm::value(const Vec& x) const {
  Vec r = y_ - op_->apply(x);
  if (kind_ == FidelityKind::LeastSquares) return 0.5 * r.squaredNorm();
  return 0.5 * r.dot(gram_->solve(r));
}

Vec FidelityTerm::gradient(const Vec& x) const {
  Vec r = y_ - op_->apply(x);
  if (kind_ == FidelityKind::LeastSquares) return -op_->adjoint(r);
  return -op_->adjoint(gram_->solve(r));
}

double FidelityTerm::lipschitz() const {
  if (kind_ == FidelityKind::BackProjection) return 1.0;
  std::scoped_lock lock(cache_mutex_);
  if (!lipschitz_cache_) lipschitz_cache_ = sq_spectral_norm(*op_).value;
  return *lipschitz_cache_;
}

const Vec& FidelityTerm::pinv_y() const {
  if (kind_ != FidelityKind::BackProjection) {
    throw NumericalError("pinv_y is only defined for the back-projection term");
  }
  std::scoped_lock lock(cache_mutex_);
  if (!pinv_y_cache_) pinv_y_cache_ = op_->adjoint(gram_->solve(y_));
  return *pinv_y_cache_;
}

}  // namespace bpfid
