#pragma once

// Data-fidelity terms for y = A x + e: plain least squares and its
// back-projected variant, which weighs the residual in the row space of A.
//
//   LS:  1/2 ||y - A x||^2
//   BP:  1/2 (y - A x)^T (A A^T + eps I)^{-1} (y - A x)
//
// The BP form reduces to 1/2 ||A^+(y - A x)||^2 at eps = 0 and is chosen so
// that its exact gradient is -A_eps^+(y - A x) for every eps >= 0 (the same
// loaded pseudo-inverse in value and gradient).

#include "bpfid/linops.hpp"
#include "bpfid/types.hpp"

#include <memory>
#include <mutex>
#include <optional>

namespace bpfid {

enum class FidelityKind { LeastSquares, BackProjection };

class FidelityTerm {
 public:
  static FidelityTerm least_squares(OpPtr op, Vec y);
  static FidelityTerm back_projection(OpPtr op, Vec y, double eps = 0.0);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

  // Gradient Lipschitz constant: lambda_1^2 of A for LS (power-method
  // estimate, cached); exactly 1 for BP (tight at eps = 0, an upper bound of
  // the true ||P_eps||^2 < 1 otherwise).
  double lipschitz() const;

  FidelityKind kind() const { return kind_; }
  double eps() const { return eps_; }
  const LinearOp& op() const { return *op_; }
  const Vec& y() const { return y_; }

  // A_eps^+ y, computed once per term (BP only).
  const Vec& pinv_y() const;

 private:
  FidelityTerm(FidelityKind kind, OpPtr op, Vec y, double eps);

  FidelityKind kind_;
  OpPtr op_;
  Vec y_;
  double eps_;
  std::shared_ptr<const GramSolver> gram_;  // BP only

  mutable std::mutex cache_mutex_;
  mutable std::optional<double> lipschitz_cache_;
  mutable std::optional<Vec> pinv_y_cache_;
};

}  // namespace bpfid
