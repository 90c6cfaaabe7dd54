#include "bpfid/cg.hpp"

#include <cmath>

namespace bpfid {

CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& spd_apply, const Vec& b,
                            const Vec& x0, int max_iters, double tol) {
  if (x0.size() != b.size()) throw DimensionError("conjugate_gradient: x0/b size mismatch");

  CgResult out;
  out.x = x0;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }

  Vec r = b - spd_apply(out.x);
  Vec p = r;
  double rr = r.squaredNorm();
  out.residual_history.reserve(static_cast<std::size_t>(std::max(max_iters, 0)));

  for (int k = 0; k < max_iters; ++k) {
    if (std::sqrt(rr) <= tol * bnorm) {
      out.converged = true;
      break;
    }
    Vec mp = spd_apply(p);
    const double p_mp = p.dot(mp);
    if (!std::isfinite(p_mp) || p_mp <= 0.0) {
      throw NumericalError("conjugate_gradient: apply is not SPD on the Krylov space");
    }
    const double alpha = rr / p_mp;
    out.x += alpha * p;
    r -= alpha * mp;
    const double rr_new = r.squaredNorm();
    if (!std::isfinite(rr_new)) {
      throw NumericalError("conjugate_gradient: residual diverged");
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++out.iterations;
    out.residual_history.push_back(std::sqrt(rr) / bnorm);
  }
  if (!out.converged) out.converged = std::sqrt(rr) <= tol * bnorm;
  return out;
}

}  // namespace bpfid
