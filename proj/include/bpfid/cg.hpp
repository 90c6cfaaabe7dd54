#pragma once

// Conjugate gradients for SPD systems given as a black-box apply. Lives in its
// own header so the operator layer can reuse it for pseudo-inverse solves
// without pulling in the full solver toolkit.

#include "bpfid/types.hpp"

#include <functional>
#include <vector>

namespace bpfid {

struct CgResult {
  Vec x;
  std::vector<double> residual_history;  // ||r_k|| / ||b||, one entry per iteration
  bool converged = false;
  int iterations = 0;
};

// Solves M x = b for SPD M. Stops when ||r|| <= tol * ||b|| or after
// max_iters iterations. Throws NumericalError if the recurrence produces
// non-finite values (e.g. M not SPD).
CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& spd_apply, const Vec& b,
                            const Vec& x0, int max_iters, double tol);

}  // namespace bpfid
