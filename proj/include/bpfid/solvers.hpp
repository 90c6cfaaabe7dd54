#pragma once

// Proximal-gradient iterations (ISTA / FISTA) over a fidelity term and a
// proximal mapping, the alternating project-then-denoise scheme, and the
// harness that checks both produce identical iterates.

#include "bpfid/fidelity.hpp"
#include "bpfid/priors.hpp"
#include "bpfid/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace bpfid {

enum class Momentum { None, Nesterov };

// Per-iteration diagnostics; vectors are empty or have length = iteration
// count (psnr_db only when a ground truth was provided, objective includes
// beta * prior only when a prior value function was provided).
struct IterTrace {
  std::vector<double> objective;
  std::vector<double> psnr_db;
  std::vector<double> grad_norm;
};

struct ProxStepConfig {
  std::optional<double> mu;  // step size; empty = automatic 1/L
  double beta = 1.0;         // prior weight; prox scale is mu * beta
  int iters = 100;
  Momentum momentum = Momentum::None;
  bool record_trace = false;
  std::optional<Vec> ground_truth;                 // enables the PSNR trace
  std::function<double(const Vec&)> prior_value;   // s(x), for the objective trace
  std::function<void(int, const Vec&)> on_iterate; // called after each x-update
};

struct SolveRun {
  Vec x;
  IterTrace trace;
};

// Automatic step size: exactly 1 for the projection-based fidelity (its
// Hessian is an orthogonal projection), 1/(1.01 * lambda1^2 estimate) for
// least squares (margin because the power-method estimate is approximate).
double auto_step(const FidelityTerm& fid);

// x_{k} = prox(x_{k-1} - mu * grad(x_{k-1}), mu * beta), optionally with
// Nesterov momentum on the gradient point.
SolveRun prox_gradient(const FidelityTerm& fid, const ProxFn& prox, const ProxStepConfig& cfg,
                       const Vec& x0);

struct IdbpConfig {
  double sigma_e = 0.0;
  std::optional<double> delta;  // empty: 0 when sigma_e > 0, else 0.001 * 255
  int iters = 100;
  double eps = 0.0;             // loading for the pseudo-inverse
  bool record_trace = false;
  std::optional<Vec> ground_truth;
  std::function<void(int, const Vec&)> on_iterate;
};

double resolved_delta(const IdbpConfig& cfg);

// Alternates z_k = x_{k-1} + A_eps^+(y - A x_{k-1}) (projection onto the
// measurement-consistent set when eps = 0) and x_k = denoiser(z_k,
// sigma_e + delta).
SolveRun idbp(OpPtr op, const Vec& y, const Denoiser& denoiser, const IdbpConfig& cfg,
              const Vec& x0);

// Runs idbp and prox_gradient (projection fidelity, beta = (sigma_e+delta)^2,
// mu = 1, no momentum, denoiser adapted as prox) from the same x0 and returns
// the max over iterations of ||x_k^{idbp} - x_k^{prox}||_inf; the two paths
// share the same pseudo-inverse arithmetic, so the deviation is 0 in exact
// float terms. 0 iterations yield exactly 0.
double equivalence_check(OpPtr op, const Vec& y, const Denoiser& denoiser, const IdbpConfig& cfg,
                         const Vec& x0);

}  // namespace bpfid
