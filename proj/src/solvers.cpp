#include "bpfid/solvers.hpp"

#include "bpfid/metrics.hpp"

#include <cmath>

namespace bpfid {

namespace {

void record(IterTrace& trace, const ProxStepConfig& cfg, const FidelityTerm& fid, const Vec& x,
            double grad_norm) {
  double obj = fid.value(x);
  if (cfg.prior_value) obj += cfg.beta * cfg.prior_value(x);
  trace.objective.push_back(obj);
  if (cfg.ground_truth) trace.psnr_db.push_back(psnr_db(x, *cfg.ground_truth));
  trace.grad_norm.push_back(grad_norm);
}

}  // namespace

double auto_step(const FidelityTerm& fid) {
  if (fid.kind() == FidelityKind::BackProjection) return 1.0;
  return 1.0 / (1.01 * fid.lipschitz());
}

SolveRun prox_gradient(const FidelityTerm& fid, const ProxFn& prox, const ProxStepConfig& cfg,
                       const Vec& x0) {
  if (x0.size() != fid.op().cols()) throw DimensionError("prox_gradient: x0 length mismatch");
  if (cfg.iters < 0) throw DimensionError("prox_gradient: negative iteration count");
  const double mu = cfg.mu ? *cfg.mu : auto_step(fid);
  if (!(mu * cfg.beta > 0.0)) throw NumericalError("prox_gradient: mu * beta must be positive");

  SolveRun run;
  Vec x = x0;
  Vec point = x0;  // gradient point: equals x without momentum
  Vec x_prev = x0;
  double t = 1.0;

  for (int k = 0; k < cfg.iters; ++k) {
    Vec g = fid.gradient(point);
    Vec z = point - mu * g;
    Vec x_new = prox(z, mu * cfg.beta);
    if (!x_new.allFinite()) throw NumericalError("prox_gradient: non-finite iterate");

    if (cfg.momentum == Momentum::Nesterov) {
      const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      point = x_new + ((t - 1.0) / t_next) * (x_new - x_prev);
      t = t_next;
      x_prev = x_new;
    } else {
      point = x_new;
    }
    x = std::move(x_new);

    if (cfg.record_trace) record(run.trace, cfg, fid, x, g.norm());
    if (cfg.on_iterate) cfg.on_iterate(k, x);
  }
  run.x = std::move(x);
  return run;
}

double resolved_delta(const IdbpConfig& cfg) {
  if (cfg.delta) return *cfg.delta;
  return cfg.sigma_e > 0.0 ? 0.0 : 0.001 * 255.0;
}

SolveRun idbp(OpPtr op, const Vec& y, const Denoiser& denoiser, const IdbpConfig& cfg,
              const Vec& x0) {
  if (!op) throw DimensionError("idbp: null operator");
  if (cfg.iters < 0) throw DimensionError("idbp: negative iteration count");
  const double noise_level = cfg.sigma_e + resolved_delta(cfg);
  if (!(noise_level > 0.0)) throw NumericalError("idbp: sigma_e + delta must be positive");

  FidelityTerm fid = FidelityTerm::back_projection(op, y, cfg.eps);
  // The z-step x + A^+(y - Ax) is exactly one unit gradient step on the
  // projection fidelity; spelling it that way keeps the arithmetic identical
  // to prox_gradient's, which is what makes the two schemes coincide.
  const double mu = 1.0;

  SolveRun run;
  Vec x = x0;
  for (int k = 0; k < cfg.iters; ++k) {
    Vec g = fid.gradient(x);
    Vec z = x - mu * g;
    Vec x_new = denoiser(z, noise_level);
    if (!x_new.allFinite()) throw NumericalError("idbp: denoiser returned non-finite values");
    x = std::move(x_new);

    if (cfg.record_trace) {
      double obj = fid.value(x);
      run.trace.objective.push_back(obj);
      if (cfg.ground_truth) run.trace.psnr_db.push_back(psnr_db(x, *cfg.ground_truth));
      run.trace.grad_norm.push_back(g.norm());
    }
    if (cfg.on_iterate) cfg.on_iterate(k, x);
  }
  run.x = std::move(x);
  return run;
}

double equivalence_check(OpPtr op, const Vec& y, const Denoiser& denoiser, const IdbpConfig& cfg,
                         const Vec& x0) {
  const double noise_level = cfg.sigma_e + resolved_delta(cfg);

  std::vector<Vec> iterates;
  iterates.reserve(static_cast<std::size_t>(std::max(cfg.iters, 0)));
  IdbpConfig idbp_cfg = cfg;
  idbp_cfg.record_trace = false;
  idbp_cfg.ground_truth.reset();
  idbp_cfg.on_iterate = [&iterates](int, const Vec& x) { iterates.push_back(x); };
  idbp(op, y, denoiser, idbp_cfg, x0);

  FidelityTerm fid = FidelityTerm::back_projection(op, y, cfg.eps);
  double max_dev = 0.0;
  ProxStepConfig prox_cfg;
  prox_cfg.mu = 1.0;
  prox_cfg.beta = noise_level * noise_level;
  prox_cfg.iters = cfg.iters;
  prox_cfg.momentum = Momentum::None;
  prox_cfg.on_iterate = [&iterates, &max_dev](int k, const Vec& x) {
    const Vec& other = iterates.at(static_cast<std::size_t>(k));
    max_dev = std::max(max_dev, (x - other).cwiseAbs().maxCoeff());
  };
  prox_gradient(fid, as_prox(denoiser), prox_cfg, x0);
  return max_dev;
}

}  // namespace bpfid
