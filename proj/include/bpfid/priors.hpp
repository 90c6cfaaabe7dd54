#pragma once

// Non-quadratic priors: isotropic total variation with a split-Bregman inner
// solver, and the adapter that turns a Gaussian denoiser into a proximal
// mapping (denoiser at noise level sqrt(t) realizes prox of t*s).

#include "bpfid/tikhonov.hpp"
#include "bpfid/types.hpp"

#include <functional>

namespace bpfid {

struct TvConfig {
  double weight = 0.1;     // multiplier inside the TV functional itself
  int inner_iters = 60;
  double inner_tol = 1e-6;  // relative iterate change
  // Splitting penalty = rho_scale * (weight * t). Kept below the naive 1:1
  // coupling: large proximal weights converge far faster this way (checked
  // against a dual-projection reference across t in [0.1, 80]).
  double rho_scale = 0.5;
};

// weight * sum_p sqrt(dh_p^2 + dv_p^2) with circular-wrap forward differences.
double tv_value(const Shape2D& shape, const Vec& x, const TvConfig& cfg = {});

// Approximate argmin_x 1/2||z - x||^2 + t * tv_value(x) by split Bregman.
// Guaranteed never to return a point with larger objective than z itself.
Vec tv_prox(const Shape2D& shape, const Vec& z, double t, const TvConfig& cfg = {});

// (I + t D^T D)^{-1} z for a quadratic prior (free-function form of L2Prior::prox).
Vec l2_prox(const Vec& z, double t, const L2Prior& prior);

// A Gaussian denoiser: (noisy image, noise std) -> estimate.
using Denoiser = std::function<Vec(const Vec&, double)>;

// A proximal mapping parameterized by its scale: (z, t) -> prox_{t s}(z).
using ProxFn = std::function<Vec(const Vec&, double)>;

// Denoiser-as-prox adapter: prox_{t s}(z) = denoiser(z, sqrt(t)).
ProxFn as_prox(Denoiser denoiser);

// Stock denoisers for plugging into the adapter.
Denoiser identity_denoiser();
Denoiser median3_denoiser(const Shape2D& shape);  // 3x3 circular median filter
Denoiser l2_prox_denoiser(PriorPtr prior);        // (z, sigma) -> prox_{sigma^2}(z)
Denoiser tv_denoiser(const Shape2D& shape, const TvConfig& cfg = {});

}  // namespace bpfid
