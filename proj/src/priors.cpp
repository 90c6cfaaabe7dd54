#include "bpfid/priors.hpp"

#include "bpfid/fft2.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace bpfid {

namespace {

void check_shape(const Shape2D& shape, const Vec& x, const char* what) {
  if (shape.size() != x.size()) throw ShapeError(std::string(what) + ": shape/vector mismatch");
}

// Circular-wrap forward differences: dh_p = x(i, j+1) - x(i, j),
// dv_p = x(i+1, j) - x(i, j).
void forward_diff(const Shape2D& s, const Vec& x, Vec& dh, Vec& dv) {
  const Index H = s.rows, W = s.cols;
  for (Index i = 0; i < H; ++i) {
    const Index ro = i * W, dn = ((i + 1) % H) * W;
    for (Index j = 0; j < W; ++j) {
      dh[ro + j] = x[ro + (j + 1) % W] - x[ro + j];
      dv[ro + j] = x[dn + j] - x[ro + j];
    }
  }
}

// Adjoint of forward_diff (negative divergence).
Vec diff_adjoint(const Shape2D& s, const Vec& dh, const Vec& dv) {
  const Index H = s.rows, W = s.cols;
  Vec out = Vec::Zero(s.size());
  for (Index i = 0; i < H; ++i) {
    const Index ro = i * W, dn = ((i + 1) % H) * W;
    for (Index j = 0; j < W; ++j) {
      const double h = dh[ro + j], v = dv[ro + j];
      out[ro + (j + 1) % W] += h;
      out[ro + j] -= h + v;
      out[dn + j] += v;
    }
  }
  return out;
}

// DFT symbol of the circular Laplacian (adjoint o forward differences).
Vec laplacian_symbol(const Shape2D& s) {
  const Index H = s.rows, W = s.cols;
  Vec sym(s.size());
  const double two_pi = 2.0 * std::numbers::pi;
  for (Index f1 = 0; f1 < H; ++f1) {
    for (Index f2 = 0; f2 < W; ++f2) {
      sym[f1 * W + f2] =
          (2.0 - 2.0 * std::cos(two_pi * f1 / H)) + (2.0 - 2.0 * std::cos(two_pi * f2 / W));
    }
  }
  return sym;
}

}  // namespace

double tv_value(const Shape2D& shape, const Vec& x, const TvConfig& cfg) {
  check_shape(shape, x, "tv_value");
  Vec dh(x.size()), dv(x.size());
  forward_diff(shape, x, dh, dv);
  double sum = 0.0;
  for (Index p = 0; p < x.size(); ++p) sum += std::hypot(dh[p], dv[p]);
  return cfg.weight * sum;
}

Vec tv_prox(const Shape2D& shape, const Vec& z, double t, const TvConfig& cfg) {
  check_shape(shape, z, "tv_prox");
  if (!(t > 0.0)) throw NumericalError("tv_prox: scale t must be positive");
  if (cfg.inner_iters < 1) throw NumericalError("tv_prox: inner_iters must be >= 1");

  // Split d = grad(x):  min 1/2||x-z||^2 + w sum||d_p|| + rho/2 ||d - grad(x) - b||^2
  // with w the effective multiplier on the gradient-magnitude sum.
  const double w = cfg.weight * t;
  const double rho = cfg.rho_scale * w;
  const Index n = z.size();

  Vec denom = (1.0 + rho * laplacian_symbol(shape).array()).matrix();
  Vec x = z;
  Vec dh = Vec::Zero(n), dv = Vec::Zero(n);
  Vec bh = Vec::Zero(n), bv = Vec::Zero(n);
  Vec gh(n), gv(n);

  for (int it = 0; it < cfg.inner_iters; ++it) {
    // x-step: (I + rho grad^T grad) x = z + rho grad^T (d - b), solved per frequency.
    Vec rhs = z + rho * diff_adjoint(shape, dh - bh, dv - bv);
    Cvec f = fft::fft2(shape, rhs);
    f.array() /= denom.array().cast<std::complex<double>>();
    Vec x_new = fft::ifft2_real(shape, std::move(f));

    // d-step: isotropic shrinkage of grad(x) + b by w/rho.
    forward_diff(shape, x_new, gh, gv);
    const double thresh = w / rho;
    for (Index p = 0; p < n; ++p) {
      const double sh = gh[p] + bh[p], sv = gv[p] + bv[p];
      const double mag = std::hypot(sh, sv);
      const double scale = mag > thresh ? (mag - thresh) / mag : 0.0;
      dh[p] = scale * sh;
      dv[p] = scale * sv;
      bh[p] = sh - dh[p];
      bv[p] = sv - dv[p];
    }

    const double change = (x_new - x).norm() / std::max(1.0, z.norm());
    x = std::move(x_new);
    if (change <= cfg.inner_tol) break;
  }

  // The inner solver is approximate: never hand back something worse than z.
  const double obj_x = 0.5 * (z - x).squaredNorm() + t * tv_value(shape, x, cfg);
  const double obj_z = t * tv_value(shape, z, cfg);
  return obj_x <= obj_z ? x : z;
}

Vec l2_prox(const Vec& z, double t, const L2Prior& prior) { return prior.prox(z, t); }

ProxFn as_prox(Denoiser denoiser) {
  return [d = std::move(denoiser)](const Vec& z, double t) -> Vec { return d(z, std::sqrt(t)); };
}

Denoiser identity_denoiser() {
  return [](const Vec& z, double) -> Vec { return z; };
}

Denoiser median3_denoiser(const Shape2D& shape) {
  return [shape](const Vec& z, double) -> Vec {
    check_shape(shape, z, "median3_denoiser");
    const Index H = shape.rows, W = shape.cols;
    Vec out(z.size());
    double window[9];
    for (Index i = 0; i < H; ++i) {
      for (Index j = 0; j < W; ++j) {
        int k = 0;
        for (Index di = -1; di <= 1; ++di) {
          for (Index dj = -1; dj <= 1; ++dj) {
            window[k++] = z[((i + di + H) % H) * W + (j + dj + W) % W];
          }
        }
        std::nth_element(window, window + 4, window + 9);
        out[i * W + j] = window[4];
      }
    }
    return out;
  };
}

Denoiser l2_prox_denoiser(PriorPtr prior) {
  if (!prior) throw DimensionError("l2_prox_denoiser: null prior");
  return [prior](const Vec& z, double sigma) -> Vec { return prior->prox(z, sigma * sigma); };
}

Denoiser tv_denoiser(const Shape2D& shape, const TvConfig& cfg) {
  return [shape, cfg](const Vec& z, double sigma) -> Vec {
    return tv_prox(shape, z, sigma * sigma, cfg);
  };
}

}  // namespace bpfid
