#pragma once

// Independent reference implementations used to cross-check the library:
// dense pseudo-inverse / projector algebra straight from an SVD, a central
// finite-difference gradient, and a dual-projection TV solver. These are
// deliberately written against Eigen directly (no bpfid internals) so a bug
// in the library cannot hide in its own oracle.

#include "bpfid/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <functional>

namespace oracles {

using bpfid::Index;
using bpfid::Mat;
using bpfid::Vec;

// A^T (A A^T + eps I)^{-1} v by dense factorization.
inline Vec dense_pinv_apply(const Mat& A, const Vec& v, double eps = 0.0) {
  Mat gram = A * A.transpose();
  gram.diagonal().array() += eps;
  return A.transpose() * gram.ldlt().solve(v);
}

// Row-space projector V_{1..m} V_{1..m}^T from a full SVD.
inline Mat svd_projector(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const Index m = A.rows();
  Mat Vm = svd.matrixV().leftCols(m);
  return Vm * Vm.transpose();
}

// Central finite differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& fn, const Vec& x,
                       double h = 1e-5) {
  Vec g(x.size());
  Vec probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = fn(probe);
    probe[i] = x[i] - h;
    const double fm = fn(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// argmin_x 1/2||x - z||^2 + lambda * sum_p |grad x|_p by dual projection
// (fixed step tau = 1/8, long run). Circular-wrap forward differences, same
// discretization the library uses, different algorithm entirely.
inline Vec dual_tv_prox(const bpfid::Shape2D& shape, const Vec& z, double lambda,
                        int iters = 5000) {
  const Index H = shape.rows, W = shape.cols;
  const double tau = 0.125;
  Mat pv = Mat::Zero(H, W), ph = Mat::Zero(H, W);

  auto divergence = [&](const Mat& qv, const Mat& qh) {
    Mat d(H, W);
    for (Index i = 0; i < H; ++i) {
      for (Index j = 0; j < W; ++j) {
        const Index im = (i + H - 1) % H, jm = (j + W - 1) % W;
        d(i, j) = qv(i, j) - qv(im, j) + qh(i, j) - qh(i, jm);
      }
    }
    return d;
  };

  Mat zimg(H, W);
  for (Index i = 0; i < H; ++i)
    for (Index j = 0; j < W; ++j) zimg(i, j) = z[i * W + j];

  for (int k = 0; k < iters; ++k) {
    const Mat u = divergence(pv, ph) - zimg / lambda;
    for (Index i = 0; i < H; ++i) {
      for (Index j = 0; j < W; ++j) {
        const double gv = u((i + 1) % H, j) - u(i, j);
        const double gh = u(i, (j + 1) % W) - u(i, j);
        const double denom = 1.0 + tau * std::hypot(gv, gh);
        pv(i, j) = (pv(i, j) + tau * gv) / denom;
        ph(i, j) = (ph(i, j) + tau * gh) / denom;
      }
    }
  }

  const Mat x = zimg - lambda * divergence(pv, ph);
  Vec out(H * W);
  for (Index i = 0; i < H; ++i)
    for (Index j = 0; j < W; ++j) out[i * W + j] = x(i, j);
  return out;
}

// Dense full-row-rank Gaussian test matrix (unit-variance entries).
inline Mat random_matrix(Index m, Index n, std::uint64_t seed) {
  const Vec flat = bpfid::gaussian_vector(m * n, seed);
  Mat A(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = flat[i * n + j];
  return A;
}

// Random SPD matrix M = B B^T + shift I.
inline Mat random_spd(Index n, std::uint64_t seed, double shift = 0.5) {
  const Mat B = random_matrix(n, n, seed);
  Mat M = B * B.transpose();
  M.diagonal().array() += shift;
  return M;
}

inline double rel_err(const Vec& got, const Vec& want) {
  const double scale = std::max(1e-300, want.norm());
  return (got - want).norm() / scale;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace oracles
