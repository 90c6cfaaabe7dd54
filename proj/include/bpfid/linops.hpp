#pragma once

// Linear measurement operators A : R^n -> R^m (m <= n, full row rank) with
// adjoints, pseudo-inverse applications and spectral analysis. Operators are
// immutable and safe to share across threads; dense materializations and
// gram-system factorizations are cached per instance.

#include "bpfid/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace bpfid {

// Solver for the loaded gram system (A A^T + eps I) s = v.
class GramSolver {
 public:
  virtual ~GramSolver() = default;
  virtual Vec solve(const Vec& v) const = 0;
};

enum class GramPath {
  Auto,     // orthonormal-row identity, FFT-diagonal or dense Cholesky when available
  ForceCg,  // always the generic CG path
};

class LinearOp {
 public:
  LinearOp(Index rows, Index cols);
  virtual ~LinearOp() = default;

  LinearOp(const LinearOp&) = delete;
  LinearOp& operator=(const LinearOp&) = delete;

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  Vec apply(const Vec& x) const;    // A x
  Vec adjoint(const Vec& v) const;  // A^T v

  // Applies the operator to every column of a matrix.
  Mat apply_mat(const Mat& x) const;

  // True when A A^T = I_m by construction (selection rows, orthogonal rows).
  virtual bool gram_is_identity() const { return false; }

  // 2D layout of the domain, when the operator acts on images.
  virtual std::optional<Shape2D> domain_shape() const { return std::nullopt; }

  // Circulant fast path: non-null iff the operator is circular convolution on
  // its (square, m == n) grid. The symbol is the 2D DFT of the impulse
  // response, laid out row-major on domain_shape().
  virtual const Cvec* circulant_symbol() const { return nullptr; }

  // Dense m x n matrix of the operator; cached. Throws UnsupportedScale when
  // the entry count is unreasonable for a desk-scale study.
  const Mat& materialize() const;

  // Cached solver for (A A^T + eps I). The returned object is valid while the
  // operator is alive.
  std::shared_ptr<const GramSolver> gram_solver(double eps, GramPath path = GramPath::Auto) const;

 protected:
  virtual Vec do_apply(const Vec& x) const = 0;
  virtual Vec do_adjoint(const Vec& v) const = 0;
  virtual Mat do_apply_mat(const Mat& x) const;  // default: column loop
  virtual Mat do_materialize() const;            // default: apply to basis vectors

  // Installs an eagerly known dense form into the materialization cache.
  void preset_dense(Mat m);

 private:
  Index rows_;
  Index cols_;
  mutable std::mutex cache_mutex_;
  mutable std::shared_ptr<const Mat> dense_cache_;
  mutable std::map<std::pair<double, int>, std::shared_ptr<const GramSolver>> gram_cache_;
};

using OpPtr = std::shared_ptr<const LinearOp>;

// --- constructors -----------------------------------------------------------

OpPtr identity_op(Index n);

// Keeps the listed sample positions (sorted, unique, in [0, n)).
OpPtr inpaint_mask(std::vector<Index> kept, Index n);

// Circular 2D convolution with an odd-sized kernel, computed via the DFT.
OpPtr circulant_conv2d(const Mat& kernel, const Shape2D& shape);

// Keeps pixel (0, 0) and every factor-th pixel in each direction; the output
// grid is ceil(rows/factor) x ceil(cols/factor).
OpPtr downsample2d(Index factor, const Shape2D& shape);

// Stages applied first-to-last: compose({B, S}) maps x to S(B(x)).
OpPtr compose(std::vector<OpPtr> stages);

OpPtr dense_op(Mat entries);

// Dense i.i.d. N(0, 1/m) matrix from a seeded 64-bit PRNG, generated lazily
// in row-major order.
OpPtr gaussian_measurement(Index m, Index n, std::uint64_t seed);

// Orthonormal 2D Haar wavelet analysis (full pyramid); power-of-two dims.
OpPtr haar_basis2d(const Shape2D& shape);

// --- kernels ----------------------------------------------------------------

// exp(-(i^2+j^2)/(2 sigma^2)) on [-r, r]^2, normalized to sum 1.
Mat gaussian_kernel(Index size, double sigma);
Mat uniform_kernel(Index size);

// --- pseudo-inverse ---------------------------------------------------------

// A_eps^+ v = A^T (A A^T + eps I)^{-1} v.
Vec pseudo_inverse_apply(const LinearOp& op, const Vec& v, double eps = 0.0,
                         GramPath path = GramPath::Auto);

// Row-space projection P x = A_eps^+ (A x); an orthogonal projector at eps=0.
Vec project_rowspace(const LinearOp& op, const Vec& x, double eps = 0.0,
                     GramPath path = GramPath::Auto);

// --- spectral analysis ------------------------------------------------------

struct SpectralDecomposition {
  Vec singular_values;            // size m, descending, strictly positive
  Mat right_basis;                // n x m, orthonormal columns of V
  std::optional<Mat> left_basis;  // m x m when computed
  Index m = 0;
  Index n = 0;

  // First m coefficients [V^T x]_i.
  Vec coeffs(const Vec& x) const { return right_basis.transpose() * x; }

  // Energy of x outside the row space: ||x||^2 - ||V^T x||^2, clamped at 0.
  double nullspace_energy(const Vec& x) const {
    return std::max(0.0, x.squaredNorm() - coeffs(x).squaredNorm());
  }
};

// Full decomposition. Circulant operators get the analytic cosine/sine DFT
// basis; everything else goes through a dense eigendecomposition of A A^T
// (domain capped at n <= 8192).
SpectralDecomposition spectrum(const LinearOp& op);

// Singular values only (descending); much cheaper than spectrum().
Vec singular_values_only(const LinearOp& op);

double condition_number_sq(const SpectralDecomposition& spec);
double condition_number_sq(const Vec& singular_values);

// --- spectral norm ----------------------------------------------------------

struct PowerEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Power iteration on a symmetric PSD apply; deterministic start vector.
PowerEstimate power_method(const std::function<Vec(const Vec&)>& sym_apply, Index n,
                           int max_iters = 200, double tol = 1e-9);

// lambda_1^2 = ||A||^2 via power iteration on A^T A.
PowerEstimate sq_spectral_norm(const LinearOp& op, int max_iters = 200, double tol = 1e-9);

}  // namespace bpfid
