#include "bpfid/linops.hpp"

#include "bpfid/cg.hpp"
#include "bpfid/fft2.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bpfid {
namespace {

constexpr Index kMaterializeCapEntries = Index(1) << 28;  // ~2 GB of doubles
constexpr Index kSpectrumDomainCap = 8192;
constexpr int kGramCgCap = 500;
constexpr double kGramCgTol = 1e-10;
constexpr Index kGramDenseRowsCap = 8192;

bool is_pow2(Index v) { return v > 0 && (v & (v - 1)) == 0; }

// --- gram solvers -----------------------------------------------------------

// A A^T = I: the loaded gram system is a scalar rescale.
class ScaledIdentityGram final : public GramSolver {
 public:
  explicit ScaledIdentityGram(double eps) : eps_(eps) {}
  Vec solve(const Vec& v) const override {
    if (eps_ == 0.0) return v;
    return v / (1.0 + eps_);
  }

 private:
  double eps_;
};

// Circulant A: divide by |s|^2 + eps per frequency.
class CirculantGram final : public GramSolver {
 public:
  CirculantGram(const Cvec& symbol, const Shape2D& shape, double eps)
      : shape_(shape), divisor_(symbol.cwiseAbs2().array() + eps) {}

  Vec solve(const Vec& v) const override {
    Cvec f = fft::fft2(shape_, v);
    f.array() /= divisor_.array();
    return fft::ifft2_real(shape_, std::move(f));
  }

 private:
  Shape2D shape_;
  Vec divisor_;
};

class DenseCholGram final : public GramSolver {
 public:
  DenseCholGram(const Mat& dense, double eps) {
    Mat g = dense * dense.transpose();
    g.diagonal().array() += eps;
    llt_.compute(g);
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("gram matrix is not positive definite");
    }
  }

  Vec solve(const Vec& v) const override { return llt_.solve(v); }

 private:
  Eigen::LLT<Mat> llt_;
};

// Generic path: CG on (A A^T + eps I) s = v.
class CgGram final : public GramSolver {
 public:
  CgGram(const LinearOp& op, double eps) : op_(op), eps_(eps) {}

  Vec solve(const Vec& v) const override {
    auto apply = [this](const Vec& s) -> Vec {
      Vec out = op_.apply(op_.adjoint(s));
      if (eps_ != 0.0) out += eps_ * s;
      return out;
    };
    CgResult res = conjugate_gradient(apply, v, Vec::Zero(v.size()), kGramCgCap, kGramCgTol);
    if (!res.converged) {
      throw ConvergenceError("pseudo-inverse gram solve did not converge",
                             res.residual_history.empty() ? 1.0 : res.residual_history.back());
    }
    return res.x;
  }

 private:
  const LinearOp& op_;
  double eps_;
};

}  // namespace

// --- LinearOp base ----------------------------------------------------------

LinearOp::LinearOp(Index rows, Index cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw DimensionError("operator dimensions must be positive");
  if (rows > cols) throw DimensionError("operator must have m <= n (full row rank model)");
}

Vec LinearOp::apply(const Vec& x) const {
  if (x.size() != cols_) throw DimensionError("apply: input length does not match domain");
  return do_apply(x);
}

Vec LinearOp::adjoint(const Vec& v) const {
  if (v.size() != rows_) throw DimensionError("adjoint: input length does not match range");
  return do_adjoint(v);
}

Mat LinearOp::apply_mat(const Mat& x) const {
  if (x.rows() != cols_) throw DimensionError("apply_mat: row count does not match domain");
  return do_apply_mat(x);
}

Mat LinearOp::do_apply_mat(const Mat& x) const {
  Mat out(rows_, x.cols());
  for (Index j = 0; j < x.cols(); ++j) out.col(j) = do_apply(x.col(j));
  return out;
}

Mat LinearOp::do_materialize() const { return do_apply_mat(Mat::Identity(cols_, cols_)); }

void LinearOp::preset_dense(Mat m) {
  std::scoped_lock lock(cache_mutex_);
  dense_cache_ = std::make_shared<const Mat>(std::move(m));
}

const Mat& LinearOp::materialize() const {
  {
    std::scoped_lock lock(cache_mutex_);
    if (dense_cache_) return *dense_cache_;
  }
  if (rows_ * cols_ > kMaterializeCapEntries) {
    throw UnsupportedScale("materialize: operator too large for a dense matrix");
  }
  auto dense = std::make_shared<const Mat>(do_materialize());
  std::scoped_lock lock(cache_mutex_);
  if (!dense_cache_) dense_cache_ = std::move(dense);
  return *dense_cache_;
}

std::shared_ptr<const GramSolver> LinearOp::gram_solver(double eps, GramPath path) const {
  const auto key = std::pair(eps, static_cast<int>(path));
  {
    std::scoped_lock lock(cache_mutex_);
    auto it = gram_cache_.find(key);
    if (it != gram_cache_.end()) return it->second;
  }

  std::shared_ptr<const GramSolver> solver;
  if (path == GramPath::ForceCg) {
    solver = std::make_shared<CgGram>(*this, eps);
  } else if (gram_is_identity()) {
    solver = std::make_shared<ScaledIdentityGram>(eps);
  } else if (const Cvec* s = circulant_symbol()) {
    solver = std::make_shared<CirculantGram>(*s, *domain_shape(), eps);
  } else if (rows_ <= kGramDenseRowsCap && rows_ * cols_ <= kMaterializeCapEntries) {
    solver = std::make_shared<DenseCholGram>(materialize(), eps);
  } else {
    solver = std::make_shared<CgGram>(*this, eps);
  }

  std::scoped_lock lock(cache_mutex_);
  auto [it, inserted] = gram_cache_.try_emplace(key, std::move(solver));
  return it->second;
}

// --- concrete operators -----------------------------------------------------

namespace {

class IdentityOp final : public LinearOp {
 public:
  explicit IdentityOp(Index n) : LinearOp(n, n) {}
  bool gram_is_identity() const override { return true; }

 protected:
  Vec do_apply(const Vec& x) const override { return x; }
  Vec do_adjoint(const Vec& v) const override { return v; }
  Mat do_materialize() const override { return Mat::Identity(rows(), cols()); }
};

class InpaintMaskOp final : public LinearOp {
 public:
  InpaintMaskOp(std::vector<Index> kept, Index n)
      : LinearOp(static_cast<Index>(kept.size()), n), kept_(std::move(kept)) {
    for (std::size_t i = 0; i < kept_.size(); ++i) {
      if (kept_[i] < 0 || kept_[i] >= n) throw DimensionError("inpaint_mask: index out of range");
      if (i > 0 && kept_[i] <= kept_[i - 1]) {
        throw DimensionError("inpaint_mask: indices must be sorted and unique");
      }
    }
  }

  bool gram_is_identity() const override { return true; }

 protected:
  Vec do_apply(const Vec& x) const override {
    Vec out(rows());
    for (Index i = 0; i < rows(); ++i) out[i] = x[kept_[static_cast<std::size_t>(i)]];
    return out;
  }

  Vec do_adjoint(const Vec& v) const override {
    Vec out = Vec::Zero(cols());
    for (Index i = 0; i < rows(); ++i) out[kept_[static_cast<std::size_t>(i)]] = v[i];
    return out;
  }

 private:
  std::vector<Index> kept_;
};

class CirculantConv2DOp final : public LinearOp {
 public:
  CirculantConv2DOp(const Mat& kernel, const Shape2D& shape)
      : LinearOp(shape.size(), shape.size()), shape_(shape) {
    const Index kr = kernel.rows(), kc = kernel.cols();
    if (kr % 2 == 0 || kc % 2 == 0) throw ShapeError("circulant_conv2d: kernel must be odd-sized");
    if (kr > shape.rows || kc > shape.cols) {
      throw ShapeError("circulant_conv2d: kernel larger than the grid");
    }
    // Impulse response: kernel centered at the origin with circular wrap.
    Vec h = Vec::Zero(shape.size());
    const Index cr = kr / 2, cc = kc / 2;
    for (Index a = 0; a < kr; ++a) {
      for (Index b = 0; b < kc; ++b) {
        const Index i = ((a - cr) % shape.rows + shape.rows) % shape.rows;
        const Index j = ((b - cc) % shape.cols + shape.cols) % shape.cols;
        h[i * shape.cols + j] += kernel(a, b);
      }
    }
    symbol_ = fft::fft2(shape_, h);
    const double smax = symbol_.cwiseAbs().maxCoeff();
    const double smin = symbol_.cwiseAbs().minCoeff();
    if (smin <= 1e-12 * smax) {
      throw DimensionError("circulant_conv2d: kernel has (near-)zero DFT bins, operator rank deficient");
    }
  }

  std::optional<Shape2D> domain_shape() const override { return shape_; }
  const Cvec* circulant_symbol() const override { return &symbol_; }

 protected:
  Vec do_apply(const Vec& x) const override {
    Cvec f = fft::fft2(shape_, x);
    f.array() *= symbol_.array();
    return fft::ifft2_real(shape_, std::move(f));
  }

  Vec do_adjoint(const Vec& v) const override {
    Cvec f = fft::fft2(shape_, v);
    f.array() *= symbol_.conjugate().array();
    return fft::ifft2_real(shape_, std::move(f));
  }

 private:
  Shape2D shape_;
  Cvec symbol_;
};

class Downsample2DOp final : public LinearOp {
 public:
  Downsample2DOp(Index factor, const Shape2D& shape)
      : LinearOp(((shape.rows + factor - 1) / factor) * ((shape.cols + factor - 1) / factor),
                 shape.size()),
        factor_(factor),
        in_(shape),
        out_{(shape.rows + factor - 1) / factor, (shape.cols + factor - 1) / factor} {
    if (factor < 1) throw DimensionError("downsample2d: factor must be >= 1");
  }

  std::optional<Shape2D> domain_shape() const override { return in_; }
  Shape2D output_shape() const { return out_; }
  bool gram_is_identity() const override { return true; }

 protected:
  Vec do_apply(const Vec& x) const override {
    Vec out(rows());
    for (Index i = 0; i < out_.rows; ++i) {
      for (Index j = 0; j < out_.cols; ++j) {
        out[i * out_.cols + j] = x[(i * factor_) * in_.cols + j * factor_];
      }
    }
    return out;
  }

  Vec do_adjoint(const Vec& v) const override {
    Vec out = Vec::Zero(cols());
    for (Index i = 0; i < out_.rows; ++i) {
      for (Index j = 0; j < out_.cols; ++j) {
        out[(i * factor_) * in_.cols + j * factor_] = v[i * out_.cols + j];
      }
    }
    return out;
  }

 private:
  Index factor_;
  Shape2D in_;
  Shape2D out_;
};

class CompositeOp final : public LinearOp {
 public:
  explicit CompositeOp(std::vector<OpPtr> stages)
      : LinearOp(stages.back()->rows(), stages.front()->cols()), stages_(std::move(stages)) {
    for (std::size_t i = 0; i + 1 < stages_.size(); ++i) {
      if (stages_[i + 1]->cols() != stages_[i]->rows()) {
        throw DimensionError("compose: stage dimensions do not chain");
      }
    }
  }

  std::optional<Shape2D> domain_shape() const override { return stages_.front()->domain_shape(); }

 protected:
  Vec do_apply(const Vec& x) const override {
    Vec cur = x;
    for (const auto& s : stages_) cur = s->apply(cur);
    return cur;
  }

  Vec do_adjoint(const Vec& v) const override {
    Vec cur = v;
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) cur = (*it)->adjoint(cur);
    return cur;
  }

  Mat do_apply_mat(const Mat& x) const override {
    Mat cur = x;
    for (const auto& s : stages_) cur = s->apply_mat(cur);
    return cur;
  }

 private:
  std::vector<OpPtr> stages_;
};

// Subclasses must either preset the dense form at construction or override
// do_materialize(); the apply paths all read through materialize().
class DenseOp : public LinearOp {
 public:
  explicit DenseOp(Mat entries) : LinearOp(entries.rows(), entries.cols()) {
    // Full row rank is part of the model; cheap to verify at small scale.
    if (entries.size() <= Index(1) << 18) {
      Eigen::JacobiSVD<Mat> svd(entries);
      const Vec& sv = svd.singularValues();
      const double cutoff = static_cast<double>(std::max(entries.rows(), entries.cols())) *
                            std::numeric_limits<double>::epsilon() * sv[0];
      if (sv[sv.size() - 1] <= cutoff) {
        throw DimensionError("dense_op: matrix is not full row rank");
      }
    }
    preset_dense(std::move(entries));
  }

 protected:
  DenseOp(Index rows, Index cols) : LinearOp(rows, cols) {}

  Vec do_apply(const Vec& x) const override { return materialize() * x; }
  Vec do_adjoint(const Vec& v) const override { return materialize().transpose() * v; }
  Mat do_apply_mat(const Mat& x) const override { return materialize() * x; }
};

class GaussianMeasurementOp final : public DenseOp {
 public:
  GaussianMeasurementOp(Index m, Index n, std::uint64_t seed) : DenseOp(m, n), seed_(seed) {}

 protected:
  // Entries are drawn lazily (row-major) so huge instances can be constructed
  // and have their dimensions inspected without allocating the matrix.
  Mat do_materialize() const override {
    std::mt19937_64 rng(seed_);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(rows())));
    Mat m(rows(), cols());
    for (Index i = 0; i < rows(); ++i) {
      for (Index j = 0; j < cols(); ++j) m(i, j) = dist(rng);
    }
    return m;
  }

 private:
  std::uint64_t seed_;
};

class HaarBasis2DOp final : public LinearOp {
 public:
  explicit HaarBasis2DOp(const Shape2D& shape) : LinearOp(shape.size(), shape.size()), shape_(shape) {
    if (shape.rows != shape.cols || !is_pow2(shape.rows)) {
      throw ShapeError("haar_basis2d: shape must be square with power-of-two side");
    }
  }

  std::optional<Shape2D> domain_shape() const override { return shape_; }
  bool gram_is_identity() const override { return true; }

 protected:
  // Full analysis pyramid; each level transforms the current low-pass block
  // along rows then columns with the orthonormal pair ((a+b), (a-b))/sqrt(2).
  Vec do_apply(const Vec& x) const override {
    const Index N = shape_.rows;
    Vec buf = x;
    std::vector<double> tmp(static_cast<std::size_t>(N));
    for (Index size = N; size >= 2; size /= 2) {
      const Index half = size / 2;
      for (Index i = 0; i < size; ++i) {  // rows
        for (Index j = 0; j < half; ++j) {
          const double a = buf[i * N + 2 * j], b = buf[i * N + 2 * j + 1];
          tmp[static_cast<std::size_t>(j)] = (a + b) * std::numbers::sqrt2 / 2.0;
          tmp[static_cast<std::size_t>(half + j)] = (a - b) * std::numbers::sqrt2 / 2.0;
        }
        for (Index j = 0; j < size; ++j) buf[i * N + j] = tmp[static_cast<std::size_t>(j)];
      }
      for (Index j = 0; j < size; ++j) {  // columns
        for (Index i = 0; i < half; ++i) {
          const double a = buf[(2 * i) * N + j], b = buf[(2 * i + 1) * N + j];
          tmp[static_cast<std::size_t>(i)] = (a + b) * std::numbers::sqrt2 / 2.0;
          tmp[static_cast<std::size_t>(half + i)] = (a - b) * std::numbers::sqrt2 / 2.0;
        }
        for (Index i = 0; i < size; ++i) buf[i * N + j] = tmp[static_cast<std::size_t>(i)];
      }
    }
    return buf;
  }

  Vec do_adjoint(const Vec& v) const override {
    const Index N = shape_.rows;
    Vec buf = v;
    std::vector<double> tmp(static_cast<std::size_t>(N));
    for (Index size = 2; size <= N; size *= 2) {
      const Index half = size / 2;
      for (Index j = 0; j < size; ++j) {  // columns first (reverse of forward)
        for (Index i = 0; i < half; ++i) {
          const double lo = buf[i * N + j], hi = buf[(half + i) * N + j];
          tmp[static_cast<std::size_t>(2 * i)] = (lo + hi) * std::numbers::sqrt2 / 2.0;
          tmp[static_cast<std::size_t>(2 * i + 1)] = (lo - hi) * std::numbers::sqrt2 / 2.0;
        }
        for (Index i = 0; i < size; ++i) buf[i * N + j] = tmp[static_cast<std::size_t>(i)];
      }
      for (Index i = 0; i < size; ++i) {  // rows
        for (Index j = 0; j < half; ++j) {
          const double lo = buf[i * N + j], hi = buf[i * N + half + j];
          tmp[static_cast<std::size_t>(2 * j)] = (lo + hi) * std::numbers::sqrt2 / 2.0;
          tmp[static_cast<std::size_t>(2 * j + 1)] = (lo - hi) * std::numbers::sqrt2 / 2.0;
        }
        for (Index j = 0; j < size; ++j) buf[i * N + j] = tmp[static_cast<std::size_t>(j)];
      }
    }
    return buf;
  }

 private:
  Shape2D shape_;
};

}  // namespace

OpPtr identity_op(Index n) { return std::make_shared<IdentityOp>(n); }

OpPtr inpaint_mask(std::vector<Index> kept, Index n) {
  return std::make_shared<InpaintMaskOp>(std::move(kept), n);
}

OpPtr circulant_conv2d(const Mat& kernel, const Shape2D& shape) {
  return std::make_shared<CirculantConv2DOp>(kernel, shape);
}

OpPtr downsample2d(Index factor, const Shape2D& shape) {
  return std::make_shared<Downsample2DOp>(factor, shape);
}

OpPtr compose(std::vector<OpPtr> stages) {
  if (stages.empty()) throw DimensionError("compose: empty stage list");
  if (stages.size() == 1) return stages.front();
  return std::make_shared<CompositeOp>(std::move(stages));
}

OpPtr dense_op(Mat entries) { return std::make_shared<DenseOp>(std::move(entries)); }

OpPtr gaussian_measurement(Index m, Index n, std::uint64_t seed) {
  if (m > n) throw DimensionError("gaussian_measurement: m must be <= n");
  return std::make_shared<GaussianMeasurementOp>(m, n, seed);
}

OpPtr haar_basis2d(const Shape2D& shape) { return std::make_shared<HaarBasis2DOp>(shape); }

Mat gaussian_kernel(Index size, double sigma) {
  if (size % 2 == 0 || size < 1) throw ShapeError("gaussian_kernel: size must be odd");
  const Index r = size / 2;
  Mat k(size, size);
  for (Index i = -r; i <= r; ++i) {
    for (Index j = -r; j <= r; ++j) {
      k(i + r, j + r) = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
    }
  }
  return k / k.sum();
}

Mat uniform_kernel(Index size) {
  if (size % 2 == 0 || size < 1) throw ShapeError("uniform_kernel: size must be odd");
  return Mat::Constant(size, size, 1.0 / static_cast<double>(size * size));
}

Vec pseudo_inverse_apply(const LinearOp& op, const Vec& v, double eps, GramPath path) {
  if (v.size() != op.rows()) throw DimensionError("pseudo_inverse_apply: input length mismatch");
  return op.adjoint(op.gram_solver(eps, path)->solve(v));
}

Vec project_rowspace(const LinearOp& op, const Vec& x, double eps, GramPath path) {
  if (x.size() != op.cols()) throw DimensionError("project_rowspace: input length mismatch");
  return pseudo_inverse_apply(op, op.apply(x), eps, path);
}

// --- spectral analysis ------------------------------------------------------

namespace {

// Real SVD basis of a circulant operator: for every conjugate pair {f, -f}
// the normalized cosine and sine gratings are right singular vectors with
// singular value |s(f)|; self-conjugate frequencies contribute a single
// (+-1)-valued cosine column.
SpectralDecomposition circulant_spectrum(const Cvec& symbol, const Shape2D& shape) {
  const Index H = shape.rows, W = shape.cols, n = shape.size();
  struct Freq {
    double sval;
    Index f1, f2;
    bool pair;
  };
  std::vector<Freq> freqs;
  freqs.reserve(static_cast<std::size_t>(n));
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (Index f1 = 0; f1 < H; ++f1) {
    for (Index f2 = 0; f2 < W; ++f2) {
      const Index idx = f1 * W + f2;
      if (used[static_cast<std::size_t>(idx)]) continue;
      const Index g1 = (H - f1) % H, g2 = (W - f2) % W;
      const bool self = (g1 == f1 && g2 == f2);
      used[static_cast<std::size_t>(idx)] = 1;
      used[static_cast<std::size_t>(g1 * W + g2)] = 1;
      freqs.push_back({std::abs(symbol[idx]), f1, f2, !self});
    }
  }
  std::stable_sort(freqs.begin(), freqs.end(),
                   [](const Freq& a, const Freq& b) { return a.sval > b.sval; });

  SpectralDecomposition out;
  out.m = n;
  out.n = n;
  out.singular_values.resize(n);
  out.right_basis.resize(n, n);

  const double two_pi = 2.0 * std::numbers::pi;
  Index col = 0;
  for (const Freq& f : freqs) {
    const double norm_pair = std::sqrt(static_cast<double>(n) / 2.0);
    const double norm_self = std::sqrt(static_cast<double>(n));
    for (Index p1 = 0; p1 < H; ++p1) {
      for (Index p2 = 0; p2 < W; ++p2) {
        // Phase reduced with integer mod first, so the cos/sin arguments stay small.
        const double phase = static_cast<double>((f.f1 * p1) % H) / static_cast<double>(H) +
                             static_cast<double>((f.f2 * p2) % W) / static_cast<double>(W);
        const double theta = two_pi * phase;
        const Index p = p1 * W + p2;
        out.right_basis(p, col) = std::cos(theta) / (f.pair ? norm_pair : norm_self);
        if (f.pair) out.right_basis(p, col + 1) = std::sin(theta) / norm_pair;
      }
    }
    out.singular_values[col] = f.sval;
    if (f.pair) out.singular_values[col + 1] = f.sval;
    col += f.pair ? 2 : 1;
  }
  return out;
}

}  // namespace

SpectralDecomposition spectrum(const LinearOp& op) {
  if (const Cvec* s = op.circulant_symbol()) {
    return circulant_spectrum(*s, *op.domain_shape());
  }
  if (op.cols() > kSpectrumDomainCap) {
    throw UnsupportedScale("spectrum: dense decomposition is capped at n = 8192");
  }
  const Mat& a = op.materialize();
  Mat gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigendecomposition failed");

  const Index m = op.rows(), n = op.cols();
  SpectralDecomposition out;
  out.m = m;
  out.n = n;
  out.singular_values.resize(m);
  Mat left(m, m);
  for (Index i = 0; i < m; ++i) {  // eigenvalues come back ascending
    const double ev = es.eigenvalues()[m - 1 - i];
    if (!(ev > 0.0)) throw NumericalError("spectrum: operator is rank deficient");
    out.singular_values[i] = std::sqrt(ev);
    left.col(i) = es.eigenvectors().col(m - 1 - i);
  }
  // v_i = A^T u_i / lambda_i.
  out.right_basis = a.transpose() * (left * out.singular_values.cwiseInverse().asDiagonal());
  out.left_basis = std::move(left);
  return out;
}

Vec singular_values_only(const LinearOp& op) {
  if (const Cvec* s = op.circulant_symbol()) {
    Vec vals = s->cwiseAbs();
    std::sort(vals.data(), vals.data() + vals.size(), std::greater<double>());
    return vals;
  }
  const Mat& a = op.materialize();
  Mat gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("singular_values_only: eig failed");
  const Index m = op.rows();
  Vec vals(m);
  for (Index i = 0; i < m; ++i) vals[i] = std::sqrt(std::max(0.0, es.eigenvalues()[m - 1 - i]));
  return vals;
}

double condition_number_sq(const SpectralDecomposition& spec) {
  return condition_number_sq(spec.singular_values);
}

double condition_number_sq(const Vec& singular_values) {
  if (singular_values.size() == 0) throw DimensionError("condition_number_sq: empty spectrum");
  const double lo = singular_values[singular_values.size() - 1];
  const double hi = singular_values[0];
  if (lo <= 0.0) throw NumericalError("condition_number_sq: zero singular value");
  return (hi / lo) * (hi / lo);
}

PowerEstimate power_method(const std::function<Vec(const Vec&)>& sym_apply, Index n,
                           int max_iters, double tol) {
  Vec v = gaussian_vector(n, /*seed=*/0x5EEDBA5Eu);
  v /= v.norm();
  PowerEstimate est;
  double prev = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    Vec z = sym_apply(v);
    est.value = v.dot(z);
    ++est.iterations;
    const double zn = z.norm();
    if (zn == 0.0) {  // v is in the null space; estimate is exactly 0
      est.converged = true;
      return est;
    }
    v = z / zn;
    if (k > 0 && std::abs(est.value - prev) <= tol * std::max(std::abs(est.value), 1e-300)) {
      est.converged = true;
      return est;
    }
    prev = est.value;
  }
  return est;
}

PowerEstimate sq_spectral_norm(const LinearOp& op, int max_iters, double tol) {
  return power_method([&op](const Vec& x) { return op.adjoint(op.apply(x)); }, op.cols(),
                      max_iters, tol);
}

}  // namespace bpfid
