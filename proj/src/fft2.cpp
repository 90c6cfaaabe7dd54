#include "bpfid/fft2.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace bpfid::fft {
namespace {

// FFTW's planner is not thread-safe; executing distinct plans (or one plan on
// different arrays via fftw_execute_dft) is. Plans are created once per
// (rows, cols, sign) under a mutex with FFTW_UNALIGNED so they accept any
// caller buffer.
class PlanCache {
 public:
  fftw_plan get(Index rows, Index cols, int sign) {
    std::scoped_lock lock(mutex_);
    auto key = std::tuple(rows, cols, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<std::complex<double>> scratch(static_cast<std::size_t>(rows * cols));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                                      buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_[key] = plan;
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<Index, Index, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

void fft2_inplace(const Shape2D& shape, std::complex<double>* data, bool inverse) {
  if (shape.rows <= 0 || shape.cols <= 0) throw ShapeError("fft2: empty shape");
  fftw_plan plan = cache().get(shape.rows, shape.cols, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, buf, buf);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(shape.size());
    for (Index i = 0; i < shape.size(); ++i) data[i] *= scale;
  }
}

Cvec fft2(const Shape2D& shape, const Vec& x) {
  if (x.size() != shape.size()) throw ShapeError("fft2: vector does not match shape");
  Cvec buf = x.cast<std::complex<double>>();
  fft2_inplace(shape, buf.data(), /*inverse=*/false);
  return buf;
}

Vec ifft2_real(const Shape2D& shape, Cvec spectrum) {
  if (spectrum.size() != shape.size()) throw ShapeError("ifft2: vector does not match shape");
  fft2_inplace(shape, spectrum.data(), /*inverse=*/true);
  return spectrum.real();
}

}  // namespace bpfid::fft
