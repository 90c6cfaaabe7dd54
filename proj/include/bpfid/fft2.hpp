#pragma once

// Thin 2D FFT layer over FFTW, shared by the circulant operator fast paths
// and the TV prox. Plans are cached per (rows, cols, direction) and executed
// through the new-array interface, so concurrent transforms are safe.

#include "bpfid/types.hpp"

#include <complex>

namespace bpfid::fft {

// In-place 2D transform of a row-major rows x cols complex grid.
// The inverse transform includes the 1/(rows*cols) normalization.
void fft2_inplace(const Shape2D& shape, std::complex<double>* data, bool inverse);

// Forward transform of a real vectorized image.
Cvec fft2(const Shape2D& shape, const Vec& x);

// Inverse transform, returning the real part (imaginary residue of a
// physically-real result is ~1e-16 and is dropped).
Vec ifft2_real(const Shape2D& shape, Cvec spectrum);

}  // namespace bpfid::fft
