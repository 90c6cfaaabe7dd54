#pragma once

// Image-domain error metrics on flattened pixel vectors (8-bit peak of 255).

#include "bpfid/types.hpp"

#include <cmath>
#include <limits>

namespace bpfid {

// Mean squared error per pixel.
inline double mse_per_pixel(const Vec& estimate, const Vec& reference) {
  if (estimate.size() != reference.size()) throw DimensionError("mse: length mismatch");
  if (estimate.size() == 0) throw DimensionError("mse: empty input");
  return (estimate - reference).squaredNorm() / static_cast<double>(estimate.size());
}

// 10 log10(255^2 / mse); +infinity for an exact reconstruction.
inline double psnr_db(const Vec& estimate, const Vec& reference) {
  const double m = mse_per_pixel(estimate, reference);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

}  // namespace bpfid
