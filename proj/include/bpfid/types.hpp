#pragma once

// Core aliases, image shape, error types and seed utilities shared by all
// bpfid components.

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bpfid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Cvec = Eigen::VectorXcd;
using Index = Eigen::Index;

// 2D layout of a vectorized image. Pixel (i, j) lives at index i*cols + j
// (row-major), values are on the usual 8-bit [0, 255] scale.
struct Shape2D {
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
  bool operator==(const Shape2D&) const = default;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedScale : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver gave up before reaching its tolerance.
struct ConvergenceError : std::runtime_error {
  double residual_norm;

  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_norm(residual) {}
};

// splitmix64 step, used to derive independent substreams from one user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vec gaussian_vector(Index n, std::uint64_t seed, double stddev = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace bpfid
