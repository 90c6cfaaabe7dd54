#pragma once

// Experiment orchestration: scenario construction (super-resolution,
// deblurring, compressed sensing, inpainting), noise injection, the synthetic
// test image, PGM I/O, and beta-sweeps emitting CSV rows.

#include "bpfid/fidelity.hpp"
#include "bpfid/linops.hpp"
#include "bpfid/priors.hpp"
#include "bpfid/solvers.hpp"
#include "bpfid/tikhonov.hpp"
#include "bpfid/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bpfid {

enum class Scenario { SuperResolutionX3, DeblurUniform9, CompressedSensing, Inpainting };
enum class PriorChoice { L2Identity, L2FiniteDiff, Tv, Denoiser };
enum class SolverChoice { ClosedForm, Ista, Fista, Idbp, Cg };

// Exactly one of the two ways to pin the noise level.
struct NoiseSpec {
  std::optional<double> sigma_e;
  std::optional<double> snr_db;

  static NoiseSpec noiseless() { return {0.0, std::nullopt}; }
  static NoiseSpec sigma(double s) { return {s, std::nullopt}; }
  static NoiseSpec snr(double db) { return {std::nullopt, db}; }
};

struct ExperimentSpec {
  Scenario scenario = Scenario::SuperResolutionX3;
  Index size = 64;                        // image side (square)
  double m_ratio = 0.5;                   // compressed sensing: m / n
  double keep_ratio = 0.8;                // inpainting: kept-pixel fraction
  std::optional<std::string> image_path;  // 8-bit PGM; default: synthetic phantom

  FidelityKind fidelity = FidelityKind::LeastSquares;
  std::optional<double> eps;  // BP loading; default 0, except deblur BP: 0.01 sigma_e^2

  PriorChoice prior = PriorChoice::L2Identity;
  std::string denoiser_name = "median3";  // identity | median3 | l2 | tv

  std::vector<double> beta_grid = {1.0};
  NoiseSpec noise = NoiseSpec::noiseless();

  SolverChoice solver = SolverChoice::ClosedForm;
  int iters = 0;  // 0 = scenario/prior default (see default_iters)

  std::uint64_t seed = 0;
  int draws = 5;              // noise realizations per beta; forced to 1 when noiseless
  bool record_timing = true;  // false leaves wall_ms empty => byte-deterministic output
};

struct ScenarioBundle {
  OpPtr op;
  Shape2D shape;     // signal-domain shape
  Vec ground_truth;  // pixel values in [0, 255]
  std::string label;
};

ScenarioBundle build_scenario(const ExperimentSpec& spec);

// Solver starting point: bicubic upsampling of y for SR, y itself for
// deblurring, zero for CS, zero-filled adjoint for inpainting.
Vec initial_estimate(const ExperimentSpec& spec, const ScenarioBundle& bundle, const Vec& y);

struct NoisyObservations {
  Vec y;
  double sigma_e;  // resolved value (computed from SNR when requested)
};

// i.i.d. Gaussian noise; SNR mode sets sigma^2 = ||y_clean||^2 / (m 10^(snr/10)).
NoisyObservations add_noise(const Vec& y_clean, const NoiseSpec& noise, std::uint64_t seed);

// Two-pass cubic-convolution interpolation (kernel parameter a = -0.5,
// replicate edges); output is (factor*rows) x (factor*cols), sampling input
// coordinate i/factor so the original samples are reproduced at phase 0.
Vec bicubic_upsample(const Shape2D& lo_shape, const Vec& lo, Index factor);

// Deterministic piecewise-smooth 8-bit test image (integer values) with flat
// regions, sharp edges, and a smooth background gradient.
Vec make_phantom(const Shape2D& shape);

struct PgmImage {
  Shape2D shape;
  Vec pixels;
};

PgmImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Shape2D& shape, const Vec& pixels);

struct SweepRow {
  std::string scenario, fidelity, prior;
  double beta = 0.0;
  double eps = 0.0;
  double sigma_e = 0.0;
  std::uint64_t seed = 0;  // per-draw noise seed
  double psnr_db = 0.0;
  double mse = 0.0;  // empirical squared error per pixel
  std::optional<double> bias_sq, variance;  // analytic per-pixel values (l2 + closed cells)
  int iters = 0;
  std::optional<double> wall_ms;
  std::string error;  // non-empty marks a failed cell (numeric fields left empty in CSV)
};

extern const char* const kSweepCsvHeader;

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string provenance;       // resolved spec dump (same text as describe())
  std::uint64_t spec_hash = 0;  // FNV-1a of the provenance text
  std::uint64_t seed = 0;

  std::string csv() const;
};

// Runs every (beta x draw) cell, concurrently, merging rows in deterministic
// (beta, draw) order. Draw d uses noise seed mix_seed(spec.seed, d) for every
// beta and fidelity, so comparisons across cells are paired. A failing cell
// records its error and never aborts the sweep. For the Idbp solver the grid
// value is interpreted as the effective beta = (sigma_e + delta)^2, i.e.
// delta = sqrt(beta) - sigma_e.
SweepResult run_sweep(const ExperimentSpec& spec);

// Parses csv() output back into rows (numeric fields; empty stays unset).
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

// One (beta, draw) cell solved outside a sweep, exposing the estimate itself
// (errors propagate instead of being recorded).
struct SolveOutcome {
  SweepRow row;
  Vec estimate;
};

SolveOutcome run_single(const ExperimentSpec& spec, double beta, int draw = 0);

// Human-readable resolved spec (all defaults filled in) for provenance.
std::string describe(const ExperimentSpec& spec);

int default_iters(const ExperimentSpec& spec);
double default_eps(const ExperimentSpec& spec, double sigma_e);

// Builds the named stock denoiser for this image shape ("identity", "median3",
// "l2" = identity-D prox, "tv").
Denoiser make_denoiser(const std::string& name, const Shape2D& shape);

}  // namespace bpfid
