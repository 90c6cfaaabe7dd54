#include "bpfid/harness.hpp"

#include "bpfid/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bpfid {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string scenario_label(const ExperimentSpec& spec) {
  std::ostringstream os;
  switch (spec.scenario) {
    case Scenario::SuperResolutionX3: os << "srx3-" << spec.size; break;
    case Scenario::DeblurUniform9: os << "deblur9-" << spec.size; break;
    case Scenario::CompressedSensing: os << "cs-" << format_double(spec.m_ratio) << "-" << spec.size; break;
    case Scenario::Inpainting: os << "inpaint-" << format_double(spec.keep_ratio) << "-" << spec.size; break;
  }
  return os.str();
}

std::string fidelity_label(FidelityKind kind) {
  return kind == FidelityKind::LeastSquares ? "ls" : "bp";
}

std::string prior_label(const ExperimentSpec& spec) {
  switch (spec.prior) {
    case PriorChoice::L2Identity: return "l2";
    case PriorChoice::L2FiniteDiff: return "l2fd";
    case PriorChoice::Tv: return "tv";
    case PriorChoice::Denoiser: return "denoiser:" + spec.denoiser_name;
  }
  return "?";
}

double resolve_sigma(const Vec& y_clean, const NoiseSpec& noise) {
  if (noise.sigma_e && noise.snr_db) {
    throw NumericalError("noise spec: set sigma_e or snr_db, not both");
  }
  if (noise.snr_db) {
    if (y_clean.size() == 0) throw DimensionError("noise spec: empty observations");
    const double power = y_clean.squaredNorm() / static_cast<double>(y_clean.size());
    return std::sqrt(power / std::pow(10.0, *noise.snr_db / 10.0));
  }
  const double s = noise.sigma_e.value_or(0.0);
  if (s < 0.0) throw NumericalError("noise spec: sigma_e must be >= 0");
  return s;
}

Vec load_ground_truth(const ExperimentSpec& spec, Shape2D& shape) {
  if (spec.image_path) {
    PgmImage img = read_pgm(*spec.image_path);
    shape = img.shape;
    return std::move(img.pixels);
  }
  shape = Shape2D{spec.size, spec.size};
  return make_phantom(shape);
}

// Cubic-convolution kernel (Keys, a = -0.5).
double cubic_weight(double s) {
  constexpr double a = -0.5;
  s = std::abs(s);
  if (s <= 1.0) return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0;
  if (s < 2.0) return a * (((s - 5.0) * s + 8.0) * s - 4.0);
  return 0.0;
}

// One axis of the two-pass interpolation: width w -> factor*w, replicate edges.
void upsample_rows_axis(const Mat& in, Mat& out, Index factor) {
  const Index w = in.cols(), wo = w * factor;
  out.resize(in.rows(), wo);
  for (Index j = 0; j < wo; ++j) {
    const double c = static_cast<double>(j) / static_cast<double>(factor);
    const Index j0 = static_cast<Index>(std::floor(c));
    const double f = c - static_cast<double>(j0);
    Index taps[4];
    double wts[4];
    for (int k = -1; k <= 2; ++k) {
      taps[k + 1] = std::clamp<Index>(j0 + k, 0, w - 1);
      wts[k + 1] = cubic_weight(f - static_cast<double>(k));
    }
    out.col(j) = wts[0] * in.col(taps[0]) + wts[1] * in.col(taps[1]) + wts[2] * in.col(taps[2]) +
                 wts[3] * in.col(taps[3]);
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ScenarioBundle build_scenario(const ExperimentSpec& spec) {
  ScenarioBundle bundle;
  bundle.ground_truth = load_ground_truth(spec, bundle.shape);
  bundle.label = scenario_label(spec);
  const Index n = bundle.shape.size();

  switch (spec.scenario) {
    case Scenario::SuperResolutionX3: {
      OpPtr blur = circulant_conv2d(gaussian_kernel(7, 1.6), bundle.shape);
      OpPtr down = downsample2d(3, bundle.shape);
      bundle.op = compose({std::move(blur), std::move(down)});
      break;
    }
    case Scenario::DeblurUniform9:
      bundle.op = circulant_conv2d(uniform_kernel(9), bundle.shape);
      break;
    case Scenario::CompressedSensing: {
      if (!(spec.m_ratio > 0.0 && spec.m_ratio <= 1.0)) {
        throw DimensionError("build_scenario: m_ratio must lie in (0, 1]");
      }
      const Index m = std::max<Index>(1, static_cast<Index>(std::llround(spec.m_ratio * n)));
      OpPtr basis = haar_basis2d(bundle.shape);
      OpPtr meas = gaussian_measurement(m, n, mix_seed(spec.seed, 0xA11CEull));
      bundle.op = compose({std::move(basis), std::move(meas)});
      break;
    }
    case Scenario::Inpainting: {
      if (!(spec.keep_ratio > 0.0 && spec.keep_ratio <= 1.0)) {
        throw DimensionError("build_scenario: keep_ratio must lie in (0, 1]");
      }
      const Index m = std::max<Index>(1, static_cast<Index>(std::llround(spec.keep_ratio * n)));
      std::vector<Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), Index{0});
      auto rng = make_rng(mix_seed(spec.seed, 0x19A5Cull));
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(static_cast<std::size_t>(m));
      std::sort(all.begin(), all.end());
      bundle.op = inpaint_mask(std::move(all), n);
      break;
    }
  }
  return bundle;
}

Vec initial_estimate(const ExperimentSpec& spec, const ScenarioBundle& bundle, const Vec& y) {
  if (y.size() != bundle.op->rows()) throw DimensionError("initial_estimate: y length mismatch");
  switch (spec.scenario) {
    case Scenario::SuperResolutionX3: {
      const Shape2D lo{(bundle.shape.rows + 2) / 3, (bundle.shape.cols + 2) / 3};
      Vec hi = bicubic_upsample(lo, y, 3);
      // The upsampled grid covers ceil-sized dims times 3; crop to the target.
      const Index wide = lo.cols * 3;
      Vec out(bundle.shape.size());
      for (Index i = 0; i < bundle.shape.rows; ++i) {
        out.segment(i * bundle.shape.cols, bundle.shape.cols) =
            hi.segment(i * wide, bundle.shape.cols);
      }
      return out;
    }
    case Scenario::DeblurUniform9:
      return y;
    case Scenario::CompressedSensing:
      return Vec::Zero(bundle.shape.size());
    case Scenario::Inpainting:
      return bundle.op->adjoint(y);
  }
  throw DimensionError("initial_estimate: unknown scenario");
}

NoisyObservations add_noise(const Vec& y_clean, const NoiseSpec& noise, std::uint64_t seed) {
  const double sigma = resolve_sigma(y_clean, noise);
  if (sigma == 0.0) return {y_clean, 0.0};
  return {y_clean + gaussian_vector(y_clean.size(), seed, sigma), sigma};
}

Vec bicubic_upsample(const Shape2D& lo_shape, const Vec& lo, Index factor) {
  if (factor < 2) throw DimensionError("bicubic_upsample: factor must be >= 2");
  if (lo_shape.size() != lo.size()) throw ShapeError("bicubic_upsample: shape/vector mismatch");
  Mat img = Eigen::Map<const Mat>(lo.data(), lo_shape.cols, lo_shape.rows).transpose();
  Mat wide, tall;
  upsample_rows_axis(img, wide, factor);           // columns pass
  Mat wide_t = wide.transpose();
  upsample_rows_axis(wide_t, tall, factor);        // rows pass
  Mat hi = tall.transpose();
  Vec out(hi.rows() * hi.cols());
  for (Index i = 0; i < hi.rows(); ++i) {
    out.segment(i * hi.cols(), hi.cols()) = hi.row(i).transpose();
  }
  return out;
}

Vec make_phantom(const Shape2D& shape) {
  const Index H = shape.rows, W = shape.cols;
  if (H < 4 || W < 4) throw ShapeError("make_phantom: image too small");
  Vec img(shape.size());
  const double denom = static_cast<double>(H + W - 2);
  const double cx = 0.62 * static_cast<double>(H), cy = 0.64 * static_cast<double>(W);
  const double r = 0.21 * static_cast<double>(std::min(H, W));
  for (Index i = 0; i < H; ++i) {
    for (Index j = 0; j < W; ++j) {
      double v = 40.0 + 70.0 * (static_cast<double>(i) + static_cast<double>(j)) / denom;
      if (i >= H / 8 && i < H / 2 && j >= W / 8 && j < 3 * W / 8) v = 200.0;
      const double di = static_cast<double>(i) - cx, dj = static_cast<double>(j) - cy;
      if (di * di + dj * dj <= r * r) v = 90.0;
      if (i >= (17 * H) / 25 && i < (21 * H) / 25 && j >= (3 * W) / 25 && j < (7 * W) / 25)
        v = 235.0;
      if (j >= (39 * W) / 50 && j < (41 * W) / 50 && i < H / 2) v = 25.0;
      img[i * W + j] = std::clamp(std::round(v), 0.0, 255.0);
    }
  }
  return img;
}

PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pgm: cannot open " + path);
  auto next_token = [&f, &path]() -> std::string {
    std::string tok;
    int c;
    while ((c = f.get()) != EOF) {
      if (c == '#') {
        while ((c = f.get()) != EOF && c != '\n') {}
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw IoError("read_pgm: truncated header in " + path);
    return tok;
  };

  if (next_token() != "P5") throw IoError("read_pgm: not a binary PGM: " + path);
  const long w = std::stol(next_token());
  const long h = std::stol(next_token());
  const long maxval = std::stol(next_token());
  if (w <= 0 || h <= 0) throw IoError("read_pgm: bad dimensions in " + path);
  if (maxval != 255) throw IoError("read_pgm: only 8-bit images supported: " + path);

  PgmImage img;
  img.shape = Shape2D{static_cast<Index>(h), static_cast<Index>(w)};
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(f.gcount()) != raw.size()) {
    throw IoError("read_pgm: truncated pixel data in " + path);
  }
  img.pixels.resize(static_cast<Index>(raw.size()));
  for (std::size_t k = 0; k < raw.size(); ++k) img.pixels[static_cast<Index>(k)] = raw[k];
  return img;
}

void write_pgm(const std::string& path, const Shape2D& shape, const Vec& pixels) {
  if (shape.size() != pixels.size()) throw ShapeError("write_pgm: shape/vector mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_pgm: cannot open " + path);
  f << "P5\n" << shape.cols << " " << shape.rows << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(pixels.size()));
  for (Index k = 0; k < pixels.size(); ++k) {
    raw[static_cast<std::size_t>(k)] =
        static_cast<unsigned char>(std::clamp(std::round(pixels[k]), 0.0, 255.0));
  }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("write_pgm: write failed: " + path);
}

int default_iters(const ExperimentSpec& spec) {
  switch (spec.solver) {
    case SolverChoice::ClosedForm: return 0;
    case SolverChoice::Cg: return 2000;
    case SolverChoice::Idbp: return 200;
    case SolverChoice::Ista:
    case SolverChoice::Fista:
      if (spec.prior == PriorChoice::Tv) {
        return spec.scenario == Scenario::CompressedSensing ? 500 : 100;
      }
      return spec.prior == PriorChoice::Denoiser ? 200 : 500;
  }
  return 100;
}

double default_eps(const ExperimentSpec& spec, double sigma_e) {
  if (spec.fidelity == FidelityKind::BackProjection &&
      spec.scenario == Scenario::DeblurUniform9) {
    return 0.01 * sigma_e * sigma_e;
  }
  return 0.0;
}

Denoiser make_denoiser(const std::string& name, const Shape2D& shape) {
  if (name == "identity") return identity_denoiser();
  if (name == "median3") return median3_denoiser(shape);
  if (name == "l2") return l2_prox_denoiser(identity_prior(shape.size()));
  if (name == "tv") return tv_denoiser(shape);
  throw std::invalid_argument("unknown denoiser: " + name +
                              " (expected identity|median3|l2|tv)");
}

std::string describe(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "scenario: " << scenario_label(spec) << "\n";
  if (spec.scenario == Scenario::CompressedSensing) os << "m_ratio: " << spec.m_ratio << "\n";
  if (spec.scenario == Scenario::Inpainting) os << "keep_ratio: " << spec.keep_ratio << "\n";
  os << "image: " << (spec.image_path ? *spec.image_path : std::string("synthetic phantom"))
     << "\n";
  os << "fidelity: " << fidelity_label(spec.fidelity) << "\n";
  os << "eps: ";
  if (spec.eps) {
    os << *spec.eps;
  } else if (spec.fidelity == FidelityKind::BackProjection &&
             spec.scenario == Scenario::DeblurUniform9) {
    os << "auto (0.01 sigma_e^2)";
  } else {
    os << "0 (default)";
  }
  os << "\n";
  os << "prior: " << prior_label(spec) << "\n";
  os << "beta_grid:";
  for (double b : spec.beta_grid) os << " " << format_double(b);
  os << "\n";
  os << "noise: ";
  if (spec.noise.snr_db) {
    os << *spec.noise.snr_db << " dB SNR";
  } else {
    os << "sigma_e = " << spec.noise.sigma_e.value_or(0.0);
  }
  os << "\n";
  const char* solver = spec.solver == SolverChoice::ClosedForm ? "closed"
                       : spec.solver == SolverChoice::Ista     ? "ista"
                       : spec.solver == SolverChoice::Fista    ? "fista"
                       : spec.solver == SolverChoice::Idbp     ? "idbp"
                                                               : "cg";
  os << "solver: " << solver << "\n";
  os << "iters: " << (spec.iters > 0 ? spec.iters : default_iters(spec))
     << (spec.iters > 0 ? "" : " (default)") << "\n";
  os << "seed: " << spec.seed << "\n";
  os << "draws: " << spec.draws << "\n";
  os << "timing: " << (spec.record_timing ? "on" : "off") << "\n";
  return os.str();
}

// --- sweep ------------------------------------------------------------------

namespace {

struct SweepContext {
  const ExperimentSpec* spec = nullptr;
  ScenarioBundle bundle;
  Vec y_clean;
  double sigma_e = 0.0;
  int draws_eff = 1;
  int iters = 0;
  PriorPtr l2prior;  // set for the quadratic prior choices
  std::shared_ptr<const SpectralDecomposition> decomposition;  // analytic inputs, if available
  Vec gamma_sq;
};

SweepContext make_context(const ExperimentSpec& spec) {
  SweepContext ctx;
  ctx.spec = &spec;
  ctx.bundle = build_scenario(spec);
  ctx.y_clean = ctx.bundle.op->apply(ctx.bundle.ground_truth);
  ctx.sigma_e = resolve_sigma(ctx.y_clean, spec.noise);
  ctx.draws_eff = ctx.sigma_e == 0.0 ? 1 : std::max(1, spec.draws);
  ctx.iters = spec.iters > 0 ? spec.iters : default_iters(spec);

  if (spec.prior == PriorChoice::L2Identity) {
    ctx.l2prior = identity_prior(ctx.bundle.shape.size());
  } else if (spec.prior == PriorChoice::L2FiniteDiff) {
    ctx.l2prior = finite_difference_prior(ctx.bundle.shape);
  }

  // Analytic bias/variance columns: quadratic prior solved in closed form.
  const bool closed = spec.solver == SolverChoice::ClosedForm || spec.solver == SolverChoice::Cg;
  if (ctx.l2prior && closed) {
    try {
      ctx.decomposition = std::make_shared<const SpectralDecomposition>(spectrum(*ctx.bundle.op));
      ctx.gamma_sq = gamma_from_prior(*ctx.l2prior, *ctx.decomposition).gamma_sq;
    } catch (const UnsupportedScale&) {
      ctx.decomposition.reset();
    }
  }
  return ctx;
}

SweepRow row_skeleton(const SweepContext& ctx, double beta, int draw) {
  const ExperimentSpec& spec = *ctx.spec;
  SweepRow row;
  row.scenario = ctx.bundle.label;
  row.fidelity = fidelity_label(spec.fidelity);
  row.prior = prior_label(spec);
  row.beta = beta;
  row.sigma_e = ctx.sigma_e;
  row.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(draw));
  const double eps_eff = spec.eps.value_or(default_eps(spec, ctx.sigma_e));
  row.eps = spec.fidelity == FidelityKind::BackProjection ? eps_eff : 0.0;
  return row;
}

struct CellResult {
  SweepRow row;
  Vec estimate;
};

CellResult run_cell(const SweepContext& ctx, double beta, int draw) {
  const ExperimentSpec& spec = *ctx.spec;
  CellResult cell;
  cell.row = row_skeleton(ctx, beta, draw);
  const auto t0 = std::chrono::steady_clock::now();

  NoisyObservations obs = add_noise(ctx.y_clean, NoiseSpec::sigma(ctx.sigma_e), cell.row.seed);
  const double eps_eff = cell.row.eps;
  const OpPtr& op = ctx.bundle.op;
  Vec x;
  int iters_done = ctx.iters;

  switch (spec.solver) {
    case SolverChoice::ClosedForm:
    case SolverChoice::Cg: {
      if (!ctx.l2prior) {
        throw std::invalid_argument("closed-form/cg solvers require an l2 prior");
      }
      SolveOptions opts;
      if (spec.solver == SolverChoice::Cg) {
        opts.path = SolveOptions::Path::ForceCg;
        opts.cg_max_iters = ctx.iters;
      }
      TikhonovSolve sol = spec.fidelity == FidelityKind::LeastSquares
                              ? solve_ls_closed(*op, obs.y, beta, *ctx.l2prior, opts)
                              : solve_bp_closed(*op, obs.y, beta, eps_eff, *ctx.l2prior, opts);
      x = std::move(sol.x);
      iters_done = sol.iterations;
      break;
    }
    case SolverChoice::Ista:
    case SolverChoice::Fista: {
      FidelityTerm fid = spec.fidelity == FidelityKind::LeastSquares
                             ? FidelityTerm::least_squares(op, obs.y)
                             : FidelityTerm::back_projection(op, obs.y, eps_eff);
      ProxFn prox;
      if (ctx.l2prior) {
        PriorPtr prior = ctx.l2prior;
        prox = [prior](const Vec& z, double t) { return prior->prox(z, t); };
      } else if (spec.prior == PriorChoice::Tv) {
        Shape2D shape = ctx.bundle.shape;
        prox = [shape](const Vec& z, double t) { return tv_prox(shape, z, t); };
      } else {
        prox = as_prox(make_denoiser(spec.denoiser_name, ctx.bundle.shape));
      }
      ProxStepConfig cfg;
      cfg.beta = beta;
      cfg.iters = ctx.iters;
      cfg.momentum = spec.solver == SolverChoice::Fista ? Momentum::Nesterov : Momentum::None;
      x = prox_gradient(fid, prox, cfg, initial_estimate(spec, ctx.bundle, obs.y)).x;
      break;
    }
    case SolverChoice::Idbp: {
      Denoiser den;
      if (ctx.l2prior) {
        den = l2_prox_denoiser(ctx.l2prior);
      } else if (spec.prior == PriorChoice::Tv) {
        den = tv_denoiser(ctx.bundle.shape);
      } else {
        den = make_denoiser(spec.denoiser_name, ctx.bundle.shape);
      }
      // Grid value = effective prior weight (sigma_e + delta)^2.
      const double level = std::sqrt(beta);
      if (level < ctx.sigma_e) {
        throw std::invalid_argument("idbp: beta must be >= sigma_e^2 (delta >= 0)");
      }
      IdbpConfig cfg;
      cfg.sigma_e = ctx.sigma_e;
      cfg.delta = level - ctx.sigma_e;
      cfg.iters = ctx.iters;
      cfg.eps = eps_eff;
      x = idbp(op, obs.y, den, cfg, initial_estimate(spec, ctx.bundle, obs.y)).x;
      break;
    }
  }

  cell.row.psnr_db = psnr_db(x, ctx.bundle.ground_truth);
  cell.row.mse = mse_per_pixel(x, ctx.bundle.ground_truth);
  cell.row.iters = iters_done;
  if (ctx.decomposition) {
    const double n = static_cast<double>(ctx.bundle.shape.size());
    MseBreakdown mb =
        spec.fidelity == FidelityKind::LeastSquares
            ? mse_ls_analytic(*ctx.decomposition, ctx.bundle.ground_truth, ctx.gamma_sq, beta,
                              ctx.sigma_e)
            : mse_bp_analytic(*ctx.decomposition, ctx.bundle.ground_truth, ctx.gamma_sq, beta,
                              ctx.sigma_e, eps_eff);
    cell.row.bias_sq = mb.bias_sq / n;
    cell.row.variance = mb.variance / n;
  }
  if (spec.record_timing) {
    cell.row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  cell.estimate = std::move(x);
  return cell;
}

}  // namespace

SweepResult run_sweep(const ExperimentSpec& spec) {
  if (spec.beta_grid.empty()) throw std::invalid_argument("run_sweep: empty beta grid");
  for (double b : spec.beta_grid) {
    if (!(b > 0.0)) throw std::invalid_argument("run_sweep: beta values must be positive");
  }

  SweepResult result;
  result.provenance = describe(spec);
  result.spec_hash = fnv1a(result.provenance);
  result.seed = spec.seed;

  const SweepContext ctx = make_context(spec);
  const std::size_t cells = spec.beta_grid.size() * static_cast<std::size_t>(ctx.draws_eff);
  result.rows.resize(cells);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < cells; i = next.fetch_add(1)) {
      const double beta = spec.beta_grid[i / static_cast<std::size_t>(ctx.draws_eff)];
      const int draw = static_cast<int>(i % static_cast<std::size_t>(ctx.draws_eff));
      try {
        result.rows[i] = run_cell(ctx, beta, draw).row;
      } catch (const std::exception& e) {
        result.rows[i] = row_skeleton(ctx, beta, draw);
        result.rows[i].error = e.what();
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min<std::size_t>(hw, cells);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return result;
}

SolveOutcome run_single(const ExperimentSpec& spec, double beta, int draw) {
  const SweepContext ctx = make_context(spec);
  CellResult cell = run_cell(ctx, beta, draw);
  return {std::move(cell.row), std::move(cell.estimate)};
}

const char* const kSweepCsvHeader =
    "scenario,fidelity,prior,beta,eps,sigma_e,seed,psnr_db,mse,bias_sq,variance,iters,wall_ms";

std::string SweepResult::csv() const {
  std::string out = kSweepCsvHeader;
  out += '\n';
  for (const SweepRow& r : rows) {
    const bool ok = r.error.empty();
    out += r.scenario + ',' + r.fidelity + ',' + r.prior + ',';
    out += format_double(r.beta) + ',' + format_double(r.eps) + ',' + format_double(r.sigma_e);
    out += ',' + std::to_string(r.seed) + ',';
    out += ok ? format_double(r.psnr_db) : std::string();
    out += ',';
    out += ok ? format_double(r.mse) : std::string();
    out += ',';
    if (ok && r.bias_sq) out += format_double(*r.bias_sq);
    out += ',';
    if (ok && r.variance) out += format_double(*r.variance);
    out += ',';
    if (ok) out += std::to_string(r.iters);
    out += ',';
    if (ok && r.wall_ms) out += format_double(*r.wall_ms);
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) {
    throw IoError("parse_sweep_csv: missing or unexpected header");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t pos = 0; pos <= line.size(); ++pos) {
      if (pos == line.size() || line[pos] == ',') {
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
      }
    }
    if (fields.size() != 13) throw IoError("parse_sweep_csv: malformed row: " + line);
    SweepRow r;
    r.scenario = fields[0];
    r.fidelity = fields[1];
    r.prior = fields[2];
    r.beta = std::stod(fields[3]);
    r.eps = std::stod(fields[4]);
    r.sigma_e = std::stod(fields[5]);
    r.seed = std::stoull(fields[6]);
    if (fields[7].empty()) {
      r.error = "(failed cell)";
    } else {
      r.psnr_db = std::stod(fields[7]);
      r.mse = std::stod(fields[8]);
      if (!fields[9].empty()) r.bias_sq = std::stod(fields[9]);
      if (!fields[10].empty()) r.variance = std::stod(fields[10]);
      if (!fields[11].empty()) r.iters = std::stoi(fields[11]);
      if (!fields[12].empty()) r.wall_ms = std::stod(fields[12]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace bpfid
