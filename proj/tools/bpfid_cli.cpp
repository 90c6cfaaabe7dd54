// Command-line front end: spectrum reports, single solves, beta-sweeps (CSV),
// analytic ordering checks, and the project-then-denoise equivalence probe.

#include "bpfid/harness.hpp"
#include "bpfid/metrics.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace bpfid;

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  if (text.find(':') != std::string::npos) {
    // lo:hi:count, geometrically spaced.
    double lo = 0, hi = 0;
    int count = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || lo <= 0 || hi <= 0 ||
        count < 1) {
      throw CLI::ValidationError(flag, "expected lo:hi:count with positive bounds");
    }
    for (int i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      values.push_back(lo * std::pow(hi / lo, t));
    }
    return values;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string part = text.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      values.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "cannot parse '" + part + "' as a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty()) throw CLI::ValidationError(flag, "empty list");
  return values;
}

struct CommonFlags {
  std::string scenario = "srx3";
  Index size = 64;
  std::optional<double> mratio;
  std::optional<std::string> image;
  std::string fidelity = "ls";
  std::optional<double> eps;
  std::string prior = "l2";
  std::string beta = "1";
  std::optional<double> sigma;
  std::optional<double> snr;
  std::string solver = "closed";
  int iters = 0;
  std::uint64_t seed = 0;
  int draws = 5;
  bool no_timing = false;

  void attach(CLI::App& cmd, bool with_model) {
    cmd.add_option("--scenario", scenario, "srx3 | deblur9 | cs | inpaint")
        ->check(CLI::IsMember({"srx3", "deblur9", "cs", "inpaint"}));
    cmd.add_option("--size", size, "image side length (default 64)");
    cmd.add_option("--mratio", mratio, "cs: m/n ratio; inpaint: kept-pixel fraction");
    cmd.add_option("--seed", seed, "64-bit seed");
    if (!with_model) return;
    cmd.add_option("--image", image, "8-bit grayscale PGM (default: synthetic phantom)");
    cmd.add_option("--fidelity", fidelity, "ls | bp")->check(CLI::IsMember({"ls", "bp"}));
    cmd.add_option("--eps", eps, "pseudo-inverse loading (bp; default 0, deblur bp 0.01*sigma^2)");
    cmd.add_option("--prior", prior, "l2 | l2fd | tv | denoiser:NAME");
    cmd.add_option("--beta", beta, "comma list or lo:hi:count (geometric)");
    cmd.add_option("--sigma", sigma, "noise std");
    cmd.add_option("--snr", snr, "noise level as SNR in dB (alternative to --sigma)");
    cmd.add_option("--solver", solver, "closed | ista | fista | idbp | cg")
        ->check(CLI::IsMember({"closed", "ista", "fista", "idbp", "cg"}));
    cmd.add_option("--iters", iters, "iteration count (0 = per-scenario default)");
    cmd.add_option("--draws", draws, "noise realizations per beta (default 5)");
    cmd.add_flag("--no-timing", no_timing, "omit wall_ms (byte-deterministic output)");
  }

  ExperimentSpec to_spec() const {
    ExperimentSpec spec;
    if (scenario == "srx3") spec.scenario = Scenario::SuperResolutionX3;
    else if (scenario == "deblur9") spec.scenario = Scenario::DeblurUniform9;
    else if (scenario == "cs") spec.scenario = Scenario::CompressedSensing;
    else spec.scenario = Scenario::Inpainting;
    spec.size = size;
    if (mratio) {
      spec.m_ratio = *mratio;
      spec.keep_ratio = *mratio;
    }
    spec.image_path = image;
    spec.fidelity = fidelity == "bp" ? FidelityKind::BackProjection : FidelityKind::LeastSquares;
    spec.eps = eps;
    if (prior.rfind("denoiser:", 0) == 0) {
      spec.prior = PriorChoice::Denoiser;
      spec.denoiser_name = prior.substr(9);
    } else if (prior == "l2") {
      spec.prior = PriorChoice::L2Identity;
    } else if (prior == "l2fd") {
      spec.prior = PriorChoice::L2FiniteDiff;
    } else if (prior == "tv") {
      spec.prior = PriorChoice::Tv;
    } else {
      throw CLI::ValidationError("--prior", "expected l2 | l2fd | tv | denoiser:NAME");
    }
    spec.beta_grid = parse_number_list(beta, "--beta");
    if (sigma && snr) throw CLI::ValidationError("--sigma", "set --sigma or --snr, not both");
    if (snr) spec.noise = NoiseSpec::snr(*snr);
    else spec.noise = NoiseSpec::sigma(sigma.value_or(0.0));
    if (solver == "closed") spec.solver = SolverChoice::ClosedForm;
    else if (solver == "ista") spec.solver = SolverChoice::Ista;
    else if (solver == "fista") spec.solver = SolverChoice::Fista;
    else if (solver == "idbp") spec.solver = SolverChoice::Idbp;
    else spec.solver = SolverChoice::Cg;
    spec.iters = iters;
    spec.seed = seed;
    spec.draws = draws;
    spec.record_timing = !no_timing;
    return spec;
  }
};

void write_text(const std::optional<std::string>& out, const std::string& text) {
  if (!out) {
    std::cout << text;
    return;
  }
  std::ofstream f(*out, std::ios::binary);
  if (!f) throw IoError("cannot open output file: " + *out);
  f << text;
}

int cmd_spectrum(const CommonFlags& flags) {
  ExperimentSpec spec = flags.to_spec();
  std::cout << describe(spec);
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioBundle bundle = build_scenario(spec);
  Vec sv = singular_values_only(*bundle.op);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double l1 = sv[0], lm = sv[sv.size() - 1];
  std::printf("operator: %lld x %lld\n", static_cast<long long>(bundle.op->rows()),
              static_cast<long long>(bundle.op->cols()));
  std::printf("lambda1^2   = %.6g\n", l1 * l1);
  std::printf("lambda_m^2  = %.6g\n", lm * lm);
  std::printf("cond(AA^T)  = %.6g\n", condition_number_sq(sv));
  std::printf("elapsed     = %.2f s\n", elapsed);
  return 0;
}

int cmd_solve(const CommonFlags& flags, const std::optional<std::string>& out) {
  ExperimentSpec spec = flags.to_spec();
  if (spec.beta_grid.size() != 1) {
    throw CLI::ValidationError("--beta", "solve takes exactly one beta (use sweep for grids)");
  }
  std::cout << describe(spec);
  SolveOutcome outcome = run_single(spec, spec.beta_grid[0]);
  const SweepRow& r = outcome.row;
  std::printf("psnr_db = %.6g\nmse     = %.6g\n", r.psnr_db, r.mse);
  if (r.bias_sq) {
    std::printf("analytic bias_sq = %.6g, variance = %.6g, mse = %.6g\n", *r.bias_sq, *r.variance,
                *r.bias_sq + *r.variance);
  }
  std::printf("iters   = %d\n", r.iters);
  if (r.wall_ms) std::printf("wall_ms = %.1f\n", *r.wall_ms);
  if (out) {
    SweepResult res;
    res.rows.push_back(r);
    write_text(out, res.csv());
    std::cout << "csv written to " << *out << "\n";
  }
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::optional<std::string>& out) {
  ExperimentSpec spec = flags.to_spec();
  // Keep stdout clean for CSV when no output file was given.
  std::ostream& info = out ? std::cout : std::cerr;
  info << describe(spec);
  SweepResult result = run_sweep(spec);
  info << "spec_hash: " << result.spec_hash << "\n";
  std::size_t failed = 0;
  for (const SweepRow& r : result.rows) {
    if (!r.error.empty()) {
      ++failed;
      info << "cell error (beta=" << r.beta << ", seed=" << r.seed << "): " << r.error << "\n";
    }
  }
  info << "cells: " << result.rows.size() << " (" << failed << " failed)\n";
  write_text(out, result.csv());
  if (out) std::cout << "csv written to " << *out << "\n";
  return 0;
}

int cmd_verify_observations(const std::string& spectrum_list, const std::string& gamma_list,
                            const std::string& coeff_list, double beta, double sigma,
                            std::uint64_t seed) {
  std::vector<double> lv = parse_number_list(spectrum_list, "--spectrum");
  std::sort(lv.begin(), lv.end(), std::greater<>());
  const Index m = static_cast<Index>(lv.size());
  Vec lambda(m);
  for (Index i = 0; i < m; ++i) lambda[i] = lv[static_cast<std::size_t>(i)];

  Vec gamma_sq = Vec::Ones(m);
  if (!gamma_list.empty()) {
    std::vector<double> gv = parse_number_list(gamma_list, "--gamma");
    if (static_cast<Index>(gv.size()) != m) {
      throw CLI::ValidationError("--gamma", "needs one value per singular value");
    }
    for (Index i = 0; i < m; ++i) gamma_sq[i] = gv[static_cast<std::size_t>(i)];
  }

  Vec coeffs;
  if (!coeff_list.empty()) {
    std::vector<double> cv = parse_number_list(coeff_list, "--coeffs");
    if (static_cast<Index>(cv.size()) != m) {
      throw CLI::ValidationError("--coeffs", "needs one value per singular value");
    }
    coeffs.resize(m);
    for (Index i = 0; i < m; ++i) coeffs[i] = cv[static_cast<std::size_t>(i)];
  } else {
    coeffs = gaussian_vector(m, mix_seed(seed, 0xC0EFull));
  }

  std::printf("spectrum:");
  for (Index i = 0; i < m; ++i) std::printf(" %g", lambda[i]);
  std::printf("\nbeta_ls = %g, sigma_e = %g\n", beta, sigma);

  ObservationsReport rep = check_observations(lambda, gamma_sq, coeffs, 0.0, beta, sigma);
  std::cout << rep.summary();

  bool all_pass = true;
  std::size_t consistent = 0;
  for (const auto& pi : rep.per_index) consistent += pi.ordering_consistent ? 1 : 0;
  const bool obs1 = consistent == rep.per_index.size();
  all_pass = all_pass && obs1;
  std::printf("per-index bias/variance orderings (flip at lambda=1): %s\n",
              obs1 ? "PASS" : "FAIL");

  if (rep.spectrum_class != ObservationsReport::SpectrumClass::Mixed && sigma == 0.0) {
    const bool below = rep.spectrum_class == ObservationsReport::SpectrumClass::AllBelowOne;
    all_pass = all_pass && rep.noiseless_ordering_holds;
    std::printf("noiseless ordering: all lambda %s 1 => MSE_BP %s MSE_LS: %s\n",
                below ? "<" : ">", below ? "<" : ">",
                rep.noiseless_ordering_holds ? "PASS" : "FAIL");
  } else {
    std::printf("noiseless ordering: n/a (mixed spectrum or sigma_e > 0)\n");
  }

  all_pass = all_pass && rep.scaled_beta_no_worse;
  std::printf("scaled beta_bp = beta_ls/lambda1^2 => noiseless MSE_BP <= MSE_LS: %s\n",
              rep.scaled_beta_no_worse ? "PASS" : "FAIL");
  return all_pass ? 0 : 2;
}

int cmd_idbp_equiv(const CommonFlags& flags, const std::string& denoiser_name, double sigma,
                   double eps, int iters) {
  ExperimentSpec spec = flags.to_spec();
  spec.noise = NoiseSpec::sigma(sigma);
  spec.solver = SolverChoice::Idbp;
  spec.prior = PriorChoice::Denoiser;
  spec.denoiser_name = denoiser_name;
  spec.eps = eps;
  spec.iters = iters;
  std::cout << describe(spec);
  ScenarioBundle bundle = build_scenario(spec);
  NoisyObservations obs =
      add_noise(bundle.op->apply(bundle.ground_truth), spec.noise, mix_seed(spec.seed, 0));
  IdbpConfig cfg;
  cfg.sigma_e = obs.sigma_e;
  cfg.iters = iters;
  cfg.eps = eps;
  const double dev =
      equivalence_check(bundle.op, obs.y, make_denoiser(denoiser_name, bundle.shape), cfg,
                        initial_estimate(spec, bundle, obs.y));
  std::printf("denoiser: %s, iterations: %d, delta: %g\n", denoiser_name.c_str(), iters,
              resolved_delta(cfg));
  std::printf("max per-iterate deviation = %.3e\n", dev);
  const bool pass = dev <= 1e-10;
  std::printf("project-then-denoise == proximal gradient on the projection cost: %s\n",
              pass ? "PASS" : "FAIL");
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Least-squares vs back-projection fidelity: spectra, closed-form and iterative "
      "estimators, and beta-sweep experiments"};
  app.require_subcommand(1);

  CommonFlags spectrum_flags;
  CLI::App* spectrum_cmd = app.add_subcommand("spectrum", "singular-value summary of a scenario");
  spectrum_flags.attach(*spectrum_cmd, false);

  CommonFlags solve_flags;
  std::optional<std::string> solve_out;
  CLI::App* solve_cmd = app.add_subcommand("solve", "solve one (scenario, beta) cell");
  solve_flags.attach(*solve_cmd, true);
  solve_cmd->add_option("--out", solve_out, "write the single-row CSV here");

  CommonFlags sweep_flags;
  std::optional<std::string> sweep_out;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a beta grid and emit CSV");
  sweep_flags.attach(*sweep_cmd, true);
  sweep_cmd->add_option("--out", sweep_out, "CSV output path (default: stdout)");

  std::string vo_spectrum, vo_gamma, vo_coeffs;
  double vo_beta = 1.0, vo_sigma = 0.0;
  std::uint64_t vo_seed = 0;
  CLI::App* vo_cmd = app.add_subcommand(
      "verify-observations", "check the analytic bias/variance orderings for a given spectrum");
  vo_cmd->add_option("--spectrum", vo_spectrum, "singular values, comma-separated")->required();
  vo_cmd->add_option("--gamma", vo_gamma, "prior curvatures gamma_i^2 (default: all 1)");
  vo_cmd->add_option("--coeffs", vo_coeffs, "signal coefficients (default: seeded Gaussian)");
  vo_cmd->add_option("--beta", vo_beta, "LS regularization weight (default 1)");
  vo_cmd->add_option("--sigma", vo_sigma, "noise std (default 0)");
  vo_cmd->add_option("--seed", vo_seed, "seed for the default coefficients");

  CommonFlags eq_flags;
  eq_flags.scenario = "inpaint";
  eq_flags.size = 16;
  std::string eq_denoiser = "median3";
  double eq_sigma = 0.0, eq_eps = 0.0;
  int eq_iters = 50;
  CLI::App* eq_cmd = app.add_subcommand(
      "idbp-equiv", "verify project-then-denoise iterates equal proximal-gradient iterates");
  eq_flags.attach(*eq_cmd, false);
  eq_cmd->add_option("--denoiser", eq_denoiser, "identity | median3 | l2 | tv");
  eq_cmd->add_option("--sigma", eq_sigma, "noise std (default 0)");
  eq_cmd->add_option("--eps", eq_eps, "pseudo-inverse loading (default 0)");
  eq_cmd->add_option("--iters", eq_iters, "iterations to compare (default 50)");

  try {
    app.parse(argc, argv);
    if (spectrum_cmd->parsed()) return cmd_spectrum(spectrum_flags);
    if (solve_cmd->parsed()) return cmd_solve(solve_flags, solve_out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, sweep_out);
    if (vo_cmd->parsed()) {
      return cmd_verify_observations(vo_spectrum, vo_gamma, vo_coeffs, vo_beta, vo_sigma, vo_seed);
    }
    if (eq_cmd->parsed()) {
      return cmd_idbp_equiv(eq_flags, eq_denoiser, eq_sigma, eq_eps, eq_iters);
    }
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
