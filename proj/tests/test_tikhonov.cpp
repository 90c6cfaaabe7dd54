#include "bpfid/tikhonov.hpp"

#include "bpfid/fidelity.hpp"
#include "doctest.h"
#include "oracles.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <memory>
#include <vector>

using namespace bpfid;

namespace {

// Random descending spectrum in [lo, hi] (log-uniform), strictly positive.
Vec random_lambda(Index m, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Vec v(m);
  for (Index i = 0; i < m; ++i) v[i] = std::exp(u(rng));
  std::sort(v.data(), v.data() + m, std::greater<double>());
  return v;
}

Vec random_positive(Index m, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(m);
  for (Index i = 0; i < m; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("solve_ls_closed: identity problem is scalar shrinkage") {
  const Vec y = gaussian_vector(6, 1);
  auto prior = identity_prior(6);
  const Vec x = solve_ls_closed(*identity_op(6), y, 0.5, *prior).x;
  CHECK(oracles::rel_err(x, Vec(y / 1.5)) <= 1e-12);
}

TEST_CASE("solve_ls_closed: vanishing beta recovers the exact inverse") {
  const Mat A = oracles::random_matrix(6, 6, 2);
  auto op = dense_op(A);
  const Vec y = gaussian_vector(6, 3);
  const Vec x = solve_ls_closed(*op, y, 1e-12, *identity_prior(6)).x;
  CHECK(oracles::rel_err(x, Vec(A.lu().solve(y))) <= 1e-6);
}

TEST_CASE("solve_ls_closed: matches the dense normal-equations oracle") {
  const Mat A = oracles::random_matrix(4, 8, 4);
  auto op = dense_op(A);
  const Vec y = gaussian_vector(4, 5);
  const double beta = 0.5;

  Mat M = A.transpose() * A + beta * Mat::Identity(8, 8);
  const Vec want = M.ldlt().solve(A.transpose() * y);
  CHECK(oracles::rel_err(solve_ls_closed(*op, y, beta, *identity_prior(8)).x, want) <= 1e-8);
}

TEST_CASE("solve_bp_closed: identity problem coincides with least squares") {
  const Vec y = gaussian_vector(6, 6);
  const Vec x = solve_bp_closed(*identity_op(6), y, 0.25, 0.0, *identity_prior(6)).x;
  CHECK(oracles::rel_err(x, Vec(y / 1.25)) <= 1e-12);
}

TEST_CASE("solve_bp_closed: orthonormal rows give shrunken adjoint, any spectrum scale") {
  const Mat Q = Eigen::HouseholderQR<Mat>(oracles::random_matrix(8, 8, 7)).householderQ();
  auto op = dense_op(Mat(Q.topRows(3)));
  const Vec y = gaussian_vector(3, 8);
  const double beta = 2.0;
  const Vec x = solve_bp_closed(*op, y, beta, 0.0, *identity_prior(8)).x;
  CHECK(oracles::rel_err(x, Vec(op->adjoint(y) / (1.0 + beta))) <= 1e-10);
}

TEST_CASE("solve_bp_closed: matches the dense projector oracle") {
  const Mat A = oracles::random_matrix(4, 8, 9);
  auto op = dense_op(A);
  const Vec y = gaussian_vector(4, 10);
  const double beta = 0.5;

  const Mat P = oracles::svd_projector(A);
  Mat M = P + beta * Mat::Identity(8, 8);
  const Vec want = M.ldlt().solve(oracles::dense_pinv_apply(A, y));
  CHECK(oracles::rel_err(solve_bp_closed(*op, y, beta, 0.0, *identity_prior(8)).x, want) <= 1e-8);
}

TEST_CASE("closed-form paths agree: circulant, dense, and CG") {
  const Shape2D img{16, 16};
  auto op = circulant_conv2d(uniform_kernel(3), img);
  const Vec y = op->apply(gaussian_vector(img.size(), 11));
  auto prior = finite_difference_prior(img);

  SolveOptions dense_opts, cg_opts;
  dense_opts.path = SolveOptions::Path::ForceDense;
  cg_opts.path = SolveOptions::Path::ForceCg;

  for (double beta : {0.05, 1.0}) {
    const Vec auto_ls = solve_ls_closed(*op, y, beta, *prior).x;
    CHECK(oracles::rel_err(solve_ls_closed(*op, y, beta, *prior, dense_opts).x, auto_ls) <= 1e-8);
    CHECK(oracles::rel_err(solve_ls_closed(*op, y, beta, *prior, cg_opts).x, auto_ls) <= 1e-8);

    for (double eps : {0.0, 0.01}) {
      const Vec auto_bp = solve_bp_closed(*op, y, beta, eps, *prior).x;
      CHECK(oracles::rel_err(solve_bp_closed(*op, y, beta, eps, *prior, dense_opts).x, auto_bp) <=
            1e-8);
      CHECK(oracles::rel_err(solve_bp_closed(*op, y, beta, eps, *prior, cg_opts).x, auto_bp) <=
            1e-8);
    }
  }
}

TEST_CASE("closed-form solvers reject non-positive beta") {
  const Vec y = gaussian_vector(4, 1);
  auto prior = identity_prior(4);
  CHECK_THROWS_AS((void)solve_ls_closed(*identity_op(4), y, 0.0, *prior), NumericalError);
  CHECK_THROWS_AS((void)solve_bp_closed(*identity_op(4), y, -1.0, 0.0, *prior), NumericalError);
}

TEST_CASE("spectral-gamma prior: closed solvers equal the per-coefficient formula") {
  auto op = dense_op(oracles::random_matrix(5, 10, 12));
  auto spec = std::make_shared<SpectralDecomposition>(spectrum(*op));
  const Vec gamma_sq = random_positive(5, 13, 0.2, 3.0);
  auto prior = spectral_gamma_prior(spec, gamma_sq, 1.3);
  const Vec y = gaussian_vector(5, 14);
  const double beta = 0.7;

  const Vec ls = solve_ls_closed(*op, y, beta, *prior).x;
  CHECK(oracles::rel_err(ls, solve_ls_spectral(*spec, y, beta, gamma_sq)) <= 1e-8);

  for (double eps : {0.0, 0.05}) {
    const Vec bp = solve_bp_closed(*op, y, beta, eps, *prior).x;
    CHECK(oracles::rel_err(bp, solve_bp_spectral(*spec, y, beta, eps, gamma_sq)) <= 1e-8);
  }
}

TEST_CASE("estimators satisfy first-order optimality") {
  const Shape2D img{8, 8};
  auto op = circulant_conv2d(gaussian_kernel(3, 0.9), img);
  const Vec y = gaussian_vector(64, 15) * 10.0;
  auto prior = finite_difference_prior(img);
  const double beta = 0.4;

  const auto ls_fid = FidelityTerm::least_squares(op, y);
  const Vec x_ls = solve_ls_closed(*op, y, beta, *prior).x;
  CHECK((ls_fid.gradient(x_ls) + beta * prior->apply_dtd(x_ls)).norm() <= 1e-6 * (1.0 + y.norm()));

  const auto bp_fid = FidelityTerm::back_projection(op, y);
  const Vec x_bp = solve_bp_closed(*op, y, beta, 0.0, *prior).x;
  CHECK((bp_fid.gradient(x_bp) + beta * prior->apply_dtd(x_bp)).norm() <= 1e-6 * (1.0 + y.norm()));
}

TEST_CASE("analytic mse: square noiseless limit vanishes") {
  const Vec lambda = random_lambda(8, 16, 0.3, 2.0);
  const Vec gamma = Vec::Ones(8);
  const Vec coeffs = gaussian_vector(8, 17);
  const auto mb = mse_ls_analytic(lambda, gamma, coeffs, 0.0, 1e-12, 0.0);
  CHECK(mb.mse <= 1e-16 * coeffs.squaredNorm());
}

TEST_CASE("analytic mse: flat unit spectrum closed form") {
  const Index n = 10;
  const Vec lambda = Vec::Ones(n), gamma = Vec::Ones(n);
  const Vec coeffs = gaussian_vector(n, 18);
  const double beta = 0.7, sigma = 1.3;

  const auto ls = mse_ls_analytic(lambda, gamma, coeffs, 0.0, beta, sigma);
  const double shrink = beta / (1.0 + beta);
  CHECK(oracles::rel_err(ls.bias_sq, shrink * shrink * coeffs.squaredNorm()) <= 1e-12);
  CHECK(oracles::rel_err(ls.variance, n * sigma * sigma / ((1 + beta) * (1 + beta))) <= 1e-12);
  CHECK(ls.mse == ls.bias_sq + ls.variance);

  // lambda = 1 makes the two estimators identical.
  const auto bp = mse_bp_analytic(lambda, gamma, coeffs, 0.0, beta, sigma);
  CHECK(oracles::rel_err(bp.mse, ls.mse) <= 1e-12);
}

TEST_CASE("analytic mse: projection bias ignores the spectrum") {
  const Vec lambda = random_lambda(6, 19, 0.1, 5.0);
  const Vec gamma = Vec::Ones(6);
  const Vec coeffs = gaussian_vector(6, 20);
  const double beta = 0.9;

  const auto bp = mse_bp_analytic(lambda, gamma, coeffs, 0.0, beta, 0.0, 0.0, /*per_index=*/true);
  const double shrink_sq = std::pow(beta / (1.0 + beta), 2.0);
  REQUIRE(bp.bias_sq_per_index.size() == 6);
  for (Index i = 0; i < 6; ++i) {
    CHECK(oracles::rel_err(bp.bias_sq_per_index[static_cast<std::size_t>(i)],
                           shrink_sq * coeffs[i] * coeffs[i]) <= 1e-12);
  }
}

TEST_CASE("analytic mse: per-index parts add up to the totals") {
  const Vec lambda = random_lambda(7, 21, 0.2, 4.0);
  const Vec gamma = random_positive(7, 22, 0.3, 2.0);
  const Vec coeffs = gaussian_vector(7, 23);
  const double null_energy = 2.5, beta = 0.6, sigma = 0.8;

  for (const auto& mb : {mse_ls_analytic(lambda, gamma, coeffs, null_energy, beta, sigma, true),
                         mse_bp_analytic(lambda, gamma, coeffs, null_energy, beta, sigma, 0.02,
                                         true)}) {
    double b = null_energy, v = 0.0;
    for (double t : mb.bias_sq_per_index) b += t;
    for (double t : mb.variance_per_index) v += t;
    CHECK(oracles::rel_err(mb.bias_sq, b) <= 1e-12);
    CHECK(oracles::rel_err(mb.variance, v) <= 1e-12);
    CHECK(mb.mse == mb.bias_sq + mb.variance);
  }
}

TEST_CASE("analytic mse: vanishing loading is continuous") {
  const Vec lambda = random_lambda(9, 24, 0.05, 8.0);
  const Vec gamma = random_positive(9, 25, 0.2, 3.0);
  const Vec coeffs = gaussian_vector(9, 26);

  for (double null_energy : {0.0, 1.7}) {
    const auto at0 = mse_bp_analytic(lambda, gamma, coeffs, null_energy, 0.4, 1.1, 0.0);
    const auto at_tiny = mse_bp_analytic(lambda, gamma, coeffs, null_energy, 0.4, 1.1, 1e-14);
    CHECK(oracles::rel_err(at_tiny.mse, at0.mse) <= 1e-8);
    CHECK(oracles::rel_err(at_tiny.bias_sq, at0.bias_sq) <= 1e-8);
    CHECK(oracles::rel_err(at_tiny.variance, at0.variance) <= 1e-8);
  }
}

TEST_CASE("analytic mse: both biases sink to the null-space energy as beta -> 0") {
  const Vec lambda = random_lambda(5, 27, 0.3, 3.0);
  const Vec gamma = random_positive(5, 28, 0.5, 2.0);
  const Vec coeffs = gaussian_vector(5, 29);
  const double null_energy = 3.2;

  const auto ls = mse_ls_analytic(lambda, gamma, coeffs, null_energy, 1e-14, 0.0);
  const auto bp = mse_bp_analytic(lambda, gamma, coeffs, null_energy, 1e-14, 0.0);
  CHECK(std::abs(ls.bias_sq - null_energy) <= 1e-10 * (1.0 + null_energy));
  CHECK(std::abs(bp.bias_sq - null_energy) <= 1e-10 * (1.0 + null_energy));
}

TEST_CASE("analytic mse matches a direct spectral-estimator simulation") {
  // One independent cross-check of the whole formula chain: build a small
  // dense operator, estimate via the closed form, and compare the realized
  // squared error against bias_sq + variance over many noise draws.
  const Mat A = oracles::random_matrix(6, 12, 30);
  auto op = dense_op(A);
  const auto spec = spectrum(*op);
  const Vec x = gaussian_vector(12, 31) * 5.0;
  const Vec gamma = Vec::Ones(6);
  const double beta = 0.3, sigma = 0.5;
  const int draws = 4000;

  double acc_ls = 0.0, acc_bp = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Vec y = op->apply(x) + gaussian_vector(6, 900 + d, sigma);
    acc_ls += (solve_ls_closed(*op, y, beta, *identity_prior(12)).x - x).squaredNorm();
    acc_bp += (solve_bp_closed(*op, y, beta, 0.0, *identity_prior(12)).x - x).squaredNorm();
  }
  const auto mb_ls = mse_ls_analytic(spec, x, gamma, beta, sigma);
  const auto mb_bp = mse_bp_analytic(spec, x, gamma, beta, sigma);
  // Monte-Carlo error scales like mse / sqrt(draws); 5 sigma-ish band.
  CHECK(std::abs(acc_ls / draws - mb_ls.mse) <= 0.1 * mb_ls.mse);
  CHECK(std::abs(acc_bp / draws - mb_bp.mse) <= 0.1 * mb_bp.mse);
}

TEST_CASE("gamma_from_prior: identity prior is exactly flat") {
  auto op = dense_op(oracles::random_matrix(5, 9, 32));
  const auto spec = spectrum(*op);
  const auto res = gamma_from_prior(*identity_prior(9), spec);
  CHECK(res.exact);
  CHECK((res.gamma_sq - Vec::Ones(5)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("gamma_from_prior: circulant prior shares the circulant basis") {
  const Shape2D img{8, 8};
  auto op = circulant_conv2d(uniform_kernel(3), img);
  const auto spec = spectrum(*op);
  auto prior = finite_difference_prior(img);
  const auto res = gamma_from_prior(*prior, spec);
  CHECK(res.exact);

  // Diagonal entries must equal the quadratic form along each basis column.
  for (Index i = 0; i < spec.m; i += 7) {
    const Vec v = spec.right_basis.col(i);
    CHECK(oracles::rel_err(res.gamma_sq[i], v.dot(prior->apply_dtd(v))) <= 1e-8);
  }
}

TEST_CASE("gamma_from_prior: blur-downsample basis is flagged approximate") {
  const Shape2D img{12, 12};
  auto op = compose({circulant_conv2d(gaussian_kernel(3, 0.9), img), downsample2d(3, img)});
  const auto spec = spectrum(*op);
  const auto res = gamma_from_prior(*finite_difference_prior(img), spec);
  CHECK(!res.exact);
  CHECK(res.gamma_sq.minCoeff() > 0.0);
}

TEST_CASE("check_observations: small-spectrum noiseless verdicts") {
  Vec below(2), above(2), coeffs(2);
  below << 0.5, 0.2;
  above << 3.0, 2.0;
  coeffs << 1.0, -2.0;
  const Vec gamma = Vec::Ones(2);

  const auto r_below = check_observations(below, gamma, coeffs, 0.0, 0.8, 0.0);
  CHECK(r_below.spectrum_class == ObservationsReport::SpectrumClass::AllBelowOne);
  CHECK(r_below.mse_bp < r_below.mse_ls);
  CHECK(r_below.noiseless_ordering_holds);

  const auto r_above = check_observations(above, gamma, coeffs, 0.0, 0.8, 0.0);
  CHECK(r_above.spectrum_class == ObservationsReport::SpectrumClass::AllAboveOne);
  CHECK(r_above.mse_bp > r_above.mse_ls);
  CHECK(r_above.noiseless_ordering_holds);

  CHECK(!r_below.summary().empty());
}

TEST_CASE("check_observations: per-index orderings flip exactly at lambda = 1") {
  for (int trial = 0; trial < 200; ++trial) {
    const Index m = 6;
    const Vec lambda = random_lambda(m, 5000 + trial, 0.1, 6.0);
    const Vec gamma = random_positive(m, 6000 + trial, 0.2, 3.0);
    const Vec coeffs = gaussian_vector(m, 7000 + trial);
    const auto rep = check_observations(lambda, gamma, coeffs, 0.0, 0.5, 0.9);
    REQUIRE(rep.per_index.size() == static_cast<std::size_t>(m));
    for (const auto& pi : rep.per_index) {
      CHECK(pi.ordering_consistent);
      if (pi.lambda < 1.0) {
        CHECK(pi.bias_sq_bp <= pi.bias_sq_ls);
        CHECK(pi.var_bp >= pi.var_ls);
      } else if (pi.lambda > 1.0) {
        CHECK(pi.bias_sq_bp >= pi.bias_sq_ls);
        CHECK(pi.var_bp <= pi.var_ls);
      }
    }
  }
}

TEST_CASE("check_observations: noiseless dichotomy over 1000 random spectra") {
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index m = 5;
    const bool below = trial % 2 == 0;
    const Vec lambda =
        below ? random_lambda(m, 11000 + trial, 0.05, 0.95) : random_lambda(m, 11000 + trial, 1.05, 9.0);
    const Vec gamma = random_positive(m, 12000 + trial, 0.2, 4.0);
    Vec coeffs = gaussian_vector(m, 13000 + trial);
    coeffs[trial % m] += 1.0;  // keep at least one coefficient well away from 0
    const double beta = std::exp(gaussian_vector(1, 14000 + trial)[0]);

    const auto rep = check_observations(lambda, gamma, coeffs, 0.0, beta, 0.0);
    REQUIRE(rep.noiseless_ordering_holds);
    if (below) {
      REQUIRE(rep.mse_bp < rep.mse_ls);
    } else {
      REQUIRE(rep.mse_bp > rep.mse_ls);
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("check_observations: top-value-scaled beta never loses over 1000 trials") {
  int strict_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index m = 6;
    const Vec lambda = random_lambda(m, 21000 + trial, 0.05, 7.0);
    const Vec gamma = random_positive(m, 22000 + trial, 0.2, 4.0);
    const Vec coeffs = gaussian_vector(m, 23000 + trial);
    const double beta_ls = std::exp(1.5 * gaussian_vector(1, 24000 + trial)[0]);

    const auto rep = check_observations(lambda, gamma, coeffs, 0.5, beta_ls, 0.0);
    CHECK(oracles::rel_err(rep.beta_bp_scaled, beta_ls / (lambda[0] * lambda[0])) <= 1e-12);
    REQUIRE(rep.scaled_beta_no_worse);
    REQUIRE(rep.mse_bp_scaled <= rep.mse_ls);
    if (rep.scaled_beta_strict_expected) {
      REQUIRE(rep.scaled_beta_strict_holds);
      ++strict_seen;
    }
  }
  CHECK(strict_seen > 900);  // generic draws are essentially always strict
}

TEST_CASE("subspace_mse: empty constraint reduces to the plain formulas") {
  auto op = dense_op(oracles::random_matrix(6, 12, 33));
  const auto spec = spectrum(*op);
  const Vec x0 = gaussian_vector(12, 34);
  const Vec gamma = random_positive(6, 35, 0.3, 2.0);

  const auto sub = subspace_mse(spec, x0, {}, gamma, 0.5, 0.7);
  CHECK((sub.x - x0).norm() <= 1e-12 * x0.norm());
  const auto ls = mse_ls_analytic(spec, x0, gamma, 0.5, 0.7);
  const auto bp = mse_bp_analytic(spec, x0, gamma, 0.5, 0.7);
  CHECK(oracles::rel_err(sub.ls.mse, ls.mse) <= 1e-12);
  CHECK(oracles::rel_err(sub.bp.mse, bp.mse) <= 1e-12);
}

TEST_CASE("subspace_mse: constrained coefficients are zeroed") {
  auto op = dense_op(oracles::random_matrix(8, 16, 36));
  const auto spec = spectrum(*op);
  const Vec x0 = gaussian_vector(16, 37);
  const std::vector<Index> cols = {0, 2, 5};

  const auto sub = subspace_mse(spec, x0, cols, Vec::Ones(8), 1.0, 0.0);
  const Vec c = spec.coeffs(sub.x);
  for (Index w : cols) CHECK(std::abs(c[w]) <= 1e-10);
}

TEST_CASE("subspace_mse: which side wins follows the active spectrum") {
  // Mixed spectrum pinned on both sides of one, planted between random
  // orthonormal bases; constraining away the big (resp. small) singular
  // directions leaves an all-below-one (resp. all-above-one) active set.
  Vec lambda(10);
  lambda << 2.5, 2.0, 1.6, 1.3, 0.8, 0.6, 0.4, 0.25, 0.15, 0.08;
  const Mat qu = Eigen::HouseholderQR<Mat>(oracles::random_matrix(10, 10, 38)).householderQ();
  const Mat qv_full = Eigen::HouseholderQR<Mat>(oracles::random_matrix(20, 20, 39)).householderQ();
  auto op = dense_op(Mat(qu * lambda.asDiagonal() * qv_full.leftCols(10).transpose()));
  const auto spec = spectrum(*op);
  const Vec x0 = gaussian_vector(20, 40) * 3.0;
  const Vec gamma = Vec::Ones(10);

  std::vector<Index> big, small;
  for (Index i = 0; i < 10; ++i) {
    (spec.singular_values[i] > 1.0 ? big : small).push_back(i);
  }
  REQUIRE(big.size() == 4);
  REQUIRE(small.size() == 6);

  for (double beta : {1e-3, 0.1, 1.0, 10.0, 100.0}) {
    const auto only_small = subspace_mse(spec, x0, big, gamma, beta, 0.0);
    CHECK(only_small.bp.mse < only_small.ls.mse);

    const auto only_big = subspace_mse(spec, x0, small, gamma, beta, 0.0);
    CHECK(only_big.bp.mse > only_big.ls.mse);
  }
}

TEST_CASE("priors validate their construction inputs") {
  Mat not_spd = Mat::Identity(4, 4);
  not_spd(2, 2) = -1.0;
  CHECK_THROWS_AS((void)dense_dtd_prior(not_spd), NumericalError);

  Mat asym = Mat::Identity(4, 4);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS((void)dense_dtd_prior(asym), NumericalError);

  // A valid SPD matrix round-trips through prox against a dense solve.
  const Mat dtd = oracles::random_spd(6, 40);
  auto prior = dense_dtd_prior(dtd);
  const Vec z = gaussian_vector(6, 41);
  const double t = 0.8;
  const Vec want = Mat(Mat::Identity(6, 6) + t * dtd).ldlt().solve(z);
  CHECK(oracles::rel_err(prior->prox(z, t), want) <= 1e-10);
}
