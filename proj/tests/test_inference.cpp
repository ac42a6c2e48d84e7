#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <random>

#include "test_util.hpp"

#include "svyfosr/errors.hpp"
#include "svyfosr/inference.hpp"

using namespace svyfosr;

namespace {

// Gaussian replicate curves with independent columns.
Eigen::MatrixXd independent_curves(int B, int L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(B, L);
  for (int b = 0; b < B; ++b)
    for (int l = 0; l < L; ++l) out(b, l) = normal(rng);
  return out;
}

// Small survey dataset: linear signal, two strata, four PSUs each.
FunctionalDesignDataset make_survey_dataset(int n, int L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> wdist(0.5, 3.0);
  FunctionalDesignDataset ds;
  ds.outcomes.resize(n, L);
  ds.covariates.resize(n, 2);
  ds.weights.resize(n);
  ds.grid = Eigen::VectorXd::LinSpaced(L, 0.0, 1.0);
  ds.original_grid = ds.grid;
  ds.covariate_names = {"(intercept)", "x"};
  for (int i = 0; i < n; ++i) {
    const double x = normal(rng);
    ds.covariates(i, 0) = 1.0;
    ds.covariates(i, 1) = x;
    ds.weights[i] = wdist(rng);
    ds.stratum_ids.push_back(i % 2);
    ds.psu_ids.push_back(i % 8);
    for (int l = 0; l < L; ++l) {
      const double s = ds.grid[l];
      ds.outcomes(i, l) = 0.5 + std::sin(2.0 * M_PI * s) * x + 0.3 * normal(rng);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("normal_quantile against tabulated values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-7));
  CHECK(normal_quantile(0.995) == doctest::Approx(2.575829304).epsilon(1e-7));
  CHECK(normal_quantile(0.025) == doctest::Approx(-normal_quantile(0.975)).epsilon(1e-9));
  CHECK_THROWS_AS(normal_quantile(0.0), SchemaError);
}

TEST_CASE("cma quantile: single grid point reduces to the normal quantile") {
  const Eigen::MatrixXd curves = independent_curves(500, 1, 11);
  const double q = cma_quantile(curves, 0.05, 200000, 7);
  CHECK(q == doctest::Approx(1.96).epsilon(0.02 / 1.96));
}

TEST_CASE("cma quantile: perfectly correlated grid collapses to one point") {
  const Eigen::MatrixXd base = independent_curves(400, 1, 21);
  Eigen::MatrixXd curves(400, 12);
  for (int l = 0; l < 12; ++l) curves.col(l) = base.col(0) * (1.0 + 0.5 * l);
  const double q = cma_quantile(curves, 0.05, 200000, 13);
  CHECK(q == doctest::Approx(1.96).epsilon(0.025 / 1.96));
}

TEST_CASE("cma quantile: independent columns match the closed form") {
  // With C = I_L the max of |Z_l| has CDF (2 Phi(q) - 1)^L, so the 0.95
  // quantile solves 2 Phi(q) - 1 = 0.95^(1/L).
  const int L = 10;
  const Eigen::MatrixXd curves = independent_curves(4000, L, 31);
  const double q = cma_quantile(curves, 0.05, 200000, 17);
  const double q_true = normal_quantile((1.0 + std::pow(0.95, 1.0 / L)) / 2.0);
  CHECK(std::abs(q - q_true) < 0.05);
}

TEST_CASE("cma quantile: grows with grid size, bounded by pointwise z") {
  const double q1 = cma_quantile(independent_curves(3000, 2, 41), 0.05, 50000, 3);
  const double q2 = cma_quantile(independent_curves(3000, 8, 41), 0.05, 50000, 3);
  const double q3 = cma_quantile(independent_curves(3000, 25, 41), 0.05, 50000, 3);
  CHECK(q1 < q2);
  CHECK(q2 < q3);
  CHECK(q1 > 1.95);  // never below the single-point multiplier
}

TEST_CASE("cma quantile: deterministic for a fixed seed") {
  const Eigen::MatrixXd curves = independent_curves(200, 6, 51);
  CHECK(cma_quantile(curves, 0.05, 20000, 5) == cma_quantile(curves, 0.05, 20000, 5));
}

TEST_CASE("cma quantile: zero-variance column is tolerated") {
  Eigen::MatrixXd curves = independent_curves(300, 4, 61);
  curves.col(2).setConstant(3.5);
  const double q = cma_quantile(curves, 0.05, 20000, 9);
  CHECK(std::isfinite(q));
  CHECK(q > 1.9);
}

TEST_CASE("fit produces nested bands and plausible coverage pieces") {
  auto ds = make_survey_dataset(240, 40, 71);
  FitOptions opt;
  opt.scheme = BootType::Weighted;
  opt.num_replicates = 60;
  opt.seed = 2024;
  std::vector<std::string> warnings;
  opt.warnings = &warnings;
  const BandEstimate band = fit_svy_fosr(ds, opt);

  REQUIRE(band.beta_hat.rows() == 2);
  REQUIRE(band.beta_hat.cols() == 40);
  CHECK(band.replicates_used == 60);
  CHECK(band.replicates_failed == 0);
  CHECK((band.se.array() >= 0.0).all());
  // Joint multiplier dominates the pointwise one, so the CMA band contains
  // the pointwise band everywhere.
  for (int p = 0; p < 2; ++p) {
    CHECK(band.q[p] >= normal_quantile(0.975) - 1e-9);
    for (int l = 0; l < 40; ++l) {
      CHECK(band.cma_lo(p, l) <= band.pointwise_lo(p, l) + 1e-12);
      CHECK(band.cma_hi(p, l) >= band.pointwise_hi(p, l) - 1e-12);
    }
  }
  // The smoothed estimate should track the strong sinusoidal slope signal.
  const Eigen::VectorXd truth =
      (2.0 * M_PI * ds.grid.array()).sin().matrix();
  const double rmse =
      std::sqrt((band.beta_hat.row(1).transpose() - truth).squaredNorm() / 40.0);
  CHECK(rmse < 0.15);
}

TEST_CASE("fit is byte-identical across 1, 4, and 8 worker threads") {
  auto ds = make_survey_dataset(160, 30, 81);
  FitOptions opt;
  opt.scheme = BootType::Weighted;
  opt.num_replicates = 40;
  opt.seed = 5;
  BandEstimate ref = fit_svy_fosr(ds, opt);
  for (int threads : {4, 8}) {
    opt.threads = threads;
    BandEstimate alt = fit_svy_fosr(ds, opt);
    CHECK((ref.beta_hat - alt.beta_hat).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ref.se - alt.se).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ref.q - alt.q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ref.cma_lo - alt.cma_lo).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("rwyb scheme without stage probabilities is a design error") {
  auto ds = make_survey_dataset(80, 20, 91);
  FitOptions opt;
  opt.scheme = BootType::RWYB;
  opt.num_replicates = 10;
  CHECK_THROWS_AS(fit_svy_fosr(ds, opt), DesignError);
  try {
    fit_svy_fosr(ds, opt);
  } catch (const DesignError& e) {
    CHECK(std::string(e.what()).find("probabilit") != std::string::npos);
  }
}

TEST_CASE("excess replicate failures raise a numeric error") {
  // A covariate active in a single row: bootstrap resamples that miss the
  // row give a rank-deficient design, so well over 5% of replicates fail.
  auto ds = make_survey_dataset(10, 12, 101);
  ds.covariates.col(1).setZero();
  ds.covariates(0, 1) = 1.0;
  FitOptions opt;
  opt.scheme = BootType::Unweighted;
  opt.num_replicates = 60;
  opt.smoother.basis_dim = 4;
  opt.seed = 12;
  CHECK_THROWS_AS(fit_svy_fosr(ds, opt), NumericError);
}

TEST_CASE("band csv round trip") {
  auto ds = make_survey_dataset(120, 20, 111);
  FitOptions opt;
  opt.num_replicates = 30;
  const BandEstimate band = fit_svy_fosr(ds, opt);
  const std::string path = testutil::temp_path();
  save_band_csv(path, band, 1, ds.original_grid);
  const BandColumns cols = load_band_csv(path);
  std::remove(path.c_str());
  REQUIRE(cols.grid.size() == 20);
  CHECK((cols.beta_hat - band.beta_hat.row(1).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cols.se - band.se.row(1).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cols.cma_lo - band.cma_lo.row(1).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cols.cma_hi - band.cma_hi.row(1).transpose()).cwiseAbs().maxCoeff() == 0.0);
}
