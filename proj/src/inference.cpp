#include "svyfosr/inference.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <random>
#include <thread>

#include "svyfosr/csv.hpp"
#include "svyfosr/errors.hpp"

namespace svyfosr {

namespace {

void parallel_for(Eigen::Index count, int threads, const std::function<void(Eigen::Index)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || count < 2) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const Eigen::Index i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw SchemaError("quantile probability must be in (0,1)");
  // Newton iteration on Phi(x) - prob with an erfc-based start.
  double x = 0.0;
  for (int it = 0; it < 60; ++it) {
    const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double step = (cdf - prob) / std::max(pdf, 1e-300);
    x -= step;
    if (std::abs(step) < 1e-13) break;
  }
  return x;
}

double cma_quantile(const Eigen::MatrixXd& replicate_curves, double alpha,
                    int mc_samples, std::uint64_t seed,
                    Eigen::MatrixXd* correlation_out) {
  const Eigen::Index B = replicate_curves.rows();
  const Eigen::Index L = replicate_curves.cols();
  if (B < 2) throw SchemaError("need at least 2 replicates for a correlation matrix");
  if (!replicate_curves.allFinite())
    throw NumericError("replicate curves contain non-finite values");

  const Eigen::RowVectorXd mean = replicate_curves.colwise().mean();
  Eigen::MatrixXd centered = replicate_curves.rowwise() - mean;
  Eigen::VectorXd sd = (centered.colwise().squaredNorm() / double(B - 1)).cwiseSqrt();

  // Zero-variance points carry no randomness; keep them uncorrelated.
  Eigen::VectorXd inv_sd(L);
  for (Eigen::Index l = 0; l < L; ++l)
    inv_sd[l] = sd[l] > 1e-14 ? 1.0 / sd[l] : 0.0;
  Eigen::MatrixXd corr =
      inv_sd.asDiagonal() * (centered.transpose() * centered / double(B - 1)) *
      inv_sd.asDiagonal();
  for (Eigen::Index l = 0; l < L; ++l) corr(l, l) = 1.0;
  if (correlation_out) *correlation_out = corr;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  const Eigen::VectorXd evals = eig.eigenvalues().cwiseMax(1e-10);
  const Eigen::MatrixXd root =
      eig.eigenvectors() * evals.cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(replicate_stream_seed(seed, 0x636d61ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> max_abs(static_cast<std::size_t>(mc_samples));
  Eigen::VectorXd g(L);
  for (int m = 0; m < mc_samples; ++m) {
    for (Eigen::Index l = 0; l < L; ++l) g[l] = normal(rng);
    max_abs[static_cast<std::size_t>(m)] = (root * g).cwiseAbs().maxCoeff();
  }
  std::sort(max_abs.begin(), max_abs.end());
  const auto idx = static_cast<std::size_t>(
      std::clamp<long long>(std::llround((1.0 - alpha) * mc_samples) - 1, 0,
                            mc_samples - 1));
  return max_abs[idx];
}

BandEstimate fit_svy_fosr(const FunctionalDesignDataset& ds, const FitOptions& opt) {
  ds.validate();
  if (opt.num_replicates < 2) throw SchemaError("need at least 2 replicates");
  if (opt.num_replicates < 50 && opt.warnings)
    opt.warnings->push_back("fewer than 50 replicates; bands may be unstable");

  const bool unweighted = opt.scheme == BootType::Unweighted;
  const Eigen::VectorXd base_weights =
      unweighted ? Eigen::VectorXd::Ones(ds.n()) : ds.weights;

  const RawCoefficientMatrix raw = fit_pointwise(ds, base_weights, opt.family);
  SmoothedCoefficients smoothed =
      smooth_coefficients(raw.beta, ds.grid, opt.smoother);
  const Eigen::Index P = smoothed.beta_hat.rows();
  const Eigen::Index L = smoothed.beta_hat.cols();

  if (opt.num_replicates < L / 2 && opt.warnings)
    opt.warnings->push_back(
        "B < L/2; correlation estimate for the joint band may be noisy");

  ReplicateWeightSet reps;
  switch (opt.scheme) {
    case BootType::Unweighted:
      reps = resample_unweighted(ds.n(), opt.num_replicates, opt.seed);
      break;
    case BootType::Weighted:
      reps = resample_survey_weighted(ds.weights, opt.num_replicates, opt.seed);
      break;
    case BootType::BRR:
      reps = resample_brr(summarize_design(ds), ds.psu_ids, opt.num_replicates,
                          opt.seed);
      break;
    case BootType::RWYB: {
      if (!opt.stage_probs)
        throw DesignError(
            "RWYB requires selection probabilities at each sampling stage; "
            "supply a stage-probability file");
      reps = make_rwyb_weights(summarize_design(ds), ds.psu_ids, ds.stratum_ids,
                               *opt.stage_probs, /*m1_rule=*/0,
                               opt.num_replicates, opt.seed);
      break;
    }
  }

  const std::size_t B = reps.num_replicates();
  std::vector<Eigen::MatrixXd> rep_curves(B);
  std::vector<std::uint8_t> failed(B, 0);
  parallel_for(static_cast<Eigen::Index>(B), opt.threads, [&](Eigen::Index b) {
    try {
      const Eigen::VectorXd w =
          replicate_fit_weights(reps, static_cast<std::size_t>(b), base_weights);
      const RawCoefficientMatrix rb = fit_pointwise(ds, w, opt.family);
      rep_curves[static_cast<std::size_t>(b)] =
          smooth_with_fixed_lambda(rb.beta, smoothed.lambdas, smoothed.cache);
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(b)] = 1;
    }
  });

  const int n_failed =
      static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  if (n_failed > 0.05 * static_cast<double>(B))
    throw NumericError(std::to_string(n_failed) + " of " + std::to_string(B) +
                       " replicate fits failed");
  if (n_failed > 0 && opt.warnings)
    opt.warnings->push_back("dropped " + std::to_string(n_failed) +
                            " failed replicate fits");

  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < B; ++b)
    if (!failed[b]) kept.push_back(b);
  const auto Bk = static_cast<Eigen::Index>(kept.size());

  BandEstimate out;
  out.beta_hat = smoothed.beta_hat;
  out.lambdas = smoothed.lambdas;
  out.alpha = opt.alpha;
  out.replicates_used = static_cast<int>(Bk);
  out.replicates_failed = n_failed;
  out.se.resize(P, L);
  out.q.resize(P);
  if (opt.store_correlation) out.correlation.resize(static_cast<std::size_t>(P));

  const double z = normal_quantile(1.0 - opt.alpha / 2.0);
  Eigen::MatrixXd curves(Bk, L);
  for (Eigen::Index p = 0; p < P; ++p) {
    for (Eigen::Index k = 0; k < Bk; ++k)
      curves.row(k) = rep_curves[kept[static_cast<std::size_t>(k)]].row(p);
    const Eigen::RowVectorXd mean = curves.colwise().mean();
    out.se.row(p) = ((curves.rowwise() - mean).colwise().squaredNorm() /
                     double(Bk - 1))
                        .cwiseSqrt();
    Eigen::MatrixXd* corr =
        opt.store_correlation ? &out.correlation[static_cast<std::size_t>(p)]
                              : nullptr;
    out.q[p] = cma_quantile(curves, opt.alpha, opt.mc_samples,
                            replicate_stream_seed(opt.seed, 0x71ULL + static_cast<std::uint64_t>(p)),
                            corr);
  }

  out.pointwise_lo = out.beta_hat - z * out.se;
  out.pointwise_hi = out.beta_hat + z * out.se;
  out.cma_lo = out.beta_hat - out.q.asDiagonal() * out.se;
  out.cma_hi = out.beta_hat + out.q.asDiagonal() * out.se;
  return out;
}

void save_band_csv(const std::string& path, const BandEstimate& band,
                   Eigen::Index coefficient, const Eigen::VectorXd& grid) {
  csv::Table t;
  t.header = {"s", "beta_hat", "se", "pw_lo", "pw_hi", "cma_lo", "cma_hi"};
  const Eigen::Index p = coefficient;
  for (Eigen::Index l = 0; l < grid.size(); ++l) {
    t.rows.push_back({csv::format_double(grid[l]),
                      csv::format_double(band.beta_hat(p, l)),
                      csv::format_double(band.se(p, l)),
                      csv::format_double(band.pointwise_lo(p, l)),
                      csv::format_double(band.pointwise_hi(p, l)),
                      csv::format_double(band.cma_lo(p, l)),
                      csv::format_double(band.cma_hi(p, l))});
  }
  csv::write_file(path, t);
}

BandColumns load_band_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  auto col = [&](const char* name) {
    const std::size_t j = t.require(name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::stod(t.rows[i][j]);
    return v;
  };
  BandColumns out;
  out.grid = col("s");
  out.beta_hat = col("beta_hat");
  out.se = col("se");
  out.pw_lo = col("pw_lo");
  out.pw_hi = col("pw_hi");
  out.cma_lo = col("cma_lo");
  out.cma_hi = col("cma_hi");
  return out;
}

}  // namespace svyfosr
