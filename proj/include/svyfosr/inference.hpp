#ifndef SVYFOSR_INFERENCE_HPP
#define SVYFOSR_INFERENCE_HPP

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "svyfosr/dataset.hpp"
#include "svyfosr/family.hpp"
#include "svyfosr/pointwise_glm.hpp"
#include "svyfosr/pspline.hpp"
#include "svyfosr/resampling.hpp"

namespace svyfosr {

/// Point estimates with pointwise and joint (CMA) bands over the grid.
struct BandEstimate {
  Eigen::MatrixXd beta_hat;      // P x L smoothed point estimates
  Eigen::MatrixXd se;            // P x L replicate standard deviations
  Eigen::MatrixXd pointwise_lo;  // beta_hat -/+ z_{1-alpha/2} * se
  Eigen::MatrixXd pointwise_hi;
  Eigen::MatrixXd cma_lo;  // beta_hat -/+ q_{1-alpha} * se
  Eigen::MatrixXd cma_hi;
  Eigen::VectorXd q;       // per-coefficient max-statistic quantiles
  Eigen::VectorXd lambdas; // smoothing parameters chosen on the original fit
  double alpha = 0.05;
  int replicates_used = 0;
  int replicates_failed = 0;
  std::vector<Eigen::MatrixXd> correlation;  // per coefficient, when requested
};

struct FitOptions {
  Family family = Family::Gaussian;
  BootType scheme = BootType::Weighted;
  int num_replicates = 100;
  SmootherSpec smoother;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;
  int mc_samples = 10000;  // max-statistic quantile estimation
  std::optional<StageProbabilities> stage_probs;  // required for RWYB
  bool store_correlation = false;
  std::vector<std::string>* warnings = nullptr;
};

/// Full pipeline: pointwise fit on the original weights, GCV smoothing, B
/// replicate refits smoothed with the original lambdas, then variance-based
/// pointwise and CMA bands. Replicate failures above 5% raise NumericError;
/// below that they are dropped with a warning.
BandEstimate fit_svy_fosr(const FunctionalDesignDataset& ds, const FitOptions& opt);

/// (1-alpha) quantile of max_s |Z(s)| where Z ~ N(0, C) and C is the
/// replicate correlation matrix over the grid. Non-PSD estimates are
/// repaired by flooring eigenvalues at 1e-10.
double cma_quantile(const Eigen::MatrixXd& replicate_curves, double alpha,
                    int mc_samples, std::uint64_t seed,
                    Eigen::MatrixXd* correlation_out = nullptr);

/// Standard normal quantile (used for the pointwise multiplier).
double normal_quantile(double prob);

/// Band CSV for one coefficient: s, beta_hat, se, pw_lo, pw_hi, cma_lo, cma_hi.
void save_band_csv(const std::string& path, const BandEstimate& band,
                   Eigen::Index coefficient, const Eigen::VectorXd& grid);

/// Inverse of save_band_csv; used by the evaluate subcommand.
struct BandColumns {
  Eigen::VectorXd grid, beta_hat, se, pw_lo, pw_hi, cma_lo, cma_hi;
};
BandColumns load_band_csv(const std::string& path);

}  // namespace svyfosr

#endif
