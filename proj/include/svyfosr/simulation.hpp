#ifndef SVYFOSR_SIMULATION_HPP
#define SVYFOSR_SIMULATION_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "svyfosr/dataset.hpp"
#include "svyfosr/family.hpp"
#include "svyfosr/resampling.hpp"

namespace svyfosr {

enum class ReMode { None, NoiseOnly, ScalingAndNoise };
enum class Informativeness { None, Medium, High };

ReMode re_mode_from_string(const std::string& s);
Informativeness informativeness_from_string(const std::string& s);

struct SuperpopulationConfig {
  long long population_size = 100000;
  int strata = 30;
  int psu_min = 75;
  int psu_max = 125;
  double dirichlet_strata = 4.0;
  double dirichlet_psu = 10.0;
  Family family = Family::Gaussian;
  int re_basis_dim = 5;      // K
  double sigma_s = 0.25;     // stratum slope-scaling SD
  double sigma_h = 0.5;      // stratum RE SD; PSU RE variance is sigma_h^2 / 2
  double sigma_eps = 1.0;    // Gaussian noise SD
  double snr_b = 0.0;        // > 0: calibrate sigma_h from a pilot
  double snr_eps = 0.0;      // > 0: calibrate sigma_eps from a pilot
  ReMode re_mode = ReMode::ScalingAndNoise;
  int grid_length = 50;      // L
  std::uint64_t seed = 1;
  long long max_cells = 250'000'000;  // capacity guard on N * L

  void validate() const;
};

/// Closed-form truth plus the realized per-stratum slope scales.
struct TrueCoefficients {
  Eigen::VectorXd beta0;  // on the grid
  Eigen::VectorXd beta1;
  std::vector<double> gamma;  // per-stratum scaling of beta1
};

double true_beta0(double s);
double true_beta1(double s);

struct Superpopulation {
  FunctionalDesignDataset data;  // unit weights; covariates = [1, X]
  TrueCoefficients truth;
  SuperpopulationConfig config;  // with calibrated SDs filled in
};

/// A realized sample with its selection probabilities and the truth handle.
struct SampleDraw {
  FunctionalDesignDataset sample;
  StageProbabilities probs;
  Eigen::VectorXd grid;
  Eigen::VectorXd beta0_true;
  Eigen::VectorXd beta1_true;
};

/// Dirichlet-multinomial stratum/PSU assignment, X ~ N(0, variance 2),
/// linear predictor beta0 + X*gamma_h*beta1 + b_h + b_c, outcomes per family.
Superpopulation generate_superpopulation(const SuperpopulationConfig& cfg);

/// Pilot-based calibration: returns cfg with sigma_h (from snr_b) and
/// sigma_eps (from snr_eps) replaced so the realized ratios hit the targets.
SuperpopulationConfig calibrate_variances(const SuperpopulationConfig& cfg,
                                          long long pilot_size = 10000);

/// Two PSUs per stratum by PPSWOR (selection probability proportional to PSU
/// size), then Poisson sampling within each selected PSU with inclusion
/// probabilities tied to the individual's mean outcome when sampling is
/// informative. Weights are inverse products of the stage probabilities.
SampleDraw draw_two_stage_sample(const Superpopulation& pop, int per_psu_n,
                                 Informativeness informativeness,
                                 std::uint64_t seed);

enum class SubsampleScheme { Uniform, WeightBased, OutcomeBased, Mixed };
SubsampleScheme subsample_scheme_from_string(const std::string& s);

/// Single-stage informative Poisson subsample of an observed population:
/// standardize (and truncate at +/-2) the base weights and mean outcomes,
/// push through a logistic, rescale to the target size, draw, and attach
/// w = 1/pi. Stage-1 probabilities are set to 1 (single stage).
SampleDraw empirical_subsample(const FunctionalDesignDataset& pop,
                               SubsampleScheme scheme, Eigen::Index n,
                               std::uint64_t seed);

/// Unweighted pointwise fit on the full superpopulation: the evaluation truth.
Eigen::MatrixXd superpopulation_reference_fit(const Superpopulation& pop);

}  // namespace svyfosr

#endif
