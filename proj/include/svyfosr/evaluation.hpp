#ifndef SVYFOSR_EVALUATION_HPP
#define SVYFOSR_EVALUATION_HPP

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "svyfosr/dataset.hpp"
#include "svyfosr/inference.hpp"

namespace svyfosr {

/// Per-run accuracy and coverage summary.
struct EvalReport {
  std::map<std::string, std::string> keys;  // grouping labels (scheme, setting, ...)
  Eigen::VectorXd ise;                      // per coefficient
  Eigen::VectorXd pointwise_coverage;       // per coefficient, fraction of grid
  Eigen::VectorXd joint_covered;            // per coefficient, 0/1
};

/// Trapezoidal quadrature of {beta_hat - beta_true}^2 over the grid.
double ise(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_true,
           const Eigen::VectorXd& grid);

/// Pointwise coverage uses the mean +/- 2 SD band convention; joint coverage
/// is all-points containment in the CMA band.
void coverage(const BandEstimate& bands, const Eigen::MatrixXd& beta_true,
              Eigen::VectorXd* pointwise_fraction, Eigen::VectorXd* joint_indicator);

/// Functional ANOVA proxy for within-PSU correlation strength: integrated
/// between-PSU variance of the mean outcome over integrated total variance.
double variance_proportion(const FunctionalDesignDataset& ds);

/// Grouped means over reports sharing identical key maps. Values per group:
/// MISE, mean pointwise coverage, joint coverage rate, log10 MISE, count.
struct AggregateRow {
  std::map<std::string, std::string> keys;
  int runs = 0;
  Eigen::VectorXd mise;                // per coefficient
  Eigen::VectorXd mean_pw_coverage;    // per coefficient
  Eigen::VectorXd joint_coverage;      // per coefficient
};
std::vector<AggregateRow> aggregate_runs(const std::vector<EvalReport>& reports);

void save_aggregate_csv(const std::string& path,
                        const std::vector<AggregateRow>& rows);

}  // namespace svyfosr

#endif
